#!/usr/bin/env python3
"""Single-update verification latency on a large synthetic network.

Generates a shortest-path-routed network, withholds part of the rules,
replays them as an insert/delete stream, and prints the verification-time
CDF (the load phase is excluded from the timed region).
"""

import argparse
import random
import time

from netvec.dataset import UpdateEvent, generate_synthetic, run_update_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--edges", type=int, default=100000)
    ap.add_argument("--rules-per-node", type=int, default=1000)
    ap.add_argument("--updates", type=int, default=600)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    t0 = time.perf_counter()
    spec = generate_synthetic(args.nodes, args.edges, args.rules_per_node,
                              seed=args.seed, width=32)
    print(f"generated {len(spec.routers)} routers / {len(spec.edges)} links / "
          f"{spec.rule_count} rules in {time.perf_counter() - t0:.1f}s")

    rng = random.Random(args.seed + 1)
    keys = [(r, p) for r in spec.routers for p in spec.rules[r]]
    sample = rng.sample(keys, args.updates)
    events = []
    half = args.updates // 2
    for r, p in sample[:half]:
        port = spec.rules[r].pop(p)
        events.append(UpdateEvent("insert", r, p, port, len(events)))
    for r, p in sample[half:]:
        events.append(UpdateEvent("delete", r, p, spec.rules[r][p], len(events)))

    t1 = time.perf_counter()
    records, summary = run_update_stream(spec, events, seed=args.seed)
    print(f"replayed {summary.count} updates in {time.perf_counter() - t1:.1f}s "
          f"(load included, timing per update excludes it)")
    print(f"  p50 = {summary.p50_us:8.1f} us")
    print(f"  p90 = {summary.p90_us:8.1f} us")
    print(f"  p99 = {summary.p99_us:8.1f} us")
    print(f"  under 250 us: {summary.frac_under_250us:.1%}")
    times = sorted(r.verify_us for r in records)
    for threshold in (500, 1000, 2500):
        frac = sum(1 for t in times if t <= threshold) / len(times)
        print(f"  under {threshold} us: {frac:.1%}")


if __name__ == "__main__":
    main()
