#!/usr/bin/env python3
"""Verification-time scaling as the rule count doubles.

Keeps the topology fixed and doubles the number of destination prefixes,
printing the median affected-set + verification time per size and the
fitted log-log slope.
"""

import argparse
import math
import random

from netvec.dataset import UpdateEvent, generate_synthetic, run_update_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=120)
    ap.add_argument("--edges", type=int, default=480)
    ap.add_argument("--base-prefixes", type=int, default=256)
    ap.add_argument("--doublings", type=int, default=3)
    ap.add_argument("--updates", type=int, default=150)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    sizes = [args.base_prefixes << k for k in range(args.doublings + 1)]
    medians = []
    for n_prefixes in sizes:
        spec = generate_synthetic(args.nodes, args.edges, n_prefixes,
                                  seed=args.seed, width=32)
        rng = random.Random(args.seed + 6)
        keys = [(r, p) for r in spec.routers for p in spec.rules[r]]
        events = []
        for r, p in rng.sample(keys, args.updates):
            port = spec.rules[r].pop(p)
            events.append(UpdateEvent("insert", r, p, port, len(events)))
        _, summary = run_update_stream(spec, events, seed=args.seed)
        medians.append(summary.p50_us)
        print(f"prefixes={n_prefixes:6d} rules={spec.rule_count:8d} "
              f"median={summary.p50_us:8.1f} us")

    ratios = [b / a for a, b in zip(medians, medians[1:])]
    xs = [math.log2(s) for s in sizes]
    ys = [math.log2(m) for m in medians]
    n = len(xs)
    slope = ((n * sum(x * y for x, y in zip(xs, ys)) - sum(xs) * sum(ys))
             / (n * sum(x * x for x in xs) - sum(xs) ** 2))
    print(f"doubling ratios: {['%.2f' % r for r in ratios]}")
    print(f"log-log slope:   {slope:.3f}")


if __name__ == "__main__":
    main()
