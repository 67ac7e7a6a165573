#!/usr/bin/env python3
"""Cumulative projection error versus path length.

Samples source/destination pairs on a shortest-path-routed synthetic
network and, for each pair, scores every simple path (up to a hop window
above the shortest) by the accumulated l2 norm of per-hop projection
errors for the destination's own prefixes. Paths that carry the flows
should sit near zero; detours collect error at every router that lacks the
relevant rules.
"""

import argparse
import random
from collections import defaultdict

from netvec.dataset import generate_synthetic
from netvec.rectify import path_quality
from netvec.verify import NetworkState


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=20)
    ap.add_argument("--edges", type=int, default=36)
    ap.add_argument("--pairs", type=int, default=40)
    ap.add_argument("--window", type=int, default=3,
                    help="extra hops above the shortest path to include")
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    spec = generate_synthetic(args.nodes, args.edges, args.nodes,
                              seed=args.seed, width=16,
                              mask_distribution={6: 1, 8: 3, 10: 2})
    state = NetworkState.from_spec(spec)
    session = state.session()
    leaf_classes = set(session.classes)
    homes = [(p, r) for p, r in state.homes.items() if p in leaf_classes]
    rng = random.Random(args.seed + 1)

    by_length = defaultdict(list)
    sampled = 0
    while sampled < args.pairs and homes:
        target, dst = homes[rng.randrange(len(homes))]
        src = rng.choice([r for r in spec.routers if r != dst])
        b0 = session.query_vector([target])
        if b0.is_zero():
            continue
        qualities = path_quality(session, src, dst, b_init=b0, max_paths=5000)
        shortest = min(len(q.path) for q in qualities)
        for q in qualities:
            extra = len(q.path) - shortest
            if extra <= args.window:
                by_length[extra].append(q.cumulative_l2)
        sampled += 1

    print(f"{sampled} pairs on {args.nodes} routers "
          f"({len(session.classes)} header classes)")
    print("hops over shortest | paths | mean cumulative l2 | max")
    for extra in sorted(by_length):
        values = by_length[extra]
        print(f"{extra:18d} | {len(values):5d} | {sum(values) / len(values):18.2f} "
              f"| {max(values):.2f}")


if __name__ == "__main__":
    main()
