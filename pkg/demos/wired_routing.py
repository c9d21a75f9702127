"""Max-flow routing on a random wired DAG, checked against brute-force cuts.

Usage: python3 demos/wired_routing.py --nodes 8 --seed 3
"""

import argparse
import random
from fractions import Fraction

from mhxdof.flow import WiredGraph, brute_force_min_cut, max_flow_routing, verify_routing


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=8)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--density", type=float, default=0.5)
    args = ap.parse_args()

    rnd = random.Random(args.seed)
    n = args.nodes
    edges = [
        (f"n{u}", f"n{v}", Fraction(rnd.randint(1, 6), rnd.randint(1, 3)))
        for u in range(n)
        for v in range(u + 1, n)
        if rnd.random() < args.density
    ]
    g = WiredGraph.from_edges(edges, ("n0", "n1"), (f"n{n - 2}", f"n{n - 1}"))

    sol = max_flow_routing(g)
    print(f"{len(g.capacities)} edges, sum rate {sol.sum_rate}, brute-force min cut {brute_force_min_cut(g)}")
    for p in sol.paths:
        print(f"  {p.message}  rate {str(p.rate):>6s}  {' -> '.join(p.nodes)}")
    rep = verify_routing(g, sol)
    print("verified:", rep.passed, "cut side:", sorted(rep.cut))


if __name__ == "__main__":
    main()
