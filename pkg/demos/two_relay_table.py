"""Sum DoF of every canonical two-node-per-layer network up to a given depth.

Usage: python3 demos/two_relay_table.py --max-hops 3
"""

import argparse
import itertools
from collections import defaultdict

from mhxdof.bounds import fraction_str, upper_bound
from mhxdof.classify import classify_two_relay
from mhxdof.network import canonicalize, network_from_word


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-hops", type=int, default=3)
    args = ap.parse_args()

    by_value = defaultdict(set)
    for L in range(1, args.max_hops + 1):
        for letters in itertools.product("PZSX", repeat=L):
            word = canonicalize("".join(letters)).word
            by_value[classify_two_relay(word).value].add(word)

    for value in sorted(by_value):
        words = sorted(by_value[value], key=lambda w: (len(w), w))
        print(f"sum DoF {fraction_str(value)}: {len(words)} canonical words")
        print("   ", " ".join(words[:24]), "..." if len(words) > 24 else "")

    # the outer-bound LP lands on the same numbers
    print()
    for word in ("XZ", "ZZX", "ZS", "X", "ZSZ"):
        rep = upper_bound(network_from_word(word))
        coeffs, rhs = rep.lp.combination()
        lhs = " + ".join(f"{c}*d{m}" for c, m in zip(coeffs, ("11", "12", "21", "22")))
        print(f"{word:4s} LP optimum {fraction_str(rep.optimum):4s} certificate {lhs} <= {rhs}")


if __name__ == "__main__":
    main()
