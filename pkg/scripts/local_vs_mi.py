"""Best CHSH found by the optimizer for the local and setting-conditioned families.

Writes one TSV trace per family (``<prefix>_<family>.tsv``) and prints a summary table.
"""

import argparse

from dynbell.optimize import FAMILIES, optimize_chsh


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default=None, help="write traces to <prefix>_<family>.tsv")
    args = p.parse_args(argv)

    print("family\tbest_chsh\tbest_restart\titerations")
    for name in ("local", "mi"):
        res = optimize_chsh(FAMILIES[name](), args.restarts, args.iters, args.seed)
        print(f"{name}\t{res.best_value!r}\t{res.best_restart}\t{len(res.trace)}")
        if args.prefix:
            with open(f"{args.prefix}_{name}.tsv", "w") as fh:
                fh.write("restart\titeration\trestart_best\tglobal_best\n")
                for row in res.trace:
                    fh.write("\t".join(map(repr, row)) + "\n")


if __name__ == "__main__":
    main()
