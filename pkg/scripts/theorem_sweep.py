"""Sweep random dynamical models: reduction gap, Q-row normalization and CHSH.

Prints a TSV table (one row per model) followed by a summary line.
"""

import argparse
import sys

import numpy as np

from dynbell.chsh import chsh_value
from dynbell.models import behavior_of_dynamical, behavior_of_static
from dynbell.random_models import random_dynamical_model
from dynbell.reduction import absorb_alice, absorb_bob, reduce_to_static


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--models", type=int, default=1000)
    p.add_argument("--max-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    out = sys.stdout
    out.write("model\tgap\tq_row_dev\tchsh\n")
    worst_gap = worst_row = worst_chsh = 0.0
    for i, ss in enumerate(np.random.SeedSequence(args.seed).spawn(args.models)):
        m = random_dynamical_model(np.random.default_rng(ss), args.max_size, binary=True)
        b = behavior_of_dynamical(m)
        gap = b.max_diff(behavior_of_static(reduce_to_static(m)))
        row = max(float(np.max(np.abs(q.table.sum(axis=-1) - 1))) for q in (absorb_alice(m), absorb_bob(m)))
        s = chsh_value(b)
        worst_gap, worst_row, worst_chsh = max(worst_gap, gap), max(worst_row, row), max(worst_chsh, abs(s))
        out.write(f"{i}\t{gap:.3e}\t{row:.3e}\t{s:.12f}\n")
    print(f"# max gap {worst_gap:.3e}, max row deviation {worst_row:.3e}, max |CHSH| {worst_chsh:.12f}",
          file=sys.stderr)


if __name__ == "__main__":
    main()
