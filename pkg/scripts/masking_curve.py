"""Bob's x-dependence in the ghost model as the ontic bit's bias moves off 1/2."""

import argparse

import numpy as np

from dynbell.scenarios import equilibrium_masking_demo


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=21)
    args = p.parse_args(argv)

    print("bias\tmax_x_dependence\tpredicted\tP(b=0|x=0,y=1)\tP(b=0|x=1,y=1)")
    for bias in np.linspace(0.0, 1.0, args.points):
        r = equilibrium_masking_demo(float(bias))
        pb = r.bob_marginals
        print(f"{bias:.3f}\t{r.max_x_dependence:.12f}\t{abs(2 * bias - 1):.12f}\t{pb[0, 0, 1]:.6f}\t{pb[0, 1, 1]:.6f}")


if __name__ == "__main__":
    main()
