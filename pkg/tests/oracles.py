"""Independent reference computations.

Everything here is written with explicit loops over labeled indices and
never calls the library's einsum paths, so agreement is meaningful.
"""

from itertools import product

import numpy as np


def _idx(*spaces):
    return product(*(range(s.size) for s in spaces))


def dynamical_behavior(m):
    """Enumerate every path (g0, A0, B0) -> (g, A, B) -> (A', B') -> (a, b)."""
    s = m.spaces
    init = m.rho0.spaces
    out = np.zeros((s["a"].size, s["b"].size, s["x"].size, s["y"].size))
    for i0 in _idx(*init):
        w0 = m.rho0.weights[i0]
        if w0 == 0:
            continue
        for g, A, B in _idx(s["g"], s["A"], s["B"]):
            w1 = w0 * m.evolution.table[i0 + (g, A, B)]
            if w1 == 0:
                continue
            for x, y, ap, bp, a, b in _idx(s["x"], s["y"], s["A'"], s["B'"], s["a"], s["b"]):
                out[a, b, x, y] += (w1 * m.tA.table[g, A, B, x, ap] * m.tB.table[g, A, B, y, bp]
                                    * m.pA.table[x, g, ap, a] * m.pB.table[y, g, bp, b])
    return out


def generalized_behavior(gm):
    """Path enumeration honoring the global mode and any declared distant arguments."""
    s = gm.spaces
    nx, ny = s["x"].size, s["y"].size
    out = np.zeros((s["a"].size, s["b"].size, nx, ny))
    rho_pre = np.zeros(tuple(sp.size for sp in (s["g"], s["A"], s["B"])))
    for i0 in _idx(*gm.rho0.spaces):
        for j in _idx(s["g"], s["A"], s["B"]):
            rho_pre[j] += gm.rho0.weights[i0] * gm.evolution.table[i0 + j]
    d = gm.distant

    def arg(name, base, other):
        return base + ((other,) if name in d else ())

    for x, y in _idx(s["x"], s["y"]):
        rho = rho_pre if gm.rho_pre_conditioned is None else gm.rho_pre_conditioned.table[x, y]
        for g, A, B in _idx(s["g"], s["A"], s["B"]):
            w = rho[g, A, B]
            if w == 0:
                continue
            for ap, bp, a, b in _idx(s["A'"], s["B'"], s["a"], s["b"]):
                tb = gm.tB.table[arg("tB", (g, A, B, y), x) + (bp,)]
                if gm.global_mode == "read-only":
                    ta = gm.tA.table[arg("tA", (g, A, B, x), y) + (ap,)]
                    pa = gm.pA.table[arg("pA", (x, g, ap), y) + (a,)]
                    pb = gm.pB.table[arg("pB", (y, g, bp), x) + (b,)]
                    out[a, b, x, y] += w * ta * tb * pa * pb
                    continue
                for h in range(s["g"].size):
                    ta = gm.tA.table[arg("tA", (g, A, B, x), y) + (ap, h)]
                    pa = gm.pA.table[arg("pA", (x, h, ap), y) + (a,)]
                    bob_g = h if gm.global_mode == "perturbed" else g
                    pb = gm.pB.table[arg("pB", (y, bob_g, bp), x) + (b,)]
                    out[a, b, x, y] += w * ta * tb * pa * pb
    return out


def static_behavior(sm):
    lam = sm.rho_pre.spaces
    x, y = sm.qA.inputs[0], sm.qB.inputs[0]
    a, b = sm.qA.outputs[0], sm.qB.outputs[0]
    out = np.zeros((a.size, b.size, x.size, y.size))
    for L in _idx(*lam):
        for xi, yi, ai, bi in _idx(x, y, a, b):
            out[ai, bi, xi, yi] += sm.rho_pre.weights[L] * sm.qA.table[(xi,) + L + (ai,)] * sm.qB.table[(yi,) + L + (bi,)]
    return out


def chsh_by_hand(table):
    """CHSH from a (2, 2, 2, 2) table with label 0 -> +1 and label 1 -> -1."""
    sign = (1, -1)
    E = [[sum(sign[a] * sign[b] * table[a, b, x, y] for a in range(2) for b in range(2))
          for y in range(2)] for x in range(2)]
    return E[0][0] + E[0][1] + E[1][0] - E[1][1]


def pr_box_table():
    """The eight nonzero PR-box entries written out by hand."""
    t = np.zeros((2, 2, 2, 2))
    for x, y in product(range(2), range(2)):
        if x == 1 and y == 1:
            t[0, 1, x, y] = t[1, 0, x, y] = 0.5
        else:
            t[0, 0, x, y] = t[1, 1, x, y] = 0.5
    return t
