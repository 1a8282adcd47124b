"""CHSH functional, the deterministic local bound, and reference behaviors.

Outcome labels follow the bit convention: the first label of an outcome
space encodes +1 and the second -1, unless a :class:`ChshSpec` says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .core import Behavior, DynbellError, FiniteSpace, space

SIGNS = (1, 1, 1, -1)


class NotChshShaped(DynbellError, ValueError):
    pass


@dataclass(frozen=True)
class ChshSpec:
    enc_a: tuple[int, int] = (1, -1)
    enc_b: tuple[int, int] = (1, -1)
    signs: tuple[int, int, int, int] = SIGNS

    def __post_init__(self):
        for enc in (self.enc_a, self.enc_b):
            if sorted(enc) != [-1, 1]:
                raise ValueError(f"encoding {enc} is not a bijection onto {{+1, -1}}")

    def flipped(self) -> "ChshSpec":
        return ChshSpec(tuple(-e for e in self.enc_a), tuple(-e for e in self.enc_b), self.signs)


DEFAULT_SPEC = ChshSpec()


def _require_binary(b: Behavior, settings: bool = False):
    if b.a.size != 2 or b.b.size != 2:
        raise NotChshShaped(f"outcome spaces must be binary, got {b.a.size} and {b.b.size}")
    if settings and (b.x.size != 2 or b.y.size != 2):
        raise NotChshShaped(f"need two settings per party, got {b.x.size} and {b.y.size}")


def correlator(b: Behavior, x: int, y: int, spec: ChshSpec = DEFAULT_SPEC) -> float:
    """E(x, y) = sum_ab enc(a) enc(b) P(a, b | x, y)."""
    _require_binary(b)
    ab = np.outer(spec.enc_a, spec.enc_b)
    return float(np.sum(ab * b.table[:, :, x, y]))


def correlators(b: Behavior, spec: ChshSpec = DEFAULT_SPEC) -> np.ndarray:
    _require_binary(b)
    ab = np.outer(spec.enc_a, spec.enc_b)
    return np.einsum("ab,abxy->xy", ab, b.table)


def chsh_value(b: Behavior, spec: ChshSpec = DEFAULT_SPEC) -> float:
    """E(0,0) + E(0,1) + E(1,0) - E(1,1) under the sign pattern of ``spec``."""
    _require_binary(b, settings=True)
    E = correlators(b, spec)
    s00, s01, s10, s11 = spec.signs
    return float(s00 * E[0, 0] + s01 * E[0, 1] + s10 * E[1, 0] + s11 * E[1, 1])


_BIT = space("o", 2)
_SET = space("s", 2)


def _spaces():
    return (FiniteSpace("a", _BIT.elements), FiniteSpace("b", _BIT.elements),
            FiniteSpace("x", _SET.elements), FiniteSpace("y", _SET.elements))


def product_behavior(alice: tuple[int, int], bob: tuple[int, int], spec: ChshSpec = DEFAULT_SPEC) -> Behavior:
    """Behavior of the deterministic strategy pair a(x) = alice[x], b(y) = bob[y] (values +-1)."""
    t = np.zeros((2, 2, 2, 2))
    for x, y in product(range(2), range(2)):
        t[spec.enc_a.index(alice[x]), spec.enc_b.index(bob[y]), x, y] = 1.0
    return Behavior(*_spaces(), t)


@dataclass(frozen=True)
class LocalMaxResult:
    max_value: float
    argmax: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    values: dict


def local_deterministic_max(spec: ChshSpec = DEFAULT_SPEC) -> LocalMaxResult:
    """Brute force over the 16 deterministic strategy pairs."""
    strategies = list(product((1, -1), repeat=2))
    values = {}
    for sa, sb in product(strategies, strategies):
        values[(sa, sb)] = chsh_value(product_behavior(sa, sb, spec), spec)
    best = max(values.values())
    argmax = tuple(k for k, v in values.items() if v == best)
    return LocalMaxResult(best, argmax, values)


def singlet_behavior(theta0: float, theta1: float, phi0: float, phi1: float) -> Behavior:
    """P(a,b|x,y) = (1 + enc(a) enc(b) cos(theta_x - phi_y)) / 4."""
    theta, phi = (theta0, theta1), (phi0, phi1)
    ab = np.outer((1, -1), (1, -1))
    t = np.empty((2, 2, 2, 2))
    for x, y in product(range(2), range(2)):
        t[:, :, x, y] = (1 + ab * np.cos(theta[x] - phi[y])) / 4
    return Behavior(*_spaces(), t)


CANONICAL_ANGLES = (0.0, np.pi / 2, np.pi / 4, -np.pi / 4)


def pr_box_behavior() -> Behavior:
    """P = 1/2 when enc(a) enc(b) = (-1)^(x y), else 0."""
    t = np.zeros((2, 2, 2, 2))
    for a, b, x, y in product(range(2), repeat=4):
        if (a ^ b) == (x & y):
            t[a, b, x, y] = 0.5
    return Behavior(*_spaces(), t)


def uniform_behavior(a: Optional[FiniteSpace] = None, b: Optional[FiniteSpace] = None) -> Behavior:
    sa, sb, sx, sy = _spaces()
    a, b = a or sa, b or sb
    return Behavior(a, b, sx, sy, np.full((a.size, b.size, 2, 2), 1.0 / (a.size * b.size)))
