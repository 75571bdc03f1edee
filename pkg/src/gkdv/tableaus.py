"""Gauss-Legendre collocation tableaus (1, 2 and 3 stages, orders 2/4/6)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ButcherTableau", "gauss_legendre_tableau", "symplectic_residual"]

_SYMPLECTIC_TOL = 1e-14


@dataclass(frozen=True)
class ButcherTableau:
    s: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str
    symplectic: bool = field(init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float).reshape(self.s, self.s)
        b = np.asarray(self.b, dtype=float).reshape(self.s)
        c = np.asarray(self.c, dtype=float).reshape(self.s)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(
            self, "symplectic", symplectic_residual(A, b) <= _SYMPLECTIC_TOL
        )


def symplectic_residual(A: np.ndarray, b: np.ndarray) -> float:
    """max_ij |b_i a_ij + b_j a_ji - b_i b_j|, zero for quadratic-preserving RK."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    R = b[:, None] * A + (b[:, None] * A).T - np.outer(b, b)
    return float(np.abs(R).max())


def gauss_legendre_tableau(s: int) -> ButcherTableau:
    """Collocation tableau at the s Gauss-Legendre points; order 2s."""
    if s == 1:
        A = [[0.5]]
        b = [1.0]
        c = [0.5]
    elif s == 2:
        r = np.sqrt(3.0) / 6.0
        A = [[0.25, 0.25 - r], [0.25 + r, 0.25]]
        b = [0.5, 0.5]
        c = [0.5 - r, 0.5 + r]
    elif s == 3:
        w = np.sqrt(15.0)
        A = [
            [5 / 36, 2 / 9 - w / 15, 5 / 36 - w / 30],
            [5 / 36 + w / 24, 2 / 9, 5 / 36 - w / 24],
            [5 / 36 + w / 30, 2 / 9 + w / 15, 5 / 36],
        ]
        b = [5 / 18, 4 / 9, 5 / 18]
        c = [0.5 - w / 10, 0.5, 0.5 + w / 10]
    else:
        raise ValueError(f"only 1, 2 or 3 stages are supported, got s={s}")
    return ButcherTableau(s=s, A=np.array(A), b=np.array(b), c=np.array(c),
                          name=f"gauss{2 * s}")
