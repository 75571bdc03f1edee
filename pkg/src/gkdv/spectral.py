"""Periodic Fourier pseudo-spectral grid and differentiation operators.

The domain is [-L, L] with N equispaced nodes x_j = j*h, j = -N/2..N/2-1,
h = 2L/N.  Derivatives are computed with the real FFT: a field u sampled at
the nodes is transformed, multiplied by the per-mode symbols of d/dx, d2/dx2
or d3/dx3, and transformed back.  Transforms are normalized so that the
round trip is the identity; the quadrature weight h lives in ``inner_h``.

Fields are plain 1-D float64 numpy arrays of length N; no wrapper class.

The Nyquist mode of the odd-derivative symbols is zeroed (standard
pseudo-spectral practice).  This keeps the first-derivative operator exactly
antisymmetric on real data, which the discrete conservation identities rely
on.  The even-derivative symbol keeps its Nyquist entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpectralGrid",
    "SingularModeError",
    "make_grid",
    "apply_d1",
    "apply_d2",
    "apply_d3",
    "inner_h",
    "norm_h",
    "solve_block2",
    "solve_block",
]


class SingularModeError(ValueError):
    """A per-mode linear solve hit a (numerically) singular mode."""


@dataclass(frozen=True)
class SpectralGrid:
    """Immutable periodic grid with precomputed derivative symbols.

    ``k1``, ``k2``, ``k3`` are the per-mode multipliers of the first, second
    and third derivative on the rfft half-spectrum (length N//2 + 1).  ``k1``
    is purely imaginary with the Nyquist entry zeroed, ``k2`` is real and
    non-positive, ``k3 = k1 * k2``.
    """

    L: float
    N: int
    h: float
    x: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    dealias: bool = False
    dealias_mask: np.ndarray = field(repr=False, default=None)

    @property
    def nmodes(self) -> int:
        return self.N // 2 + 1

    def check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != (self.N,):
            raise ValueError(f"field length {u.shape} does not match grid N={self.N}")
        return u

    def to_modes(self, u: np.ndarray) -> np.ndarray:
        return np.fft.rfft(u)

    def from_modes(self, uhat: np.ndarray) -> np.ndarray:
        return np.fft.irfft(uhat, n=self.N)

    def filter_23(self, u: np.ndarray) -> np.ndarray:
        """Apply the 2/3-rule low-pass filter (used only when dealias=True)."""
        return self.from_modes(self.to_modes(u) * self.dealias_mask)


def make_grid(L: float, N: int, dealias: bool = False) -> SpectralGrid:
    """Build the periodic grid on [-L, L] with N nodes (N a power of two, >= 8)."""
    if L <= 0:
        raise ValueError(f"L must be positive, got {L}")
    if N % 2 != 0:
        raise ValueError(f"N must be even, got {N}")
    if N < 8:
        raise ValueError(f"N must be at least 8, got {N}")
    if N & (N - 1) != 0:
        raise ValueError(f"N must be a power of two, got {N}")

    h = 2.0 * L / N
    x = h * np.arange(-N // 2, N // 2)
    # Angular wavenumbers on the rfft half-spectrum: k_m = 2*pi*m/(2L).
    k = 2.0 * np.pi * np.fft.rfftfreq(N, d=h)
    k1 = 1j * k
    k1[-1] = 0.0  # Nyquist: unpaired mode breaks antisymmetry of odd derivatives
    k2 = -(k**2)
    k3 = k1 * k2

    mask = np.ones(N // 2 + 1)
    mask[np.abs(k) > (2.0 / 3.0) * k.max()] = 0.0

    return SpectralGrid(
        L=float(L), N=int(N), h=h, x=x, k1=k1, k2=k2, k3=k3,
        dealias=dealias, dealias_mask=mask,
    )


def apply_d1(g: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """First derivative, exact (to rounding) on resolved trigonometric modes."""
    u = g.check_field(u)
    return g.from_modes(g.k1 * g.to_modes(u))


def apply_d2(g: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """Second derivative."""
    u = g.check_field(u)
    return g.from_modes(g.k2 * g.to_modes(u))


def apply_d3(g: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """Third derivative, composing the first- and second-derivative symbols."""
    u = g.check_field(u)
    return g.from_modes(g.k3 * g.to_modes(u))


def inner_h(g: SpectralGrid, u: np.ndarray, w: np.ndarray) -> float:
    """Discrete inner product h * sum_j u_j w_j (real fields)."""
    u = g.check_field(u)
    w = g.check_field(w)
    return g.h * float(np.dot(u, w))


def norm_h(g: SpectralGrid, u: np.ndarray) -> float:
    return float(np.sqrt(inner_h(g, u, u)))


def _block2_factors(g: SpectralGrid, tau: float, A: np.ndarray):
    """Per-mode entries of the 2x2 stage matrix and its determinant J."""
    lam = g.k3
    m11 = 1.0 + tau * A[0, 0] * lam
    m12 = tau * A[0, 1] * lam
    m21 = tau * A[1, 0] * lam
    m22 = 1.0 + tau * A[1, 1] * lam
    J = m11 * m22 - m12 * m21
    return m11, m12, m21, m22, J


def solve_block2(
    g: SpectralGrid,
    tau: float,
    A: np.ndarray,
    r1: np.ndarray,
    r2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the coupled 2-stage linear system of the implicit RK update.

    Returns (f1, f2) with

        (I + tau*a11*D3) f1 + tau*a12*D3 f2 = r1
        tau*a21*D3 f1 + (I + tau*a22*D3) f2 = r2

    solved mode-by-mode in Fourier space at O(N log N) cost.  D3 is diagonal
    there, so each mode reduces to a 2x2 scalar system with determinant
    J(m) = (1 + tau*a11*lam)(1 + tau*a22*lam) - tau^2*a12*a21*lam^2.
    """
    r1 = g.check_field(r1)
    r2 = g.check_field(r2)
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError(f"stage matrix must be 2x2, got {A.shape}")

    m11, m12, m21, m22, J = _block2_factors(g, tau, A)
    bad = np.abs(J) < 1e-14 * np.abs(J).max()
    if bad.any():
        mode = int(np.argmax(bad))
        raise SingularModeError(
            f"2x2 stage system singular at mode {mode} for tau={tau!r} "
            f"(|J|={abs(J[mode]):.3e})"
        )

    r1h = g.to_modes(r1)
    r2h = g.to_modes(r2)
    f1h = (m22 * r1h - m12 * r2h) / J
    f2h = (-m21 * r1h + m11 * r2h) / J
    return g.from_modes(f1h), g.from_modes(f2h)


def solve_block(
    g: SpectralGrid, tau: float, A: np.ndarray, rs: list[np.ndarray]
) -> list[np.ndarray]:
    """s-stage analogue of :func:`solve_block2` for s in {1, 2, 3}.

    The per-mode matrices I + tau*A*lam are scalars in each entry, so the
    3-stage case is a batched dense 3x3 complex solve over the modes.
    """
    A = np.asarray(A, dtype=float)
    s = A.shape[0]
    if len(rs) != s:
        raise ValueError(f"expected {s} right-hand sides, got {len(rs)}")
    if s == 1:
        lam = g.k3
        den = 1.0 + tau * A[0, 0] * lam
        if (np.abs(den) < 1e-14 * np.abs(den).max()).any():
            mode = int(np.argmax(np.abs(den) < 1e-14 * np.abs(den).max()))
            raise SingularModeError(
                f"1-stage system singular at mode {mode} for tau={tau!r}"
            )
        return [g.from_modes(g.to_modes(rs[0]) / den)]
    if s == 2:
        f1, f2 = solve_block2(g, tau, A, rs[0], rs[1])
        return [f1, f2]

    lam = g.k3
    nm = lam.shape[0]
    M = np.broadcast_to(np.eye(s), (nm, s, s)) + tau * lam[:, None, None] * A
    rhat = np.stack([g.to_modes(r) for r in rs], axis=-1)[:, :, None]
    try:
        fhat = np.linalg.solve(M, rhat)[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise SingularModeError(
            f"{s}-stage system singular for tau={tau!r}: {exc}"
        ) from exc
    return [g.from_modes(fhat[:, i]) for i in range(s)]
