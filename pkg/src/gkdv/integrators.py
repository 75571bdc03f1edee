"""Time integrators for the generalized KdV equation.

Six schemes share the Fourier pseudo-spectral spatial discretization:

* SAV-IRK2/4/6: Gauss-Legendre collocation applied to the auxiliary-variable
  system; conserves discrete momentum and modified energy exactly, mass to
  spectral accuracy.  The implicit stage equations are solved by fixed-point
  iteration with a per-mode block inverse (cost O(s N log N) per sweep).
* IRK2/4/6: the same collocation applied directly to u_t = -(u_xx + u^p/p)_x.
* MCN: modified Crank-Nicolson with the difference-quotient nonlinearity;
  conserves momentum and physical energy.
* SAV-LF: semi-implicit leap-frog on the auxiliary-variable system (no
  nonlinear iteration; first step bootstrapped with MCN).
* SS: Strang splitting, midpoint rule for the conservation-law part and
  Crank-Nicolson for the dispersive part.
* mETDRK4: 4th-order exponential time differencing with contour-stabilized
  coefficients; explicit, subject to an advective CFL restriction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .sav import (
    AdjustmentRequired,
    C0Policy,
    InvariantRecord,
    SavState,
    adjust_c0,
    invariants,
    nonlinear_power,
    rhs_f,
    stage_flux,
)
from .spectral import SingularModeError, SpectralGrid, inner_h
from .tableaus import ButcherTableau, gauss_legendre_tableau

__all__ = [
    "SCHEMES",
    "StepperConfig",
    "StageStats",
    "RunLog",
    "FixedPointError",
    "SingularStepError",
    "step_sav_irk",
    "step_irk_direct",
    "step_mcn",
    "step_sav_lf",
    "step_strang",
    "step_metdrk4",
    "cn_dispersion_step",
    "etdrk4_coefficients",
    "etdrk4_coefficients_direct",
    "make_stepper",
    "evolve",
]

SCHEMES = (
    "SAV-IRK2", "SAV-IRK4", "SAV-IRK6",
    "IRK2", "IRK4", "IRK6",
    "MCN", "SAV-LF", "SS", "mETDRK4",
)

BLOWUP_LINF = 1e8


class FixedPointError(RuntimeError):
    """Stage iteration failed to reach the tolerance within the cap."""

    def __init__(self, msg: str, residual: float = float("nan")):
        super().__init__(msg)
        self.residual = residual


class SingularStepError(RuntimeError):
    """A semi-implicit update hit a (numerically) singular scalar system."""


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    scheme: str = ""
    c0_tol: float = 5.0
    warm_start: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.fp_tol <= 0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")
        if self.scheme and self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")


@dataclass(frozen=True)
class StageStats:
    iterations: int
    residual: float


class _StageSolver:
    """Per-mode inverse of the s-stage linear system I + tau * A * D3.

    D3 is diagonal in Fourier space, so the system decouples into one small
    complex s x s solve per mode; the inverse is built once per (grid, tau).
    """

    def __init__(self, g: SpectralGrid, tau: float, A: np.ndarray):
        self.g = g
        self.tau = tau
        A = np.asarray(A, dtype=float)
        self.s = A.shape[0]
        lam = g.k3
        if self.s == 1:
            den = 1.0 + tau * A[0, 0] * lam
            self._check(den, tau)
            self._inv = 1.0 / den
        elif self.s == 2:
            m11 = 1.0 + tau * A[0, 0] * lam
            m12 = tau * A[0, 1] * lam
            m21 = tau * A[1, 0] * lam
            m22 = 1.0 + tau * A[1, 1] * lam
            J = m11 * m22 - m12 * m21
            self._check(J, tau)
            self._c = (m22 / J, -m12 / J, -m21 / J, m11 / J)
        else:
            nm = lam.shape[0]
            M = np.broadcast_to(np.eye(self.s), (nm, self.s, self.s)) \
                + tau * lam[:, None, None] * A
            det = np.linalg.det(M)
            self._check(det, tau)
            self._inv = np.linalg.inv(M)

    @staticmethod
    def _check(det: np.ndarray, tau: float):
        bad = np.abs(det) < 1e-14 * np.abs(det).max()
        if bad.any():
            mode = int(np.argmax(bad))
            raise SingularModeError(
                f"stage system singular at mode {mode} for tau={tau!r}"
            )

    def solve(self, rhat: np.ndarray) -> np.ndarray:
        """Solve for the stacked (s, nmodes) right-hand side."""
        if self.s == 1:
            return rhat * self._inv
        if self.s == 2:
            c11, c12, c21, c22 = self._c
            return np.stack(
                [c11 * rhat[0] + c12 * rhat[1], c21 * rhat[0] + c22 * rhat[1]]
            )
        return np.einsum("mij,jm->im", self._inv, rhat)


class _CollocationStepper:
    """Shared fixed-point machinery of the SAV and direct collocation schemes."""

    def __init__(self, g: SpectralGrid, tab: ButcherTableau, cfg: StepperConfig):
        self.g = g
        self.tab = tab
        self.cfg = cfg
        self._solvers: dict[float, _StageSolver] = {}
        self._last_fs: np.ndarray | None = None
        self.stage_flux_max = 0.0

    def _solver(self, tau: float) -> _StageSolver:
        sol = self._solvers.get(tau)
        if sol is None:
            sol = _StageSolver(self.g, tau, self.tab.A)
            self._solvers[tau] = sol
        return sol


class SavIrkStepper(_CollocationStepper):
    """One step of the s-stage Gauss collocation method on the SAV system."""

    def __init__(self, g, cfg, state: SavState, tab: ButcherTableau | None = None):
        tab = tab or gauss_legendre_tableau(int(cfg.scheme[-1]) // 2)
        if not tab.symplectic:
            raise ValueError(f"tableau {tab.name} is not symplectic")
        super().__init__(g, tab, cfg)
        self.state = state

    @property
    def u(self) -> np.ndarray:
        return self.state.u

    @property
    def v(self) -> float | None:
        return self.state.v

    def shift_c0(self, policy: C0Policy):
        self.state = adjust_c0(self.state, self.g, policy)
        self._last_fs = None

    def advance(self, tau: float | None = None) -> StageStats:
        state, stats = self._step(self.state, tau)
        self.state = state
        return stats

    def _aux(self, u0, v0, tau, F):
        """Stage fields, scaled nonlinearities and auxiliary rates from F."""
        g, A, p, c0 = self.g, self.tab.A, self.state.p, self.state.c0
        U = u0[None, :] + tau * (A @ F)
        Up = np.stack([nonlinear_power(g, U[i], p) for i in range(self.tab.s)])
        rad = g.h * np.einsum("ij,ij->i", Up, U) + c0
        if (rad <= 0).any():
            raise AdjustmentRequired(
                f"stage radicand dropped to {rad.min():.3e}; shift C0 first"
            )
        Phi = Up / np.sqrt(rad)[:, None]
        gs = 0.5 * (p + 1) * g.h * np.einsum("ij,ij->i", Phi, F)
        V = v0 + tau * (A @ gs)
        return U, Phi, gs, V

    def _step(self, state: SavState, tau: float | None) -> tuple[SavState, StageStats]:
        cfg, g, tab = self.cfg, self.g, self.tab
        tau = cfg.tau if tau is None else tau
        solver = self._solver(tau)
        s, p = tab.s, state.p
        u0, v0 = state.u, state.v

        d3u0 = g.k3 * g.to_modes(u0)
        f0 = rhs_f(state, g)
        if cfg.warm_start and self._last_fs is not None:
            F = self._last_fs.copy()
        else:
            F = np.tile(f0, (s, 1))
        U, Phi, gs, V = self._aux(u0, v0, tau, F)

        residual = float("inf")
        for it in range(1, cfg.fp_max_iter + 1):
            nl_hat = np.fft.rfft(Phi * V[:, None], axis=1)
            rhat = -d3u0[None, :] - (g.k1[None, :] / p) * nl_hat
            F_new = np.fft.irfft(solver.solve(rhat), n=g.N, axis=1)
            residual = float(np.abs(F_new - F).max())
            F = F_new
            U, Phi, gs, V = self._aux(u0, v0, tau, F)
            if residual < cfg.fp_tol:
                break
        else:
            raise FixedPointError(
                f"stage iteration did not reach {cfg.fp_tol:g} in "
                f"{cfg.fp_max_iter} sweeps (residual {residual:.3e})",
                residual=residual,
            )

        if cfg.warm_start:
            self._last_fs = F
        self.stage_flux_max = max(
            self.stage_flux_max, max(stage_flux(g, U[i], p) for i in range(s))
        )
        u1 = u0 + tau * (tab.b @ F)
        v1 = v0 + tau * float(tab.b @ gs)
        return replace(state, u=u1, v=v1), StageStats(it, residual)


class DirectIrkStepper(_CollocationStepper):
    """Gauss collocation applied to the unreformulated equation (no v)."""

    def __init__(self, g, cfg, state: SavState, tab: ButcherTableau | None = None):
        tab = tab or gauss_legendre_tableau(int(cfg.scheme[-1]) // 2)
        super().__init__(g, tab, cfg)
        self.u = state.u.copy()
        self.p = state.p
        self.v = None
        self.stage_flux_max = 0.0

    def advance(self, tau: float | None = None) -> StageStats:
        u1, stats = self._step(self.u, tau)
        self.u = u1
        return stats

    def _rhs_hat(self, d3u0, U):
        g, p = self.g, self.p
        Up = np.stack([nonlinear_power(g, U[i], p) for i in range(self.tab.s)])
        return -d3u0[None, :] - (g.k1[None, :] / p) * np.fft.rfft(Up, axis=1)

    def _step(self, u0: np.ndarray, tau: float | None) -> tuple[np.ndarray, StageStats]:
        cfg, g, tab = self.cfg, self.g, self.tab
        tau = cfg.tau if tau is None else tau
        solver = self._solver(tau)
        s = tab.s

        d3u0 = g.k3 * g.to_modes(u0)
        f0 = g.from_modes(
            -d3u0 - (g.k1 / self.p) * g.to_modes(nonlinear_power(g, u0, self.p))
        )
        if cfg.warm_start and self._last_fs is not None:
            F = self._last_fs.copy()
        else:
            F = np.tile(f0, (s, 1))

        residual = float("inf")
        for it in range(1, cfg.fp_max_iter + 1):
            U = u0[None, :] + tau * (tab.A @ F)
            F_new = np.fft.irfft(
                solver.solve(self._rhs_hat(d3u0, U)), n=g.N, axis=1
            )
            residual = float(np.abs(F_new - F).max())
            F = F_new
            if residual < cfg.fp_tol:
                break
        else:
            raise FixedPointError(
                f"stage iteration did not reach {cfg.fp_tol:g} in "
                f"{cfg.fp_max_iter} sweeps (residual {residual:.3e})",
                residual=residual,
            )

        if cfg.warm_start:
            self._last_fs = F
        U = u0[None, :] + tau * (tab.A @ F)
        self.stage_flux_max = max(
            self.stage_flux_max, max(stage_flux(g, U[i], self.p) for i in range(s))
        )
        return u0 + tau * (tab.b @ F), StageStats(it, residual)


def _mcn_nonlinearity(w: np.ndarray, u: np.ndarray, p: int) -> np.ndarray:
    """Difference-quotient term R(w,u) * (w+u) / (p(p+1)).

    R = (w^{p+1} - u^{p+1}) / (w^2 - u^2); where the denominator vanishes the
    pointwise limit (p+1)/2 * midpoint^{p-1} is substituted, which removes the
    0/0 without biasing the conservation identities.
    """
    num = w ** (p + 1) - u ** (p + 1)
    den = w * w - u * u
    small = np.abs(den) < 1e-14 * (1.0 + u * u)
    ratio = np.empty_like(u)
    np.divide(num, den, out=ratio, where=~small)
    if small.any():
        mid = 0.5 * (w + u)
        ratio[small] = 0.5 * (p + 1) * mid[small] ** (p - 1)
    return ratio * (w + u) / (p * (p + 1))


class McnStepper:
    """Modified Crank-Nicolson: conserves discrete momentum and energy."""

    def __init__(self, g: SpectralGrid, cfg: StepperConfig, state: SavState):
        self.g = g
        self.cfg = cfg
        self.u = state.u.copy()
        self.p = state.p
        self.v = None
        self.stage_flux_max = 0.0

    def advance(self, tau: float | None = None) -> StageStats:
        u1, stats = mcn_step_impl(self.g, self.cfg, self.u, self.p, tau)
        self.u = u1
        self.stage_flux_max = max(self.stage_flux_max, stage_flux(self.g, u1, self.p))
        return stats


def mcn_step_impl(
    g: SpectralGrid, cfg: StepperConfig, u: np.ndarray, p: int,
    tau: float | None = None,
) -> tuple[np.ndarray, StageStats]:
    tau = cfg.tau if tau is None else tau
    uhat = g.to_modes(u)
    den = 1.0 + 0.5 * tau * g.k3
    lin = (1.0 - 0.5 * tau * g.k3) * uhat

    w = u.copy()
    residual = float("inf")
    for it in range(1, cfg.fp_max_iter + 1):
        nl_hat = g.k1 * np.fft.rfft(_mcn_nonlinearity(w, u, p))
        w_new = np.fft.irfft((lin - tau * nl_hat) / den, n=g.N)
        residual = float(np.abs(w_new - w).max())
        w = w_new
        if residual < cfg.fp_tol:
            return w, StageStats(it, residual)
    raise FixedPointError(
        f"MCN iteration did not reach {cfg.fp_tol:g} in {cfg.fp_max_iter} sweeps "
        f"(residual {residual:.3e})",
        residual=residual,
    )


class SavLeapFrogStepper:
    """Semi-implicit leap-frog on the SAV system; first step uses MCN.

    Each step solves two decoupled constant-coefficient systems in Fourier
    space and one scalar equation for the midpoint auxiliary value; no
    nonlinear iteration is involved.
    """

    def __init__(self, g: SpectralGrid, cfg: StepperConfig, state: SavState):
        self.g = g
        self.cfg = cfg
        self.p = state.p
        self.c0 = state.c0
        self.u = state.u.copy()
        self.v: float | None = state.v
        self._u_prev: np.ndarray | None = None
        self._v_prev: float | None = None
        self.stage_flux_max = 0.0

    def shift_c0(self, policy: C0Policy):
        state = SavState(u=self.u, v=self.v, c0=self.c0, p=self.p)
        new = adjust_c0(state, self.g, policy)
        delta = new.c0 - self.c0
        if self._v_prev is not None:
            vp2 = self._v_prev**2 + delta
            if vp2 < 0:
                raise RuntimeError("C0 shift made the previous level inconsistent")
            self._v_prev = float(np.sqrt(vp2))
        self.c0, self.v = new.c0, new.v

    def _bootstrap(self, tau: float) -> StageStats:
        u1, stats = mcn_step_impl(self.g, self.cfg, self.u, self.p, tau)
        s1 = inner_h(self.g, nonlinear_power(self.g, u1, self.p), u1)
        self._u_prev, self._v_prev = self.u, self.v
        self.u, self.v = u1, float(np.sqrt(s1 + self.c0))
        return stats

    def advance(self, tau: float | None = None) -> StageStats:
        cfg = self.cfg
        tau = cfg.tau if tau is None else tau
        if self._u_prev is None:
            return self._bootstrap(tau)
        if tau != cfg.tau:
            # leap-frog needs uniform spacing; close out odd remainders with MCN
            u1, stats = mcn_step_impl(self.g, cfg, self.u, self.p, tau)
            s1 = inner_h(self.g, nonlinear_power(self.g, u1, self.p), u1)
            self._u_prev, self._v_prev = self.u, self.v
            self.u, self.v = u1, float(np.sqrt(s1 + self.c0))
            return stats

        u1, v1 = sav_lf_step_impl(
            self.g, cfg, self._u_prev, self.u, self._v_prev, self.p, self.c0, tau
        )
        self._u_prev, self._v_prev = self.u, self.v
        self.u, self.v = u1, v1
        if np.isfinite(u1).all():
            self.stage_flux_max = max(
                self.stage_flux_max, stage_flux(self.g, u1, self.p)
            )
        return StageStats(0, 0.0)


def sav_lf_step_impl(
    g: SpectralGrid, cfg: StepperConfig,
    u_prev: np.ndarray, u_curr: np.ndarray, v_prev: float,
    p: int, c0: float, tau: float,
) -> tuple[np.ndarray, float]:
    up = nonlinear_power(g, u_curr, p)
    rad = inner_h(g, up, u_curr) + c0
    if rad <= 0:
        raise AdjustmentRequired(
            f"radicand {rad:.3e} is non-positive; shift C0 before stepping"
        )
    q = up / np.sqrt(rad)

    den_modes = 1.0 + tau * g.k3
    u1 = g.from_modes(g.to_modes(u_prev) / den_modes)
    u2 = g.from_modes(-(tau / p) * g.k1 * g.to_modes(q) / den_modes)

    scal = 1.0 - 0.5 * (p + 1) * inner_h(g, q, u2)
    if abs(scal) < 1e-12:
        raise SingularStepError(
            f"leap-frog scalar system singular (denominator {scal:.3e}) at tau={tau!r}"
        )
    v_tilde = (0.5 * (p + 1) * inner_h(g, q, u1 - u_prev) + v_prev) / scal
    u_next = 2.0 * (u1 + v_tilde * u2) - u_prev
    v_next = 2.0 * v_tilde - v_prev
    return u_next, float(v_next)


def cn_dispersion_step(g: SpectralGrid, tau: float, u: np.ndarray) -> np.ndarray:
    """Crank-Nicolson flow of u_t + u_xxx = 0; unitary per mode."""
    sym = (1.0 - 0.5 * tau * g.k3) / (1.0 + 0.5 * tau * g.k3)
    return g.from_modes(sym * g.to_modes(u))


class StrangStepper:
    """Strang splitting: half conservation-law step, full dispersion, half again."""

    def __init__(self, g: SpectralGrid, cfg: StepperConfig, state: SavState):
        self.g = g
        self.cfg = cfg
        self.u = state.u.copy()
        self.p = state.p
        self.v = None
        self.stage_flux_max = 0.0

    def _transport_step(self, u: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
        """Midpoint rule on u_t + (u^p/p)_x = 0, solved by damped fixed point.

        The plain Picard sweep w <- G(w) stops contracting once tau * k_max
        times the local amplitude approaches one, so the damping factor is
        halved whenever the residual grows; the damped iteration still
        converges to the same midpoint solution.
        """
        g, p, cfg = self.g, self.p, self.cfg
        w = u.copy()
        theta = 1.0
        prev = float("inf")
        residual = float("inf")
        for it in range(1, cfg.fp_max_iter + 1):
            mid_pow = nonlinear_power(g, 0.5 * (w + u), p)
            gw = u - (tau / p) * g.from_modes(g.k1 * g.to_modes(mid_pow))
            residual = float(np.abs(gw - w).max())
            if residual < cfg.fp_tol:
                return gw, it
            if residual >= prev and theta > 0.05:
                theta *= 0.5
            prev = residual
            w = w + theta * (gw - w)
        raise FixedPointError(
            f"transport substep did not reach {cfg.fp_tol:g} in "
            f"{cfg.fp_max_iter} sweeps (residual {residual:.3e})",
            residual=residual,
        )

    def advance(self, tau: float | None = None) -> StageStats:
        tau = self.cfg.tau if tau is None else tau
        u, it1 = self._transport_step(self.u, 0.5 * tau)
        u = cn_dispersion_step(self.g, tau, u)
        u, it2 = self._transport_step(u, 0.5 * tau)
        self.u = u
        self.stage_flux_max = max(self.stage_flux_max, stage_flux(self.g, u, self.p))
        return StageStats(it1 + it2, 0.0)


def _phi_brackets(zr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ez = np.exp(zr)
    q = (np.exp(zr / 2.0) - 1.0) / zr
    z3 = zr**3
    g1 = (-4.0 - zr + ez * (4.0 - 3.0 * zr + zr**2)) / z3
    g2 = 2.0 * (2.0 + zr + ez * (-2.0 + zr)) / z3
    g3 = (-4.0 - 3.0 * zr - zr**2 + ez * (4.0 - zr)) / z3
    return q, g1, g2, g3


def etdrk4_coefficients(
    g: SpectralGrid, tau: float, n_contour: int = 32
) -> dict[str, np.ndarray]:
    """Per-mode update coefficients with the removable z=0 singularity healed.

    The brackets q, g1, g2, g3 have z^3 denominators; each is evaluated as the
    mean over a unit circle of contour points around tau*L per mode, which is
    accurate to ~1e-14 and finite through z = 0.
    """
    z = tau * (-g.k3)  # dispersive symbol of the linear part
    theta = 2.0 * np.pi * (np.arange(n_contour) + 0.5) / n_contour
    r = np.exp(1j * theta)
    zr = z[:, None] + r[None, :]
    q, g1, g2, g3 = _phi_brackets(zr)
    return {
        "E": np.exp(z),
        "E2": np.exp(z / 2.0),
        "Q": tau * q.mean(axis=1),
        "g1": tau * g1.mean(axis=1),
        "g2": tau * g2.mean(axis=1),
        "g3": tau * g3.mean(axis=1),
    }


def etdrk4_coefficients_direct(g: SpectralGrid, tau: float) -> dict[str, np.ndarray]:
    """Same coefficients from the closed formulas; unstable for |z| near 0."""
    z = tau * (-g.k3)
    with np.errstate(divide="ignore", invalid="ignore"):
        q, g1, g2, g3 = _phi_brackets(z)
    return {
        "E": np.exp(z),
        "E2": np.exp(z / 2.0),
        "Q": tau * q,
        "g1": tau * g1,
        "g2": tau * g2,
        "g3": tau * g3,
    }


class Etdrk4Stepper:
    """Explicit 4th-order exponential integrator of Cox-Matthews type."""

    def __init__(self, g: SpectralGrid, cfg: StepperConfig, state: SavState):
        self.g = g
        self.cfg = cfg
        self.u = state.u.copy()
        self.p = state.p
        self.v = None
        self.stage_flux_max = 0.0
        self._coeff: dict[float, dict[str, np.ndarray]] = {}
        if cfg.tau > g.h:
            warnings.warn(
                f"tau={cfg.tau:g} exceeds the advective CFL scale 2L/N={g.h:g}; "
                "the explicit scheme may be unstable",
                RuntimeWarning,
                stacklevel=2,
            )

    def _coefficients(self, tau: float) -> dict[str, np.ndarray]:
        co = self._coeff.get(tau)
        if co is None:
            co = etdrk4_coefficients(self.g, tau)
            self._coeff[tau] = co
        return co

    def _nonlinear_hat(self, u: np.ndarray) -> np.ndarray:
        g = self.g
        return -(g.k1 / self.p) * g.to_modes(nonlinear_power(g, u, self.p))

    def advance(self, tau: float | None = None) -> StageStats:
        g = self.g
        tau = self.cfg.tau if tau is None else tau
        co = self._coefficients(tau)
        uh = g.to_modes(self.u)

        n_u = self._nonlinear_hat(self.u)
        ah = co["E2"] * uh + co["Q"] * n_u
        n_a = self._nonlinear_hat(g.from_modes(ah))
        bh = co["E2"] * uh + co["Q"] * n_a
        n_b = self._nonlinear_hat(g.from_modes(bh))
        ch = co["E2"] * ah + co["Q"] * (2.0 * n_b - n_u)
        n_c = self._nonlinear_hat(g.from_modes(ch))

        u1h = co["E"] * uh + co["g1"] * n_u + co["g2"] * (n_a + n_b) + co["g3"] * n_c
        self.u = g.from_modes(u1h)
        if np.isfinite(self.u).all():
            self.stage_flux_max = max(
                self.stage_flux_max, stage_flux(g, self.u, self.p)
            )
        return StageStats(0, 0.0)


_STEPPERS = {
    "SAV-IRK2": SavIrkStepper,
    "SAV-IRK4": SavIrkStepper,
    "SAV-IRK6": SavIrkStepper,
    "IRK2": DirectIrkStepper,
    "IRK4": DirectIrkStepper,
    "IRK6": DirectIrkStepper,
    "MCN": McnStepper,
    "SAV-LF": SavLeapFrogStepper,
    "SS": StrangStepper,
    "mETDRK4": Etdrk4Stepper,
}


def make_stepper(scheme: str, g: SpectralGrid, cfg: StepperConfig, state: SavState):
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if cfg.scheme != scheme:
        cfg = replace(cfg, scheme=scheme)
    return _STEPPERS[scheme](g, cfg, state)


# ---------------------------------------------------------------------------
# single-step entry points


def step_sav_irk(
    state: SavState,
    g: SpectralGrid,
    tab: ButcherTableau,
    cfg: StepperConfig,
    tau: float | None = None,
) -> tuple[SavState, StageStats]:
    scheme = f"SAV-IRK{2 * tab.s}"
    stepper = SavIrkStepper(g, replace(cfg, scheme=scheme), state, tab=tab)
    return stepper._step(state, tau)


def step_irk_direct(
    u: np.ndarray,
    g: SpectralGrid,
    tab: ButcherTableau,
    cfg: StepperConfig,
    p: int = 2,
    tau: float | None = None,
) -> np.ndarray:
    state = SavState(u=np.asarray(u, dtype=float), v=1.0, c0=10.0, p=p)
    stepper = DirectIrkStepper(g, replace(cfg, scheme=f"IRK{2 * tab.s}"), state, tab=tab)
    u1, _ = stepper._step(state.u, tau)
    return u1


def step_mcn(
    u: np.ndarray, g: SpectralGrid, cfg: StepperConfig, p: int = 2,
    tau: float | None = None,
) -> np.ndarray:
    u1, _ = mcn_step_impl(g, cfg, np.asarray(u, dtype=float), p, tau)
    return u1


def step_sav_lf(
    u_prev: np.ndarray,
    u_curr: np.ndarray,
    v_prev: float,
    g: SpectralGrid,
    cfg: StepperConfig,
    p: int = 2,
    c0: float = 10.0,
    tau: float | None = None,
) -> tuple[np.ndarray, float]:
    tau = cfg.tau if tau is None else tau
    return sav_lf_step_impl(g, cfg, np.asarray(u_prev, dtype=float),
                            np.asarray(u_curr, dtype=float), v_prev, p, c0, tau)


def step_strang(
    u: np.ndarray, g: SpectralGrid, cfg: StepperConfig, p: int = 2,
    tau: float | None = None,
) -> np.ndarray:
    state = SavState(u=np.asarray(u, dtype=float), v=1.0, c0=10.0, p=p)
    stepper = StrangStepper(g, replace(cfg, scheme="SS"), state)
    stepper.advance(tau)
    return stepper.u


def step_metdrk4(
    u: np.ndarray, g: SpectralGrid, cfg: StepperConfig, p: int = 2,
    tau: float | None = None,
) -> np.ndarray:
    state = SavState(u=np.asarray(u, dtype=float), v=1.0, c0=10.0, p=p)
    stepper = Etdrk4Stepper(g, replace(cfg, scheme="mETDRK4"), state)
    stepper.advance(tau)
    return stepper.u


# ---------------------------------------------------------------------------
# evolution driver


@dataclass
class RunLog:
    scheme: str
    tau: float
    T: float
    records: list[InvariantRecord] = field(default_factory=list)
    flux_max_series: list[float] = field(default_factory=list)
    final_u: np.ndarray | None = None
    final_v: float | None = None
    c0: float = 0.0
    p: int = 2
    fp_iterations_total: int = 0
    c0_adjustments: int = 0
    blowup_time: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def _is_sav(scheme: str) -> bool:
    return scheme.startswith("SAV")


def _sample_record(stepper, g: SpectralGrid, p: int, c0: float, t: float) -> InvariantRecord:
    """Invariants of the current state.

    Schemes without an auxiliary variable report the physical energy in the
    modified-energy slot, which is the exact limit of the modified form when
    v^2 equals the radicand.
    """
    if stepper.v is not None:
        return invariants(SavState(u=stepper.u, v=stepper.v, c0=c0, p=p), g, t=t)
    rec = invariants(SavState(u=stepper.u, v=1.0, c0=1.0, p=p), g, t=t)
    return replace(rec, energy_mod=rec.energy)


def evolve(
    scheme: str,
    state: SavState,
    g: SpectralGrid,
    cfg: StepperConfig,
    T: float,
    sample_every: int = 1,
    policy: C0Policy | None = None,
    on_step=None,
) -> RunLog:
    """Drive ``scheme`` from ``state`` to time T, sampling invariants.

    A final partial step covers T when tau does not divide it.  The C0 shift
    is applied between accepted steps whenever the radicand drops below the
    policy tolerance.  Blow-up (non-finite u or max|u| > 1e8) halts the run
    and records the blow-up time; step failures are annotated with the step
    index and re-raised.
    """
    if T < 0:
        raise ValueError(f"final time must be non-negative, got {T}")
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every}")
    policy = policy or C0Policy(tol=cfg.c0_tol)

    log = RunLog(scheme=scheme, tau=cfg.tau, T=T, c0=state.c0, p=state.p)
    stepper = make_stepper(scheme, g, cfg, state)

    def sample(t: float):
        log.records.append(_sample_record(stepper, g, state.p, log.c0, t))
        log.flux_max_series.append(stepper.stage_flux_max)

    sample(0.0)
    n_full = int(np.floor(T / cfg.tau + 1e-9))
    remainder = T - n_full * cfg.tau
    if remainder < 1e-9 * cfg.tau:
        remainder = 0.0
    total = n_full + (1 if remainder else 0)

    sav = _is_sav(scheme)
    for m in range(1, total + 1):
        tau_m = cfg.tau if m <= n_full else remainder
        t_new = m * cfg.tau if m <= n_full else T
        if sav:
            s_now = inner_h(g, nonlinear_power(g, stepper.u, state.p), stepper.u)
            if s_now + log.c0 < policy.tol:
                stepper.shift_c0(policy)
                log.c0 = stepper.state.c0 if hasattr(stepper, "state") else stepper.c0
                log.c0_adjustments += 1
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                stats = stepper.advance(None if tau_m == cfg.tau else tau_m)
        except AdjustmentRequired:
            if not sav:
                raise
            stepper.shift_c0(policy)
            log.c0 = stepper.state.c0 if hasattr(stepper, "state") else stepper.c0
            log.c0_adjustments += 1
            with np.errstate(over="ignore", invalid="ignore"):
                stats = stepper.advance(None if tau_m == cfg.tau else tau_m)
        except FixedPointError as err:
            if not np.isfinite(stepper.u).all() or np.abs(stepper.u).max() > BLOWUP_LINF:
                log.blowup_time = t_new
                break
            log.final_u = stepper.u.copy()
            log.final_v = stepper.v
            wrapped = FixedPointError(
                f"step {m} (t={t_new:.6g}): {err}", residual=err.residual
            )
            wrapped.partial_log = log
            raise wrapped from None
        except (SingularModeError, SingularStepError) as err:
            log.final_u = stepper.u.copy()
            log.final_v = stepper.v
            wrapped = type(err)(f"step {m} (t={t_new:.6g}): {err}")
            wrapped.partial_log = log
            raise wrapped from None

        log.fp_iterations_total += stats.iterations
        if not np.isfinite(stepper.u).all() or np.abs(stepper.u).max() > BLOWUP_LINF:
            log.blowup_time = t_new
            break
        if m % sample_every == 0 or m == total:
            sample(t_new)
        if on_step is not None:
            on_step(m, t_new, stepper.u)

    log.final_u = stepper.u.copy()
    log.final_v = stepper.v
    return log
