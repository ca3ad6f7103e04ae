"""Koiso-Cao shrinking Kahler-Ricci soliton on CP^2 # -CP^2.

The U(2)-invariant soliton is ``g = dt^2 + f1^2 g_S1 + f2^2 g_S2`` with
``f1 = -f2 f2'`` and ``f2`` the positive solution of

    2 f2 f2'' + 4 f2'^2 - 4 + f2^2 (1 + c f2'^2) = 0,   f2'(alpha) = f2'(beta) = 0,

where ``c`` is the negative root of ``xi``.  We put ``alpha = 0``, start at
``f2 = sqrt(6)`` and integrate until ``f2'`` returns to zero; the terminal
values ``f2 = sqrt(2)``, ``f2 f2'' = 1`` are then checks, not targets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError

SQRT6 = math.sqrt(6.0)
SQRT2 = math.sqrt(2.0)
T_MAX = 20.0


def xi(x: float) -> float:
    return math.exp(2 * x) * (2 - 4 * x + 3 * x * x) - 2 + x * x


def solve_c(tol: float = 1e-12) -> float:
    """Root of ``xi`` in ``(-1, -1/2)``.

    ``xi(0) = 0`` as well, so the search is confined to the negative bracket
    where ``xi(-1) > 0 > xi(-1/2)``.
    """
    if not tol > 0:
        raise ConfigError("tol must be positive")
    lo, hi = -1.0, -0.5
    if not xi(lo) > 0 > xi(hi):
        raise NumericalError("xi does not change sign on [-1, -1/2]")
    c = brentq(xi, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(xi(c)) >= tol:
        raise NumericalError(f"|xi(c)| = {abs(xi(c)):.3e} above tolerance {tol:.1e}")
    return c


def _accel(c: float, f: float, fp: float) -> float:
    return (4.0 - 4.0 * fp * fp - f * f * (1.0 + c * fp * fp)) / (2.0 * f)


def _rk4(c: float, f: float, fp: float, h: float) -> tuple[float, float]:
    k1f, k1p = fp, _accel(c, f, fp)
    k2f, k2p = fp + 0.5 * h * k1p, _accel(c, f + 0.5 * h * k1f, fp + 0.5 * h * k1p)
    k3f, k3p = fp + 0.5 * h * k2p, _accel(c, f + 0.5 * h * k2f, fp + 0.5 * h * k2p)
    k4f, k4p = fp + h * k3p, _accel(c, f + h * k3f, fp + h * k3p)
    return (
        f + h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f),
        fp + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
    )


@dataclass(frozen=True)
class SolitonSolution:
    c: float
    t_grid: np.ndarray
    f2: np.ndarray
    f2p: np.ndarray
    f2pp: np.ndarray
    domain_length: float
    step: float
    diagnostics: dict = field(default_factory=dict)
    R: np.ndarray | None = None
    Ric11: np.ndarray | None = None
    Ric33: np.ndarray | None = None
    ricci_sq: np.ndarray | None = None
    potential_f: np.ndarray | None = None
    potential_fp: np.ndarray | None = None
    ric_ff: np.ndarray | None = None
    Q: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return bool(self.diagnostics.get("endpoint_ok", False))

    @property
    def has_profiles(self) -> bool:
        return self.R is not None


def shoot(c: float, step: float = 1e-3, event_tol: float = 1e-15) -> SolitonSolution:
    """Integrate from ``f2 = sqrt(6), f2' = 0`` until ``f2'`` vanishes again.

    Classical fourth-order Runge-Kutta with a fixed step; the terminal event
    is bracketed by the sign change of ``f2'`` and then located by bisection
    on the length of a partial step, which is itself a fourth-order accurate
    interpolant of the trajectory.
    """
    if not -1.0 < c < -0.5:
        raise ConfigError("c must lie in (-1, -1/2)")
    if not 0 < step <= 0.05:
        raise ConfigError("step must lie in (0, 0.05]")

    ts, fs, fps = [0.0], [SQRT6], [0.0]
    f, fp, t = SQRT6, 0.0, 0.0
    k = 0
    while True:
        fn, fpn = _rk4(c, f, fp, step)
        if fn <= 0:
            raise NumericalError(f"f2 reached {fn:.3e} <= 0 at t = {t + step:.6f}")
        if k > 0 and fpn >= 0.0:
            break
        k += 1
        t = k * step
        f, fp = fn, fpn
        ts.append(t)
        fs.append(f)
        fps.append(fp)
        if t > T_MAX:
            raise NumericalError("no zero of f2' before t = 20; c is probably wrong")

    lo, hi = 0.0, step
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= event_tol or not lo < mid < hi:
            break
        if _rk4(c, f, fp, mid)[1] >= 0.0:
            hi = mid
        else:
            lo = mid
    fe, fpe = _rk4(c, f, fp, hi)
    length = t + hi
    if hi < 0.5 * step and len(ts) > 2:
        # keep sample spacing within [step/2, 3 step/2) for differencing
        ts.pop()
        fs.pop()
        fps.pop()
    ts.append(length)
    fs.append(fe)
    fps.append(fpe)

    tg = np.array(ts)
    f2 = np.array(fs)
    f2p = np.array(fps)
    f2pp = (4.0 - 4.0 * f2p**2 - f2**2 * (1.0 + c * f2p**2)) / (2.0 * f2)

    interior = f2p[1:-1]
    diag = {
        "terminal_f2": float(f2[-1]),
        "terminal_f2f2pp": float(f2[-1] * f2pp[-1]),
        "initial_f2f2pp": float(f2[0] * f2pp[0]),
        "max_f2p_sq": float(np.max(f2p**2)),
        "strictly_decreasing": bool(np.all(np.diff(f2) < 0)),
        "interior_negative_slope": bool(np.all(interior < 0)),
    }
    diag["endpoint_ok"] = bool(
        abs(diag["terminal_f2"] - SQRT2) < 1e-3
        and abs(diag["terminal_f2f2pp"] - 1.0) < 1e-3
        and diag["strictly_decreasing"]
    )
    return SolitonSolution(
        c=c, t_grid=tg, f2=f2, f2p=f2p, f2pp=f2pp, domain_length=length, step=step,
        diagnostics=diag,
    )


def curvature_profiles(sol: SolitonSolution) -> SolitonSolution:
    """Fill the Ricci components, scalar curvature, potential and ``Q``."""
    c, f2, f2p, f2pp = sol.c, sol.f2, sol.f2p, sol.f2pp
    ric11 = 1 + c * (f2 * f2pp + f2p**2)
    ric33 = 1 + c * f2p**2
    R = 2 * ric11 + 2 * ric33
    ricci_sq = 2 * ric11**2 + 2 * ric33**2
    pot = -c * f2**2 / 2
    pot_p = -c * f2 * f2p
    ric_ff = pot_p**2 * ric11
    Q = (R**2 - ricci_sq - 2 * R - 2 * ric_ff) / 6
    return replace(
        sol, R=R, Ric11=ric11, Ric33=ric33, ricci_sq=ricci_sq, potential_f=pot,
        potential_fp=pot_p, ric_ff=ric_ff, Q=Q,
    )


def _filled(sol: SolitonSolution) -> SolitonSolution:
    return sol if sol.has_profiles else curvature_profiles(sol)


def q_profile(sol: SolitonSolution) -> tuple[np.ndarray, np.ndarray]:
    sol = _filled(sol)
    return sol.t_grid, sol.Q


def q_lower_bound(sol: SolitonSolution) -> np.ndarray:
    """Pointwise lower bound ``2c + R11 (4 + 2c + 4c f2'^2 - 12 c^2 f2'^2)`` for ``6Q``."""
    sol = _filled(sol)
    c, s = sol.c, sol.f2p**2
    return 2 * c + sol.Ric11 * (4 + 2 * c + 4 * c * s - 12 * c * c * s)


def total_volume(sol: SolitonSolution) -> float:
    """``-2 pi^2 * integral of f2^3 f2'`` over the trajectory (Simpson)."""
    return float(-2 * math.pi**2 * simpson(sol.f2**3 * sol.f2p, x=sol.t_grid))


def conservation_terms(c, f2, f2p, f2pp):
    """Pointwise ``f'^2 - (2f - R + 4 + 4c)`` from the soliton data."""
    f2, f2p, f2pp = (np.asarray(a, dtype=float) for a in (f2, f2p, f2pp))
    pot = -c * f2**2 / 2
    pot_p = -c * f2 * f2p
    R = 4 * c * f2p**2 + 2 * c * f2 * f2pp + 4
    return pot_p**2 - (2 * pot - R + 4 + 4 * c)


def conservation_residual(sol: SolitonSolution, c: float | None = None) -> float:
    """Max deviation from the conservation law along the trajectory.

    ``f2''`` is the central difference of the sampled ``f2'`` rather than the
    ODE right-hand side, which would make the law hold identically; the check
    therefore runs over the uniformly spaced interior samples and converges at
    second order in the step.  Passing ``c`` evaluates the law with a
    different soliton constant.
    """
    t, fp = sol.t_grid, sol.f2p
    dt = np.diff(t)
    idx = np.nonzero(np.abs(dt[:-1] - dt[1:]) <= 1e-9 * sol.step)[0] + 1
    f2pp = (fp[idx + 1] - fp[idx - 1]) / (t[idx + 1] - t[idx - 1])
    cc = sol.c if c is None else c
    return float(np.max(np.abs(conservation_terms(cc, sol.f2[idx], fp[idx], f2pp))))


def ode_residual(sol: SolitonSolution) -> float:
    c, f, fp, fpp = sol.c, sol.f2, sol.f2p, sol.f2pp
    return float(np.max(np.abs(2 * f * fpp + 4 * fp**2 - 4 + f**2 * (1 + c * fp**2))))


def solve_soliton(step: float = 1e-3, tol: float = 1e-12) -> SolitonSolution:
    """``solve_c`` -> ``shoot`` -> ``curvature_profiles``."""
    sol = shoot(solve_c(tol), step)
    if not sol.ok:
        raise NumericalError(f"soliton endpoint checks failed: {sol.diagnostics}")
    return curvature_profiles(sol)


def summary(sol: SolitonSolution) -> dict:
    sol = _filled(sol)
    return {
        "c": sol.c,
        "domain_length": sol.domain_length,
        "R_range": [float(np.min(sol.R)), float(np.max(sol.R))],
        "Q_range": [float(np.min(sol.Q)), float(np.max(sol.Q))],
        "volume": total_volume(sol),
        "step": sol.step,
        "samples": int(sol.t_grid.size),
        "conservation_residual": conservation_residual(sol),
        "terminal_f2": sol.diagnostics["terminal_f2"],
        "terminal_f2f2pp": sol.diagnostics["terminal_f2f2pp"],
        "max_f2p_sq": sol.diagnostics["max_f2p_sq"],
    }


def write_csv(sol: SolitonSolution, path) -> int:
    """Write ``t,f2,f2p,R,Q`` rows with 17 significant digits; returns the row count."""
    sol = _filled(sol)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "f2", "f2p", "R", "Q"])
        for row in zip(sol.t_grid, sol.f2, sol.f2p, sol.R, sol.Q):
            writer.writerow([f"{v:.17g}" for v in row])
    return int(sol.t_grid.size)
