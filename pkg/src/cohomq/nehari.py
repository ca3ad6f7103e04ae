"""Least-energy solutions of the reduced Dirichlet problem on a subinterval.

On the Nehari set ``||w||^2 = int |w|^p beta`` the energy
``J(w) = (1/2 - 1/p) ||w||^2`` equals ``(1/2 - 1/p) Q(w)^{p/(p-2)}`` with the
scale-invariant quotient ``Q(w) = ||w||^2 / (int |w|^p beta)^{2/p}``.  We
minimize ``Q`` by gradient descent in the operator inner product (Sobolev
gradient) with Barzilai-Borwein steps, re-projecting onto the Nehari set
after every step.  For the critical exponent ``1/2 - 1/p = m/N``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError
from .reduced import DiscreteOperator, NATURAL, critical_exponent, strong_residual

log = logging.getLogger(__name__)


@dataclass
class IntervalSolution:
    interval: tuple[float, float]
    nodes: np.ndarray
    w: np.ndarray
    energy: float
    p: float
    residual: float
    iterations: int
    converged: bool
    norm_sq: float
    history: list = field(default_factory=list, repr=False)
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "energy": self.energy,
            "p": self.p,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "norm_sq": self.norm_sq,
            "flags": list(self.flags),
        }


def energy_factor(p: float) -> float:
    return 0.5 - 1.0 / p


def check_exponent(opr: DiscreteOperator, p: float) -> float:
    p = float(p)
    N, m = opr.grid.profile.dim_N, opr.coeffs.m
    upper = critical_exponent(N, m) if N > 2 * m else math.inf
    if not 2 < p <= upper * (1 + 1e-12):
        raise ConfigError(f"p must lie in (2, {upper:g}], got {p}")
    return p


def _lp_term(opr: DiscreteOperator, wf: np.ndarray, p: float) -> float:
    return float(opr.mass_free @ np.abs(wf) ** p)


def _project_free(opr: DiscreteOperator, wf: np.ndarray, p: float) -> np.ndarray:
    nrm = opr.energy_form(wf)
    lp = _lp_term(opr, wf, p)
    if not (nrm > 0 and lp > 0):
        raise ConfigError("cannot project the zero function onto the Nehari set")
    return wf * (nrm / lp) ** (1.0 / (p - 2))


def nehari_project(opr: DiscreteOperator, w, p: float) -> np.ndarray:
    """Scale ``w`` by ``t`` with ``t^(p-2) = ||w||^2 / int |w|^p beta``."""
    w = np.asarray(w, dtype=float)
    return opr.extend(_project_free(opr, opr.restrict(w), p))


def projected_energy(opr: DiscreteOperator, w, p: float) -> float:
    """``(1/2 - 1/p) Q(w)^{p/(p-2)}``, the energy of the Nehari scaling of ``w``."""
    wf = opr.restrict(w)
    q = opr.energy_form(wf) / _lp_term(opr, wf, p) ** (2.0 / p)
    return energy_factor(p) * q ** (p / (p - 2))


def default_init(opr: DiscreteOperator) -> np.ndarray:
    """Positive bump vanishing at clamped ends, flat at natural ones."""
    g = opr.grid
    s = (g.nodes - g.a) / (g.b - g.a)
    left_nat, right_nat = (b == NATURAL for b in opr.boundary)
    if left_nat and right_nat:
        return 1.0 + 0.5 * np.cos(np.pi * s)
    if left_nat:
        return np.cos(0.5 * np.pi * s)
    if right_nat:
        return np.sin(0.5 * np.pi * s)
    return np.sin(np.pi * s)


def default_starts(opr: DiscreteOperator) -> list[tuple[str, np.ndarray]]:
    """The symmetric bump plus two off-centre bumps.

    Descent preserves a reflection symmetry of the start, so a symmetric
    start alone can stall on a symmetric saddle when the least-energy
    profile concentrates towards one end.
    """
    g = opr.grid
    s = (g.nodes - g.a) / (g.b - g.a)
    starts = [("bump", default_init(opr))]
    for c in (0.2, 0.8):
        starts.append((f"bump@{c:g}", np.exp(-(((s - c) / 0.15) ** 2)) + 1e-3 * default_init(opr)))
    return starts


def least_energy(
    opr: DiscreteOperator,
    p: float | None = None,
    init=None,
    max_iter: int = 2000,
    tol: float = 1e-12,
    grad_tol: float = 1e-8,
) -> IntervalSolution:
    """Minimize the Nehari energy on the interval of ``opr``.

    Without ``init`` the descent runs from each of ``default_starts`` and the
    lowest converged energy is kept (ties go to the earlier start).

    Convergence needs both the relative energy change below ``tol`` (raised
    to the rounding level of the quadratic form, which matters for m=2 on fine
    grids) and the relative Sobolev gradient ``||g||_A / ||w||_A`` below
    ``grad_tol``.  On failure the last iterate is returned with
    ``converged=False``.
    """
    if p is None:
        p = critical_exponent(opr.grid.profile.dim_N, opr.coeffs.m)
    p = check_exponent(opr, p)
    if max_iter < 1:
        raise ConfigError("max_iter must be positive")
    if init is None:
        best = None
        for label, w0 in default_starts(opr):
            sol = _descend(opr, p, w0, max_iter, tol, grad_tol)
            sol.flags.append(f"start={label}")
            if best is None or (sol.converged, -sol.energy) > (best.converged, -best.energy):
                best = sol
        if opr.coeffs.m == 2:
            best.flags.append("m=2: positive bump starts, no sign structure assumed")
        return _report(best)
    w0 = np.asarray(init, dtype=float)
    if w0.shape != opr.grid.nodes.shape:
        raise ConfigError("init must be sampled on the operator grid")
    return _report(_descend(opr, p, w0, max_iter, tol, grad_tol))


def _report(sol: IntervalSolution) -> IntervalSolution:
    if not sol.converged:
        log.warning("least_energy did not converge in %d iterations on %s (grad %.2e)",
                    sol.iterations, sol.interval, sol.residual)
    return sol


def _descend(opr, p, w0, max_iter, tol, grad_tol) -> IntervalSolution:
    flags = []

    factor = energy_factor(p)
    w = _project_free(opr, opr.restrict(w0), p)

    def sobolev_grad(wf):
        nl = opr.mass_free * np.abs(wf) ** (p - 2) * wf
        return wf - opr.solve(nl)

    g = sobolev_grad(w)
    E = factor * opr.energy_form(w)
    absA = abs(opr.A)
    # relative rounding level of the quadratic form; energy changes below it are noise
    noise = 64 * np.finfo(float).eps * float(np.abs(w) @ (absA @ np.abs(w))) / opr.energy_form(w)
    tol_eff = max(tol, noise)
    history = [E]
    step = 1.0
    converged = False
    rel_grad = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        w_new = _project_free(opr, w - step * g, p)
        E_new = factor * opr.energy_form(w_new)
        if not np.isfinite(E_new):
            raise NumericalError("energy became non-finite during descent")
        if E_new > E * (1 + 1e-14) and step != 1.0:
            # safeguard: fall back to the fixed-point step
            step = 1.0
            w_new = _project_free(opr, w - g, p)
            E_new = factor * opr.energy_form(w_new)
        g_new = sobolev_grad(w_new)
        s, y = w_new - w, g_new - g
        sy = opr.energy_form(s, y)
        ss = opr.energy_form(s)
        step = ss / sy if sy > 0 else 1.0
        step = min(max(step, 1e-3), 1e3)
        dE = abs(E - E_new) / E_new
        w, g, E = w_new, g_new, E_new
        history.append(E)
        rel_grad = math.sqrt(max(opr.energy_form(g), 0.0) / opr.energy_form(w))
        if dE < tol_eff and rel_grad < grad_tol:
            converged = True
            break
    if not converged:
        flags.append("not converged")
        log.debug("descent stopped after %d iterations (grad %.2e)", it, rel_grad)

    w_full = opr.extend(w)
    nrm = opr.energy_form(w)
    return IntervalSolution(
        interval=(opr.grid.a, opr.grid.b),
        nodes=opr.grid.nodes.copy(),
        w=w_full,
        energy=factor * nrm,
        p=p,
        residual=rel_grad,
        iterations=it,
        converged=converged,
        norm_sq=nrm,
        history=history,
        flags=flags,
    )


def nehari_defect(opr: DiscreteOperator, sol: IntervalSolution) -> float:
    """``|‖w‖² - int |w|^p beta| / ‖w‖²``."""
    wf = opr.restrict(sol.w)
    nrm = opr.energy_form(wf)
    return abs(nrm - _lp_term(opr, wf, sol.p)) / nrm


def solution_strong_residual(opr: DiscreteOperator, sol: IntervalSolution) -> float:
    return strong_residual(opr, sol.w, sol.p)


@dataclass
class OracleResult:
    energy: float
    slope: float
    length: float
    t: np.ndarray
    w: np.ndarray


def _shoot_once(alpha0: float, p: float, s: float, t_max: float, dense: bool = False):
    def rhs(t, y):
        w, wp, _ = y
        return [wp, alpha0 * w - abs(w) ** (p - 2) * w, wp * wp + alpha0 * w * w]

    def hit_zero(t, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    return solve_ivp(
        rhs, (0.0, t_max), [0.0, s, 0.0], method="DOP853", events=hit_zero,
        rtol=1e-13, atol=1e-15, dense_output=dense,
    )


def shooting_oracle(alpha0_const: float, p: float, L: float, samples: int = 401) -> OracleResult:
    """Positive Dirichlet ground state of ``-w'' + alpha0 w = w^{p-1}`` on ``(0, L)``.

    The first return time to ``w = 0`` decreases monotonically in the initial
    slope ``w'(0) = s``, so ``s`` is found by bracketing and Brent's method.
    The energy ``(1/2 - 1/p) int (w'^2 + alpha0 w^2)`` is integrated along.
    """
    if not alpha0_const > 0:
        raise ConfigError("alpha0 must be positive")
    if not p > 2:
        raise ConfigError("p must exceed 2")
    if not L > 0:
        raise ConfigError("L must be positive")
    t_cap = 2.0 * L

    def return_time(s):
        sol = _shoot_once(alpha0_const, p, s, t_cap)
        return sol.t_events[0][0] if sol.t_events[0].size else t_cap

    # turning amplitude where the potential reaches the initial energy grows with s
    lo, hi = 1e-8, 1.0
    for _ in range(200):
        if return_time(hi) < L:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NumericalError("could not bracket the shooting slope from above")
    if return_time(lo) <= L:
        raise NumericalError("could not bracket the shooting slope from below")
    s = brentq(lambda x: return_time(x) - L, lo, hi, xtol=1e-15, rtol=1e-14, maxiter=200)
    sol = _shoot_once(alpha0_const, p, s, t_cap, dense=True)
    if not sol.t_events[0].size:
        raise NumericalError("oracle trajectory did not return to zero")
    T = sol.t_events[0][0]
    energy = energy_factor(p) * sol.y_events[0][0][2]
    t = np.linspace(0.0, T, samples)
    return OracleResult(energy=float(energy), slope=float(s), length=float(T), t=t, w=sol.sol(t)[0])
