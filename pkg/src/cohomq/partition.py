"""Optimal partitions of the orbit interval ``[0, d]`` into ``ell`` consecutive pieces.

Three routes: dynamic programming over a table of least energies on a
candidate grid, continuous refinement of the breakpoints, and the
strong-competition limit of the coupled system whose components segregate
onto the pieces of an optimal partition.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded
from scipy.optimize import root

from .curvature import OperatorCoefficients
from .errors import ConfigError, NumericalError
from .geometry import Profile
from .nehari import IntervalSolution, least_energy
from .reduced import (
    DiscreteOperator,
    to_upper_banded,
    assemble,
    critical_exponent,
    grid_from_nodes,
    make_grid,
)

log = logging.getLogger(__name__)

CACHE_VERSION = 1
TIE_TOL = 1e-12
METHODS = ("dp", "refine", "segregation")


@dataclass
class Partition:
    ell: int
    d: float
    breakpoints: list[float]
    interval_energies: list[float]
    total_energy: float
    method: str
    solutions: list[IntervalSolution] | None = None
    breakpoint_indices: list[int] | None = None
    ties: list[list[int]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown partition method {self.method!r}")
        self.check()

    @property
    def intervals(self) -> list[tuple[float, float]]:
        pts = [0.0, *self.breakpoints, self.d]
        return list(zip(pts[:-1], pts[1:]))

    def check(self) -> None:
        if self.ell < 1:
            raise ConfigError("ell must be at least 1")
        if len(self.breakpoints) != self.ell - 1 or len(self.interval_energies) != self.ell:
            raise ConfigError("partition has the wrong number of pieces")
        pts = [0.0, *self.breakpoints, self.d]
        if any(b <= a for a, b in zip(pts[:-1], pts[1:])):
            raise ConfigError("breakpoints must be strictly increasing and interior")
        if abs(self.total_energy - sum(self.interval_energies)) > 1e-12 * max(1.0, abs(self.total_energy)):
            raise ConfigError("total energy differs from the sum of interval energies")

    def to_dict(self) -> dict:
        doc = {
            "ell": self.ell,
            "d": self.d,
            "method": self.method,
            "breakpoints": list(self.breakpoints),
            "energies": list(self.interval_energies),
            "total": self.total_energy,
            "ties": [list(t) for t in self.ties],
            "diagnostics": self.diagnostics,
        }
        if self.breakpoint_indices is not None:
            doc["breakpoint_indices"] = list(self.breakpoint_indices)
        return doc


def _sum_left(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total


def make_partition(ell, d, breakpoints, energies, method, **kwargs) -> Partition:
    energies = [float(e) for e in energies]
    return Partition(
        ell=ell, d=float(d), breakpoints=[float(b) for b in breakpoints],
        interval_energies=energies, total_energy=_sum_left(energies), method=method, **kwargs,
    )


# --- energy table -----------------------------------------------------------


@dataclass
class EnergyTable:
    points: np.ndarray
    E: np.ndarray
    valid: np.ndarray
    p: float
    n: int
    key: dict
    from_cache: bool = False

    @property
    def G(self) -> int:
        return self.points.size

    @property
    def d(self) -> float:
        return float(self.points[-1])

    @property
    def cell(self) -> float:
        return float(self.points[1] - self.points[0])


def interval_energy(profile: Profile, coeffs: OperatorCoefficients, p: float, a: float, b: float,
                    n: int, **solver) -> IntervalSolution:
    opr = assemble(make_grid(profile, a, b, n), coeffs)
    return least_energy(opr, p, **solver)


def _table_row(args) -> list[tuple[int, float]]:
    profile, coeffs, p, points, n, i = args
    out = []
    for j in range(i + 1, len(points)):
        try:
            sol = interval_energy(profile, coeffs, p, float(points[i]), float(points[j]), n)
            out.append((j, sol.energy if sol.converged else math.nan))
        except (ConfigError, NumericalError) as exc:
            log.warning("table cell (%d, %d) failed: %s", i, j, exc)
            out.append((j, math.nan))
    return out


def table_key(profile: Profile, coeffs: OperatorCoefficients, p: float, G: int, n: int) -> dict:
    prof = hashlib.sha256(json.dumps(profile.to_dict(), sort_keys=True).encode()).hexdigest()
    return {
        "version": CACHE_VERSION,
        "profile": profile.name,
        "profile_sha256": prof,
        "coeffs": coeffs.key(),
        "p": float(p),
        "G": int(G),
        "n": int(n),
    }


def _cache_path(cache_dir, key: dict) -> Path:
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
    return Path(cache_dir) / f"energy_table_{digest[:24]}.json"


def energy_table(profile: Profile, coeffs: OperatorCoefficients, p: float | None, G: int,
                 n: int = 200, cache_dir=None, jobs: int = 1) -> EnergyTable:
    """``E[i][j] = c_(t_i, t_j)`` on ``G`` uniform candidate points of ``[0, d]``.

    Failed or unconverged cells are NaN and marked invalid.  With
    ``cache_dir`` the table is stored as JSON under a hash of its key and
    reloaded on identical requests.
    """
    if G < 8:
        raise ConfigError("energy table needs G >= 8")
    if p is None:
        p = critical_exponent(profile.dim_N, coeffs.m)
    points = np.linspace(0.0, profile.d, G)
    key = table_key(profile, coeffs, p, G, n)
    path = _cache_path(cache_dir, key) if cache_dir is not None else None
    if path is not None and path.exists():
        doc = json.loads(path.read_text())
        if doc.get("key") == key:
            E = np.array([[math.nan if v is None else v for v in row] for row in doc["E"]])
            return EnergyTable(points=points, E=E, valid=np.isfinite(E), p=p, n=n, key=key,
                               from_cache=True)
        log.warning("cache file %s has a mismatched key; recomputing", path)

    E = np.full((G, G), math.nan)
    tasks = [(profile, coeffs, p, points, n, i) for i in range(G - 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_table_row, tasks))
    else:
        rows = [_table_row(t) for t in tasks]
    for i, row in enumerate(rows):
        for j, e in row:
            E[i, j] = e
    table = EnergyTable(points=points, E=E, valid=np.isfinite(E), p=p, n=n, key=key)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"key": key, "points": points.tolist(),
               "E": [[None if not np.isfinite(v) else float(v) for v in row] for row in E]}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc))
        os.replace(tmp, path)
    return table


# --- dynamic programming ----------------------------------------------------


def _table_partition(table: EnergyTable, idx, method: str, ties=None) -> Partition:
    cuts = [0, *idx, table.G - 1]
    energies = [table.E[a, b] for a, b in zip(cuts[:-1], cuts[1:])]
    return make_partition(
        len(cuts) - 1, table.d, [table.points[i] for i in idx], energies, method,
        breakpoint_indices=list(idx), ties=ties or [],
    )


def dp_partition(table: EnergyTable, ell: int, max_ties: int = 1000) -> Partition:
    """Exact minimizer of ``sum E`` over ``ell`` consecutive table segments.

    Segment sums are accumulated left to right, so totals are bitwise equal
    to a direct summation of the chosen cells.  All breakpoint tuples whose
    total lies within ``1e-12`` of the optimum are listed in ``ties``; the
    reported partition has the smallest total, the lexicographically first
    tuple among exactly equal totals.
    """
    G = table.G
    if not 1 <= ell <= G - 1:
        raise ConfigError(f"ell must lie in [1, {G - 1}]")
    E = np.where(table.valid, table.E, math.inf)
    F = np.full((ell + 1, G), math.inf)
    F[1, 1:] = E[0, 1:]
    for k in range(2, ell + 1):
        for j in range(k, G):
            F[k, j] = np.min(F[k - 1, k - 1:j] + E[k - 1:j, j])
    best = F[ell, G - 1]
    if not np.isfinite(best):
        raise NumericalError("no feasible partition with finite energy")
    tol = TIE_TOL * max(1.0, abs(best))

    ties: list[tuple[int, ...]] = []

    def backtrack(k, j, budget, suffix):
        if len(ties) >= max_ties:
            return
        if k == 1:
            ties.append(tuple(suffix))
            return
        cand = F[k - 1, k - 1:j] + E[k - 1:j, j] - F[k, j]
        for off in np.nonzero(cand <= budget)[0]:
            i = k - 1 + int(off)
            backtrack(k - 1, i, budget - max(cand[off], 0.0), [i, *suffix])

    backtrack(ell, G - 1, tol, [])
    totals = {t: _sum_left(E[a, b] for a, b in zip((0, *t), (*t, G - 1))) for t in ties}
    ties = sorted(t for t, v in totals.items() if v <= best + tol)
    if not ties:
        raise NumericalError("dynamic programming backtrack found no optimal tuple")
    chosen = min(ties, key=lambda t: (totals[t], t))
    part = _table_partition(table, chosen, "dp", [list(t) for t in ties] if len(ties) > 1 else [])
    part.diagnostics["tie_count"] = len(ties)
    part.diagnostics["table_cell"] = table.cell
    return part


def brute_force(table: EnergyTable, ell: int) -> tuple[tuple[int, ...], float]:
    """Exhaustive enumeration; returns the lexicographically first optimal tuple."""
    G = table.G
    if not 1 <= ell <= G - 1:
        raise ConfigError(f"ell must lie in [1, {G - 1}]")
    E = np.where(table.valid, table.E, math.inf)
    best_t, best = None, math.inf
    for t in itertools.combinations(range(1, G - 1), ell - 1):
        cuts = (0, *t, G - 1)
        total = _sum_left(E[a, b] for a, b in zip(cuts[:-1], cuts[1:]))
        if total < best:
            best_t, best = t, total
    return best_t, best


# --- continuous refinement --------------------------------------------------


_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, xtol: float, x0: float | None = None, f0: float | None = None):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    When ``(x0, f0)`` is given the result is never worse than it.
    """
    c = hi - _GOLD * (hi - lo)
    d = lo + _GOLD * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLD * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLD * (hi - lo)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    if x0 is not None and f0 is not None and f0 <= fx:
        return x0, f0
    return x, fx


def refine(profile: Profile, coeffs: OperatorCoefficients, p: float | None, init: Partition,
           tol: float = 1e-10, n: int = 200, window: float | None = None, xtol: float = 1e-7,
           max_sweeps: int = 20) -> Partition:
    """Cyclic golden-section descent on the breakpoints of ``init``.

    Each breakpoint moves within ``window`` (default: one candidate cell of
    the table that produced ``init``) of its current position, clipped to the
    neighbouring breakpoints.  Sweeps stop once the total improves by less
    than ``tol``.  Interval solves after the first one on each slot start
    from the previous profile of that slot.
    """
    if p is None:
        p = critical_exponent(profile.dim_N, coeffs.m)
    if init.ell == 1:
        return make_partition(1, init.d, [], init.interval_energies, "refine",
                              diagnostics={"sweeps": 0, "history": [init.total_energy]})
    if window is None:
        window = profile.d / 16 if init.breakpoint_indices is None else init.diagnostics.get(
            "table_cell", profile.d / 16)
    memo: dict[tuple[float, float], float] = {}
    # last profile per interval slot, in coordinates rescaled to [0, 1]
    warm: dict[int, np.ndarray] = {}

    def c(a, b):
        key = (a, b)
        if key not in memo:
            slot = pts.index(a) if a in pts else pts.index(b) - 1
            opr = assemble(make_grid(profile, a, b, n), coeffs)
            init = None
            if slot in warm:
                init = np.interp(np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 1.0, warm[slot].size), warm[slot])
            sol = least_energy(opr, p, init=init)
            if not sol.converged:
                raise NumericalError(f"interval solver did not converge on ({a}, {b})")
            memo[key] = sol.energy
            warm[slot] = sol.w
        return memo[key]

    pts = [0.0, *init.breakpoints, profile.d]
    try:
        energies = [c(a, b) for a, b in zip(pts[:-1], pts[1:])]
        total = _sum_left(energies)
        history = [total]
        sweeps = 0
        for sweeps in range(1, max_sweeps + 1):
            for i in range(1, len(pts) - 1):
                left, right = pts[i - 1], pts[i + 1]
                margin = 1e-3 * (right - left)
                lo = max(pts[i] - window, left + margin)
                hi = min(pts[i] + window, right - margin)
                cur = c(left, pts[i]) + c(pts[i], right)
                x, _ = golden_section(lambda a: c(left, a) + c(a, right), lo, hi, xtol, pts[i], cur)
                pts[i] = x
            energies = [c(a, b) for a, b in zip(pts[:-1], pts[1:])]
            new_total = _sum_left(energies)
            history.append(new_total)
            improved = total - new_total
            total = new_total
            if improved < tol:
                break
    except (ConfigError, NumericalError) as exc:
        log.warning("refinement failed (%s); returning the initial partition", exc)
        out = make_partition(init.ell, init.d, init.breakpoints, init.interval_energies, "refine",
                             diagnostics={"failed": str(exc)})
        return out
    if total > init.total_energy:
        # only possible if init energies came from a different discretization
        log.warning("refined total exceeds the initial total; keeping the initial breakpoints")
    return make_partition(init.ell, init.d, pts[1:-1], energies, "refine",
                          diagnostics={"sweeps": sweeps, "history": history,
                                       "initial_total": init.total_energy})


def attach_solutions(partition: Partition, profile: Profile, coeffs: OperatorCoefficients,
                     p: float | None, n: int = 200) -> Partition:
    """Recompute the interval solutions of ``partition`` (energies are left as they are)."""
    if p is None:
        p = critical_exponent(profile.dim_N, coeffs.m)
    partition.solutions = [interval_energy(profile, coeffs, p, a, b, n) for a, b in partition.intervals]
    return partition


# --- nodal solution ---------------------------------------------------------


@dataclass
class NodalSolution:
    nodes: np.ndarray
    u: np.ndarray
    sign_changes: int
    zero_locations: list[float]
    breakpoint_offsets: list[float]
    weak_residual: float

    def diagnostics(self) -> dict:
        return {
            "sign_changes": self.sign_changes,
            "zero_locations": self.zero_locations,
            "breakpoint_offsets": self.breakpoint_offsets,
            "weak_residual": self.weak_residual,
        }


def _sign_changes(u: np.ndarray, x: np.ndarray) -> tuple[int, list[float]]:
    nz = np.nonzero(u != 0.0)[0]
    zeros = []
    for a, b in zip(nz[:-1], nz[1:]):
        if np.sign(u[a]) != np.sign(u[b]):
            if b == a + 1:
                zeros.append(float(x[a] - u[a] * (x[b] - x[a]) / (u[b] - u[a])))
            else:
                # exact zeros between: report the middle of the zero run
                zeros.append(float(0.5 * (x[a + 1] + x[b - 1])))
    return len(zeros), zeros


def stitch_nodal(partition: Partition, profile: Profile, coeffs: OperatorCoefficients) -> NodalSolution:
    """``u = sum_i (-1)^i w_i`` on the union of the interval grids.

    The weak residual is the dual norm of ``A u - M |u|^{p-2} u`` for the
    operator on the whole of ``[0, d]``, relative to ``||u||``.
    """
    if coeffs.m != 1:
        raise ConfigError("the nodal solution is only defined for m = 1")
    sols = partition.solutions
    if not sols or len(sols) != partition.ell or any(s is None for s in sols):
        raise ConfigError("stitch_nodal needs one interval solution per piece")
    p = sols[0].p
    xs, us = [], []
    for i, sol in enumerate(sols, start=1):
        sign = (-1.0) ** i
        x, w = sol.nodes, sign * sol.w
        if xs:
            x, w = x[1:], w[1:]
        xs.append(x)
        us.append(w)
    nodes = np.concatenate(xs)
    u = np.concatenate(us)
    count, zeros = _sign_changes(u, nodes)
    offsets = [min((abs(z - b) for z in zeros), default=math.inf) for b in partition.breakpoints]

    opr = assemble(grid_from_nodes(profile, nodes), coeffs)
    uf = opr.restrict(u)
    r = opr.A @ uf - opr.mass_free * np.abs(uf) ** (p - 2) * uf
    dual = math.sqrt(max(float(r @ opr.solve(r)), 0.0))
    return NodalSolution(nodes=nodes, u=u, sign_changes=count, zero_locations=zeros,
                         breakpoint_offsets=offsets, weak_residual=dual / math.sqrt(opr.energy_form(uf)))


# --- segregation flow -------------------------------------------------------


@dataclass
class SystemState:
    eta: float
    w: list[np.ndarray]
    alpha: float
    beta: float
    energy: float
    overlap: float
    iterations: int
    norms: list[float]

    def to_dict(self) -> dict:
        return {"eta": self.eta, "energy": self.energy, "overlap": self.overlap,
                "iterations": self.iterations, "norms": self.norms}


def default_eta_schedule(steps: int = 14, start: float = -10.0) -> list[float]:
    return [start * 2.0**k for k in range(steps)]


class _System:
    """Discrete coupled functional on a full-interval operator."""

    def __init__(self, opr: DiscreteOperator, p: float, ell: int, eta: float):
        self.opr, self.p, self.ell, self.eta = opr, p, ell, eta
        self.half = p / 2
        self.M = opr.mass_free

    def pieces(self, W):
        a = np.array([self.opr.energy_form(w) for w in W])
        b = np.array([float(self.M @ np.abs(w) ** self.p) for w in W])
        h = [np.abs(w) ** self.half for w in W]
        C = np.zeros((self.ell, self.ell))
        for i in range(self.ell):
            for j in range(i + 1, self.ell):
                C[i, j] = C[j, i] = float(self.M @ (h[i] * h[j]))
        return a, b, C

    def J_scaled(self, s, a, b, C):
        sh = s**self.half
        return (0.5 * np.sum(s**2 * a) - np.sum(s**self.p * b) / self.p
                - 0.5 * self.eta * float(sh @ C @ sh))

    def scaling(self, W):
        """Unique ``s > 0`` with ``d/ds_i J(s W) = 0`` for every component."""
        a, b, C = self.pieces(W)
        p, q, eta = self.p, self.half, self.eta

        def eqs(x):
            s = np.exp(x)
            sh = s**q
            return (s**2 * a - s**p * b - eta * q * sh * (C @ sh)) / a

        x0 = np.log((a / b) ** (1.0 / (p - 2)))
        sol = root(eqs, x0, method="hybr", tol=1e-14)
        # hybr flags "no further improvement" when it starts at the root
        if not np.all(np.isfinite(sol.x)) or np.max(np.abs(eqs(sol.x))) > 1e-9:
            raise NumericalError(f"Nehari scaling of the system failed: {sol.message}")
        s = np.exp(sol.x)
        return s, self.J_scaled(s, a, b, C)

    def project(self, W):
        s, J = self.scaling(W)
        return [si * w for si, w in zip(s, W)], J

    def overlap(self, W) -> float:
        return float(np.sum(np.triu(self.pieces(W)[2], 1)))

    def directions(self, W):
        """Preconditioned partial gradients ``B_i^{-1} d_i J``.

        ``B_i = A + diag(M |eta| q |w_j|^q |w_i|^(q-2))`` treats the
        competition term implicitly, which keeps unit steps stable as ``eta``
        grows.
        """
        q, eta = self.half, self.eta
        h = [np.abs(w) ** q for w in W]
        out = []
        for i, w in enumerate(W):
            others = sum(h[j] for j in range(self.ell) if j != i)
            aw = np.abs(w)
            floor = 1e-12 * max(float(aw.max()), 1e-300)
            base = np.maximum(aw, floor)
            coup = -eta * q * others * base ** (q - 2)
            grad = (self.opr.A @ w - self.M * aw ** (self.p - 2) * w
                    + self.M * coup * w)
            B = self.opr.A + sp.diags(self.M * coup)
            try:
                chol = cholesky_banded(to_upper_banded(B, self.opr.bandwidth), lower=False)
            except LinAlgError as exc:
                raise NumericalError("preconditioner lost positive definiteness") from exc
            out.append(cho_solve_banded((chol, False), grad))
        return out


def _initial_components(opr: DiscreteOperator, ell: int, shrink: float = 1.0) -> list[np.ndarray]:
    """Bumps on the ``ell`` equal pieces of the interval, disjointly supported.

    Strongly overlapping starts may have no Nehari scaling at all, since the
    coupling term has the same homogeneity as ``|w|^p``.
    """
    g = opr.grid
    x = (g.nodes - g.a) / (g.b - g.a)
    out = []
    for i in range(ell):
        c, half = (i + 0.5) / ell, 0.5 * shrink / ell
        y = np.clip((x - c) / half, -1.0, 1.0)
        out.append(opr.restrict(np.cos(0.5 * np.pi * y) ** 2))
    return out


def _support_runs(w: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    mask = np.abs(w) > threshold * np.max(np.abs(w))
    runs, start = [], None
    for k, v in enumerate(mask):
        if v and start is None:
            start = k
        elif not v and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def extract_partition_data(nodes: np.ndarray, W: list[np.ndarray], threshold: float = 0.01) -> dict:
    """Supports, their order and interface breakpoints of segregated components.

    A breakpoint is the crossing of ``|w_k|`` and ``|w_{k+1}|`` between the
    supports of consecutive components.
    """
    centers = [float(np.sum(nodes * np.abs(w)) / np.sum(np.abs(w))) for w in W]
    order = list(np.argsort(centers))
    supports = []
    for i in order:
        runs = _support_runs(W[i], threshold)
        supports.append([(float(nodes[a]), float(nodes[b])) for a, b in runs])
    consecutive = all(len(s) == 1 for s in supports) and all(
        supports[k][0][1] < supports[k + 1][0][0] for k in range(len(supports) - 1)
    )
    breakpoints = []
    for k in range(len(order) - 1):
        u, v = np.abs(W[order[k]]), np.abs(W[order[k + 1]])
        diff = u - v
        lo = int(np.argmax(u))
        hi = int(np.argmax(v))
        seg = diff[lo:hi + 1]
        cross = np.nonzero((seg[:-1] > 0) & (seg[1:] <= 0))[0]
        if cross.size == 0:
            breakpoints.append(math.nan)
            continue
        m = lo + int(cross[0])
        t = diff[m] / (diff[m] - diff[m + 1])
        breakpoints.append(float(nodes[m] + t * (nodes[m + 1] - nodes[m])))
    return {"order": [int(i) for i in order], "supports": supports, "consecutive": bool(consecutive),
            "breakpoints": breakpoints}


def segregation_flow(profile: Profile, coeffs: OperatorCoefficients, p: float | None, ell: int,
                     eta_schedule=None, steps: int = 400, n: int = 400, n_interval: int = 200,
                     tol: float = 1e-10, threshold: float = 0.01):
    """Follow least-energy states of the competitive system as ``eta -> -inf``.

    For every ``eta`` the functional ``Psi(w) = J(s_w w)`` is minimized by
    preconditioned descent with backtracking, warm-started from the previous
    ``eta``.  Returns the list of final ``SystemState`` per ``eta`` and the
    partition read off the supports at the last one, whose interval energies
    are the single-interval least energies of the extracted pieces.
    """
    if ell < 2:
        raise ConfigError("segregation needs ell >= 2")
    if p is None:
        p = critical_exponent(profile.dim_N, coeffs.m)
    eta_schedule = default_eta_schedule() if eta_schedule is None else [float(e) for e in eta_schedule]
    if not eta_schedule or any(e >= 0 for e in eta_schedule):
        raise ConfigError("eta schedule must consist of negative values")
    if any(b >= a for a, b in zip(eta_schedule[:-1], eta_schedule[1:])):
        raise ConfigError("eta schedule must be strictly decreasing")
    opr = assemble(make_grid(profile, 0.0, profile.d, n), coeffs)
    W = _initial_components(opr, ell)
    d0 = 1e-8
    collapses = 0
    trajectory: list[SystemState] = []
    for eta in eta_schedule:
        system = _System(opr, p, ell, eta)
        W, J = system.project(W)
        it = 0
        for it in range(1, steps + 1):
            D = system.directions(W)
            alpha, accepted = 1.0, False
            while alpha > 1e-8:
                trial = [np.abs(w - alpha * dw) for w, dw in zip(W, D)]
                try:
                    trial, J_new = system.project(trial)
                except NumericalError:
                    J_new = math.inf
                if J_new <= J:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            change = (J - J_new) / J_new
            W, J = trial, J_new
            norms = [math.sqrt(opr.energy_form(w)) for w in W]
            if min(norms) < d0:
                collapses += 1
                if collapses > 3:
                    raise NumericalError("repeated component collapse in the segregation flow")
                W, J = system.project(_initial_components(opr, ell, shrink=0.5))
                continue
            if change < tol:
                break
        norms = [math.sqrt(opr.energy_form(w)) for w in W]
        trajectory.append(SystemState(eta=eta, w=[opr.extend(w) for w in W], alpha=p / 2, beta=p / 2,
                                      energy=J, overlap=system.overlap(W), iterations=it, norms=norms))

    full = [opr.extend(w) for w in W]
    nodes = opr.grid.nodes
    data = extract_partition_data(nodes, full, threshold)
    sens = {str(th): extract_partition_data(nodes, full, th)["supports"] for th in (0.005, 0.02)}
    bps = data["breakpoints"]
    diagnostics = {
        "supports": data["supports"],
        "consecutive": data["consecutive"],
        "threshold": threshold,
        "threshold_sensitivity": sens,
        "overlaps": [s.overlap for s in trajectory],
        "system_energies": [s.energy for s in trajectory],
        "etas": [s.eta for s in trajectory],
        "collapses": collapses,
    }
    if any(not np.isfinite(b) for b in bps) or not data["consecutive"]:
        raise NumericalError(f"segregated supports are not {ell} consecutive intervals: {data['supports']}")
    pts = [0.0, *bps, profile.d]
    sols = [interval_energy(profile, coeffs, p, a, b, n_interval) for a, b in zip(pts[:-1], pts[1:])]
    part = make_partition(ell, profile.d, bps, [s.energy for s in sols], "segregation",
                          solutions=sols, diagnostics=diagnostics)
    return trajectory, part
