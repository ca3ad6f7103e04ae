"""Discretization of the reduced interval problem.

Functions ``w`` on a subinterval ``(a, b)`` of the orbit space are sampled on
a grid.  The weak form of ``alpha_0 + a_1 (-L) + a_2 (-L)^2`` with
``L = d^2/dt^2 + h d/dt = beta^{-1} (beta w')'`` is assembled with piecewise
linear elements: the flux weight of a cell is ``beta`` at its midpoint and the
lumped mass of a node is the exact integral of ``beta`` over its dual cell.
With that pairing the scheme reproduces ``L`` on even quadratics next to a
singular orbit where ``beta ~ t^q``, so difference residuals stay second order
up to the endpoint.  ``beta`` is allowed to vanish at
an endpoint that is a singular orbit; there the endpoint value stays free
(natural condition) since the flux ``beta w'`` vanishes on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, eigvals_banded
from scipy.integrate import simpson

from .curvature import OperatorCoefficients
from .errors import ConfigError, NumericalError
from .geometry import Profile

DIRICHLET = "dirichlet"
NATURAL = "natural"

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True, eq=False)
class Grid:
    profile: Profile
    a: float
    b: float
    nodes: np.ndarray
    beta_vals: np.ndarray
    h_vals: np.ndarray
    mass: np.ndarray
    edge_beta: np.ndarray
    left_singular: bool
    right_singular: bool

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.nodes.size - 1

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)


def _half_cell_integrals(profile: Profile, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + rad[:, None] * _GL_X[None, :]
    return rad * (profile.beta(pts) @ _GL_W)


def grid_from_nodes(profile: Profile, nodes) -> Grid:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 3 or np.any(np.diff(nodes) <= 0):
        raise ConfigError("grid nodes must be strictly increasing (at least 3)")
    a, b = float(nodes[0]), float(nodes[-1])
    if a < -1e-14 or b > profile.d * (1 + 1e-14):
        raise ConfigError("grid must lie inside [0, d]")
    sing_l, sing_r = profile.singular_ends
    tol = 1e-12 * profile.d
    left_singular = bool(sing_l and abs(a) <= tol)
    right_singular = bool(sing_r and abs(b - profile.d) <= tol)
    if left_singular:
        nodes[0] = a = 0.0
    if right_singular:
        nodes[-1] = b = profile.d

    mid = 0.5 * (nodes[:-1] + nodes[1:])
    left_half = _half_cell_integrals(profile, nodes[:-1], mid)
    right_half = _half_cell_integrals(profile, mid, nodes[1:])
    mass = np.zeros(nodes.size)
    mass[:-1] += left_half
    mass[1:] += right_half

    beta_vals = profile.beta(nodes)
    h_vals = np.full(nodes.size, np.nan)
    inner = slice(1 if left_singular else 0, nodes.size - 1 if right_singular else nodes.size)
    h_vals[inner] = profile.h(nodes[inner])
    if np.any(beta_vals[1:-1] <= 0):
        raise ConfigError("beta must be positive at interior nodes")
    return Grid(
        profile=profile, a=a, b=b, nodes=nodes, beta_vals=beta_vals, h_vals=h_vals,
        mass=mass, edge_beta=profile.beta(mid) * np.diff(nodes),
        left_singular=left_singular, right_singular=right_singular,
    )


def make_grid(profile: Profile, a: float, b: float, n: int) -> Grid:
    """Uniform grid with ``n`` cells on ``[a, b]``."""
    if n < 16:
        raise ConfigError("grid needs n >= 16 cells")
    if not 0 <= a < b <= profile.d * (1 + 1e-14):
        raise ConfigError(f"need 0 <= a < b <= d, got ({a}, {b})")
    if b - a < 10 * np.finfo(float).eps * profile.d:
        raise ConfigError("interval too short")
    return grid_from_nodes(profile, np.linspace(a, b, n + 1))


def quad_beta(grid: Grid, values, rule: str = "mass") -> float:
    """Integral of ``values * beta`` over the grid interval.

    ``"mass"`` uses the lumped dual-cell weights of the operator (exact
    cell integrals of ``beta``), ``"trapezoid"`` and ``"simpson"`` apply the
    composite rules to ``values * beta`` at the nodes.
    """
    v = np.asarray(values, dtype=float)
    if rule == "mass":
        return float(grid.mass @ v)
    if rule == "trapezoid":
        return float(np.trapezoid(v * grid.beta_vals, grid.nodes))
    if rule == "simpson":
        if grid.n % 2:
            return float(np.trapezoid(v * grid.beta_vals, grid.nodes))
        return float(simpson(v * grid.beta_vals, x=grid.nodes))
    raise ConfigError(f"unknown quadrature rule {rule!r}")


def _one_sided(w, x, i0, direction):
    # second-order one-sided first and second derivatives at node i0
    idx = [i0 + direction * k for k in range(4)]
    xs = x[idx] - x[i0]
    # Taylor fit through 4 points: exact for cubics
    V = np.vander(xs, 4, increasing=True)
    coef = np.linalg.solve(V, w[idx])
    return coef[1], 2 * coef[2]


def apply_L(grid: Grid, w) -> np.ndarray:
    """Strong form ``w'' + h w'`` by central differences.

    At a singular endpoint the regular limit ``(N - n) w''`` is used with an
    even reflection for ``w''``; at other endpoints one-sided formulas.
    """
    w = np.asarray(w, dtype=float)
    x = grid.nodes
    out = np.empty_like(w)
    hl, hr = x[1:-1] - x[:-2], x[2:] - x[1:-1]
    wl, wc, wr = w[:-2], w[1:-1], w[2:]
    d2 = 2 * (hl * wr - (hl + hr) * wc + hr * wl) / (hl * hr * (hl + hr))
    d1 = (hl**2 * wr + (hr**2 - hl**2) * wc - hr**2 * wl) / (hl * hr * (hl + hr))
    out[1:-1] = d2 + grid.h_vals[1:-1] * d1
    prof = grid.profile
    for side, i0, direction in ((0, 0, 1), (1, -1, -1)):
        singular = grid.left_singular if side == 0 else grid.right_singular
        if singular:
            j = 1 if side == 0 else w.size - 2
            dx = abs(x[j] - x[i0])
            out[i0] = prof.endpoint_factor(side) * 2 * (w[j] - w[i0]) / dx**2
        else:
            i = 0 if side == 0 else w.size - 1
            d1e, d2e = _one_sided(w, x, i, direction)
            out[i] = d2e + grid.h_vals[i] * d1e
    return out


def stiffness(grid: Grid) -> sp.csr_matrix:
    """Neumann stiffness matrix of ``int beta w' v'``."""
    k = grid.edge_beta / grid.spacing**2
    n1 = grid.nodes.size
    diag = np.zeros(n1)
    diag[:-1] += k
    diag[1:] += k
    return sp.diags([-k, diag, -k], [-1, 0, 1], shape=(n1, n1), format="csr")


def weak_L(grid: Grid, w) -> np.ndarray:
    """Discrete ``L w = -M^{-1} K w`` with zero boundary flux."""
    return -(stiffness(grid) @ np.asarray(w, dtype=float)) / grid.mass


def to_upper_banded(A: sp.spmatrix, bw: int) -> np.ndarray:
    A = sp.dia_matrix(A)
    n = A.shape[0]
    ab = np.zeros((bw + 1, n))
    for off, row in zip(A.offsets, A.data):
        if 0 <= off <= bw:
            # dia storage: data[k, j] = A[j - off, j]
            ab[bw - off, off:] = row[off:]
    return ab


@dataclass(eq=False)
class DiscreteOperator:
    grid: Grid
    coeffs: OperatorCoefficients
    boundary: tuple[str, str]
    free: np.ndarray
    A: sp.csr_matrix
    alpha0_vals: np.ndarray
    _chol: np.ndarray = field(repr=False, default=None)

    @property
    def mass_free(self) -> np.ndarray:
        return self.grid.mass[self.free]

    @property
    def bandwidth(self) -> int:
        return self.coeffs.m

    def restrict(self, w) -> np.ndarray:
        return np.asarray(w, dtype=float)[self.free]

    def extend(self, w_free) -> np.ndarray:
        out = np.zeros(self.grid.nodes.size)
        out[self.free] = w_free
        return out

    def solve(self, rhs_free) -> np.ndarray:
        return cho_solve_banded((self._chol, False), rhs_free)

    def energy_form(self, u_free, v_free=None) -> float:
        v_free = u_free if v_free is None else v_free
        return float(u_free @ (self.A @ v_free))


def smallest_eigenvalue(opr: DiscreteOperator) -> float:
    """Smallest ``lambda`` with ``A v = lambda M v`` on the free nodes."""
    s = 1.0 / np.sqrt(opr.mass_free)
    S = sp.diags(s) @ opr.A @ sp.diags(s)
    ab = to_upper_banded(S, opr.bandwidth)
    return float(eigvals_banded(ab, lower=False, select="i", select_range=(0, 0))[0])


def default_boundary(grid: Grid) -> tuple[str, str]:
    return (
        NATURAL if grid.left_singular else DIRICHLET,
        NATURAL if grid.right_singular else DIRICHLET,
    )


def assemble(grid: Grid, coeffs: OperatorCoefficients, boundary=None) -> DiscreteOperator:
    """Banded symmetric matrix of the weighted weak form on the free nodes.

    m=1: ``int (a1 w'v' + alpha0 w v) beta``.  m=2 adds ``a2 int (Lw)(Lv) beta``
    with ``L = -M^{-1} K``; clamped ends fix ``w = 0`` and the zero-flux row
    of ``L`` there carries ``w' = 0``.
    """
    boundary = tuple(boundary) if boundary is not None else default_boundary(grid)
    if len(boundary) != 2 or any(b not in (DIRICHLET, NATURAL) for b in boundary):
        raise ConfigError(f"bad boundary tags {boundary!r}")
    K = stiffness(grid)
    M = grid.mass
    if np.any(M <= 0):
        raise ConfigError("lumped mass must be positive")
    alpha0 = np.asarray(coeffs.alpha0(grid.nodes), dtype=float)
    if not np.all(np.isfinite(alpha0)):
        raise ConfigError("alpha0 must be finite on the grid")
    A = coeffs.a[0] * K + sp.diags(alpha0 * M)
    if coeffs.m == 2:
        A = A + coeffs.a[1] * (K @ sp.diags(1.0 / M) @ K)

    n1 = grid.nodes.size
    keep = np.ones(n1, dtype=bool)
    if boundary[0] == DIRICHLET:
        keep[0] = False
    if boundary[1] == DIRICHLET:
        keep[-1] = False
    free = np.nonzero(keep)[0]
    A = sp.csr_matrix(A[free][:, free])
    A = 0.5 * (A + A.T)

    opr = DiscreteOperator(grid=grid, coeffs=coeffs, boundary=boundary, free=free,
                           A=sp.csr_matrix(A), alpha0_vals=alpha0)
    try:
        opr._chol = cholesky_banded(to_upper_banded(opr.A, coeffs.m), lower=False)
    except LinAlgError as exc:
        lam = smallest_eigenvalue(opr)
        raise NumericalError(
            f"assembled operator is not positive definite (smallest eigenvalue ~ {lam:.3e})"
        ) from exc
    return opr


def apply_operator(opr: DiscreteOperator, w) -> np.ndarray:
    """Nodal values of the discrete ``P w = M^{-1} A w`` (zero at clamped nodes)."""
    wf = opr.restrict(w)
    return opr.extend((opr.A @ wf) / opr.mass_free)


def norm_beta_a(opr: DiscreteOperator, w) -> float:
    q = opr.energy_form(opr.restrict(w))
    if q < 0:
        raise NumericalError("negative quadratic form; assembly is broken")
    return float(np.sqrt(q))


def strong_residual(opr: DiscreteOperator, w, p: float) -> float:
    """Max over interior nodes of ``|P w - |w|^{p-2} w|`` with difference stencils."""
    w = np.asarray(w, dtype=float)
    Lw = apply_L(opr.grid, w)
    if opr.coeffs.m == 1:
        Pw = -opr.coeffs.a[0] * Lw + opr.alpha0_vals * w
        inner = slice(1, -1)
    else:
        Pw = opr.coeffs.a[1] * apply_L(opr.grid, Lw) - opr.coeffs.a[0] * Lw + opr.alpha0_vals * w
        inner = slice(2, -2)
    r = Pw - np.abs(w) ** (p - 2) * w
    return float(np.max(np.abs(r[inner])))


def critical_exponent(N: int, m: int) -> float:
    if N <= 2 * m:
        raise ConfigError(f"critical exponent needs N > 2m (N={N}, m={m})")
    return 2 * N / (N - 2 * m)
