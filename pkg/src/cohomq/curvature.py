"""Closed-form curvature quantities, coercivity predicates and operator coefficients."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .geometry import Curve, Profile
from .koiso_cao import SolitonSolution, curvature_profiles

COERCIVE = "coercive"
INCONCLUSIVE = "inconclusive"
INVALID_INPUT = "invalid-input"


@dataclass(frozen=True)
class DimConstants:
    """Dimensional constants of the fourth-order Q-curvature, stored exactly."""

    N: int
    a: Fraction
    b: Fraction
    c: Fraction

    @property
    def two_a_minus_c(self) -> Fraction:
        return 2 * self.a - self.c

    @property
    def b_minus_two_a_plus_c(self) -> Fraction:
        return self.b - 2 * self.a + self.c


def dim_constants(N: int) -> DimConstants:
    if N < 4:
        raise ConfigError("dimensional constants need N >= 4")
    N = int(N)
    a = Fraction(1, 2 * (N - 1))
    b = Fraction(N**3 - 4 * N**2 + 16 * N - 16, 8 * (N - 1) ** 2 * (N - 2) ** 2)
    c = Fraction(2, (N - 2) ** 2)
    return DimConstants(N, a, b, c)


def q_general(N: int, R, lap_R, ric_sq):
    """``Q = -a Delta R + b R^2 - c |Ric|^2``."""
    k = dim_constants(N)
    return -float(k.a) * lap_R + float(k.b) * R**2 - float(k.c) * ric_sq


def soliton_lap_R(R, ric_sq, ric_ff, mu: float = 1.0):
    """Laplacian of the scalar curvature on a gradient Ricci soliton."""
    return 2 * mu * R - 2 * ric_sq + 2 * ric_ff


def soliton_q(N: int, R, ric_sq, ric_ff):
    """Q-curvature of a shrinking soliton: ``(2a-c)|Ric|^2 + b R^2 - 2a R - 2a Ric(df, df)``.

    Only valid when the soliton identity for the Laplacian of ``R`` holds.
    """
    k = dim_constants(N)
    a = float(k.a)
    return float(k.two_a_minus_c) * ric_sq + float(k.b) * R**2 - 2 * a * R - 2 * a * ric_ff


def paneitz_coercivity_sufficient(Q_min: float, R_min: float, N: int) -> str:
    """Sufficient test for coercivity of the Paneitz operator (N >= 6).

    Positive ``Q`` and ``R`` give ``"coercive"``; anything else is
    ``"inconclusive"`` since the test is not necessary.
    """
    if N < 6:
        raise ConfigError("the Paneitz coercivity criterion needs N >= 6")
    return COERCIVE if (Q_min > 0 and R_min > 0) else INCONCLUSIVE


@dataclass
class ProductVerdict:
    n2: int
    N: int
    polynomial_lhs: int
    polynomial_rhs: int
    b_minus_c_over_n2: float
    R_g2: float
    min_lower_bound: float
    min_Q: float
    min_R: float
    chain_holds: bool
    positive: bool
    coercivity: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def product_check(n2: int, koiso: SolitonSolution) -> ProductVerdict:
    """Q-curvature of Koiso-Cao x (homogeneous Einstein, dim n2, rescaled).

    The Einstein factor is scaled so that ``R_g2 = b(4) max R_1 / (2 b(N))``;
    both the exact product ``Q`` and the lower bound used to prove its
    positivity are evaluated over the soliton samples.
    """
    if n2 < 4:
        raise ConfigError("product check needs n2 >= 4")
    N = 4 + n2
    lhs, rhs = N**2 * (N - 4) ** 2, 48 * (N - 1)
    if not lhs > rhs:
        raise ConfigError(f"N = {N} violates N^2 (N-4)^2 > 48 (N-1)")
    sol = koiso if koiso.has_profiles else curvature_profiles(koiso)
    k4, kN = dim_constants(4), dim_constants(N)
    b4, bN, cN, aN = float(k4.b), float(kN.b), float(kN.c), float(kN.a)
    gap = float(kN.b - kN.c / n2)

    R1 = sol.R
    R2 = b4 / (2 * bN) * float(np.max(R1))
    Q1 = sol.Q
    lower = Q1 - b4 * R1**2 + 2 * bN * R1 * R2 + bN * R1**2 + gap * R2**2

    lap_R1 = soliton_lap_R(R1, sol.ricci_sq, sol.ric_ff)
    Q = -aN * lap_R1 + bN * (R1 + R2) ** 2 - cN * (sol.ricci_sq + R2**2 / n2)

    chain = bool(np.all(Q > lower))
    positive = bool(gap > 0 and chain and np.min(lower) > 0 and np.min(Q) > 0)
    R_min = float(np.min(R1) + R2)
    return ProductVerdict(
        n2=n2, N=N, polynomial_lhs=lhs, polynomial_rhs=rhs, b_minus_c_over_n2=gap,
        R_g2=R2, min_lower_bound=float(np.min(lower)), min_Q=float(np.min(Q)),
        min_R=R_min, chain_holds=chain, positive=positive,
        coercivity=paneitz_coercivity_sufficient(float(np.min(Q)), R_min, N),
    )


@dataclass(frozen=True)
class OperatorCoefficients:
    """Coefficients of ``alpha_0 + sum_i a_i (-L)^i`` for ``m`` in {1, 2}.

    ``alpha_0(t) = a0_factor * a0_curve(t)``.
    """

    m: int
    a: tuple[float, ...]
    a0_curve: Curve
    a0_factor: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ConfigError("only m = 1 and m = 2 are supported")
        if len(self.a) != self.m:
            raise ConfigError("need exactly m coefficients a_1..a_m")
        if not self.a[-1] > 0:
            raise ConfigError("leading coefficient a_m must be positive")

    def alpha0(self, t):
        return self.a0_factor * self.a0_curve(t)

    def key(self) -> dict:
        curve = json.dumps(self.a0_curve.to_dict(), sort_keys=True)
        return {
            "m": self.m,
            "a": list(self.a),
            "a0_factor": self.a0_factor,
            "a0_curve": hashlib.sha256(curve.encode()).hexdigest()[:16],
            "label": self.label,
        }

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "a": list(self.a),
            "a0_factor": self.a0_factor,
            "a0_curve": self.a0_curve.to_dict(),
            "label": self.label,
        }


def constant_coefficients(alpha0: float, a: tuple[float, ...] = (1.0,)) -> OperatorCoefficients:
    if not alpha0 > 0:
        raise ConfigError("alpha0 must be positive")
    return OperatorCoefficients(
        m=len(a), a=tuple(float(x) for x in a), a0_curve=Curve.constant(alpha0),
        label=f"const:{alpha0:g}",
    )


def yamabe_coefficients(profile: Profile, samples: int = 1001) -> OperatorCoefficients:
    """Conformal Laplacian ``-L + (N-2)/(4(N-1)) R``."""
    N = profile.dim_N
    if N < 3:
        raise ConfigError("conformal Laplacian needs N >= 3")
    factor = (N - 2) / (4 * (N - 1))
    R = profile.R(np.linspace(0.0, profile.d, samples))
    if np.min(R) <= 0:
        raise ConfigError("scalar curvature must be positive for a coercive Yamabe operator")
    return OperatorCoefficients(
        m=1, a=(1.0,), a0_curve=profile.scalar_curvature, a0_factor=factor,
        label=f"yamabe:{profile.name}",
    )


def einstein_gjms_coefficients(m: int, factor_constants) -> OperatorCoefficients:
    """Expand ``prod_i (-L + c_i)`` into ``alpha_0 + sum a_i (-L)^i``."""
    cs = [float(x) for x in factor_constants]
    if m not in (1, 2):
        raise ConfigError("only m = 1 and m = 2 are supported")
    if len(cs) != m or any(not x > 0 for x in cs):
        raise ConfigError("need m positive factor constants")
    if m == 1:
        a0, a = cs[0], (1.0,)
    else:
        a0, a = cs[0] * cs[1], (cs[0] + cs[1], 1.0)
    return OperatorCoefficients(
        m=m, a=a, a0_curve=Curve.constant(a0),
        label="einstein:" + ",".join(f"{x:g}" for x in cs),
    )
