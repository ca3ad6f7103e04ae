"""Catalog of cohomogeneity-one profiles.

A profile carries everything the one-dimensional reduction needs: the length
``d`` of the orbit space ``[0, d]``, the warping functions ``f_j`` with their
multiplicities ``d_j``, the orbit-volume weight ``beta = prod f_j**d_j``, the
mean curvature ``h = sum d_j f_j'/f_j`` of the principal orbits and the scalar
curvature ``R(t)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigError

if TYPE_CHECKING:
    from .koiso_cao import SolitonSolution

__all__ = [
    "Curve",
    "Warp",
    "Profile",
    "ValidationReport",
    "make_sphere",
    "make_cpn",
    "make_hpn",
    "make_flat",
    "profile_from_soliton",
    "validate",
    "catalog",
    "profile_from_name",
]

# name -> (value(t, scale), derivative(t, scale))
_ANALYTIC_FORMS = {
    "const": (lambda t, s: s * np.ones_like(t), lambda t, s: np.zeros_like(t)),
    "sin": (lambda t, s: s * np.sin(t), lambda t, s: s * np.cos(t)),
    "cos": (lambda t, s: s * np.cos(t), lambda t, s: -s * np.sin(t)),
    "sin_cos": (lambda t, s: s * np.sin(t) * np.cos(t), lambda t, s: s * np.cos(2.0 * t)),
    "sin_half": (lambda t, s: s * np.sin(t / 2), lambda t, s: 0.5 * s * np.cos(t / 2)),
    "cos_half": (lambda t, s: s * np.cos(t / 2), lambda t, s: -0.5 * s * np.sin(t / 2)),
}


@dataclass(frozen=True)
class Curve:
    """A scalar function of ``t`` given either in closed form or by samples.

    Sampled curves are cubic Hermite interpolants of values and derivatives,
    so the derivative is the exact derivative of the interpolant.
    """

    kind: str
    form: str = "const"
    scale: float = 1.0
    t: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    derivs: tuple[float, ...] = ()
    _spline: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "analytic":
            if self.form not in _ANALYTIC_FORMS:
                raise ConfigError(f"unknown analytic form {self.form!r}")
        elif self.kind == "sampled":
            if not (len(self.t) == len(self.values) == len(self.derivs) >= 2):
                raise ConfigError("sampled curve needs matching t, values, derivs")
            spline = CubicHermiteSpline(
                np.asarray(self.t), np.asarray(self.values), np.asarray(self.derivs)
            )
            object.__setattr__(self, "_spline", spline)
        else:
            raise ConfigError(f"unknown curve kind {self.kind!r}")

    @classmethod
    def analytic(cls, form: str, scale: float = 1.0) -> Curve:
        return cls(kind="analytic", form=form, scale=float(scale))

    @classmethod
    def constant(cls, value: float) -> Curve:
        return cls(kind="analytic", form="const", scale=float(value))

    @classmethod
    def sampled(cls, t, values, derivs) -> Curve:
        return cls(
            kind="sampled",
            t=tuple(map(float, t)),
            values=tuple(map(float, values)),
            derivs=tuple(map(float, derivs)),
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "analytic":
            return _ANALYTIC_FORMS[self.form][0](t, self.scale)
        return self._spline(t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "analytic":
            return _ANALYTIC_FORMS[self.form][1](t, self.scale)
        return self._spline(t, 1)

    def to_dict(self) -> dict:
        if self.kind == "analytic":
            return {"kind": "analytic", "form": self.form, "scale": self.scale}
        return {
            "kind": "sampled",
            "t": list(self.t),
            "values": list(self.values),
            "derivs": list(self.derivs),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Curve:
        if doc.get("kind") == "analytic":
            return cls.analytic(doc["form"], doc.get("scale", 1.0))
        if doc.get("kind") == "sampled":
            return cls.sampled(doc["t"], doc["values"], doc["derivs"])
        raise ConfigError(f"unknown curve kind {doc.get('kind')!r}")


@dataclass(frozen=True)
class Warp:
    curve: Curve
    multiplicity: int


@dataclass(frozen=True)
class Profile:
    """Immutable cohomogeneity-one geometry reduced to the orbit space ``[0, d]``."""

    name: str
    dim_N: int
    d: float
    warps: tuple[Warp, ...]
    singular_dims: tuple[int, int] | None
    scalar_curvature: Curve
    orbit_labels: tuple[str, str, str] = ("", "", "")

    def beta(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for w in self.warps:
            out = out * w.curve(t) ** w.multiplicity
        return out

    def h(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w in self.warps:
            out = out + w.multiplicity * w.curve.deriv(t) / w.curve(t)
        return out

    def R(self, t):
        return self.scalar_curvature(t)

    @property
    def singular_ends(self) -> tuple[bool, bool]:
        """Whether the orbit-volume weight vanishes at ``t = 0`` and ``t = d``."""
        b0, b1 = self.beta(np.array([0.0, self.d]))
        scale = float(np.max(np.abs(self.beta(np.linspace(0, self.d, 33)))))
        return bool(abs(b0) <= 1e-12 * scale), bool(abs(b1) <= 1e-12 * scale)

    def endpoint_factor(self, side: int) -> float:
        """``N - n`` for the singular orbit at ``t = 0`` (side 0) or ``t = d`` (side 1)."""
        if self.singular_dims is None:
            raise ConfigError(f"profile {self.name!r} has no singular orbits")
        return float(self.dim_N - self.singular_dims[side])

    def to_dict(self) -> dict:
        warps = []
        for w in self.warps:
            doc = w.curve.to_dict()
            doc["multiplicity"] = w.multiplicity
            warps.append(doc)
        return {
            "name": self.name,
            "dim_N": self.dim_N,
            "d": self.d,
            "warps": warps,
            "singular_dims": None if self.singular_dims is None else list(self.singular_dims),
            "orbit_labels": list(self.orbit_labels),
            "scalar_curvature": self.scalar_curvature.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> Profile:
        try:
            warps = tuple(
                Warp(Curve.from_dict(w), int(w["multiplicity"])) for w in doc["warps"]
            )
            sd = doc.get("singular_dims")
            return cls(
                name=doc["name"],
                dim_N=int(doc["dim_N"]),
                d=float(doc["d"]),
                warps=warps,
                singular_dims=None if sd is None else (int(sd[0]), int(sd[1])),
                scalar_curvature=Curve.from_dict(doc["scalar_curvature"]),
                orbit_labels=tuple(doc.get("orbit_labels", ("", "", ""))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed profile document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> Profile:
        return cls.from_dict(json.loads(text))


def make_sphere(n1: int, n2: int) -> Profile:
    """Round sphere ``S^N``, ``N = n1 + n2 - 1``, under ``O(n1) x O(n2)``.

    Warps ``cos(t/2)`` and ``sin(t/2)`` with multiplicities ``n1-1`` and
    ``n2-1`` on ``[0, pi]``.
    """
    if n1 < 2 or n2 < 2:
        raise ConfigError("sphere needs n1, n2 >= 2 (singular orbits must not be points)")
    N = n1 + n2 - 1
    return Profile(
        name=f"sphere:{n1},{n2}",
        dim_N=N,
        d=math.pi,
        warps=(
            Warp(Curve.analytic("cos_half"), n1 - 1),
            Warp(Curve.analytic("sin_half"), n2 - 1),
        ),
        # sin(t/2) collapses at t=0, leaving S^{n1-1}; cos(t/2) collapses at t=pi
        singular_dims=(n1 - 1, n2 - 1),
        scalar_curvature=Curve.constant(N * (N - 1)),
        orbit_labels=(
            f"S^{n1 - 1} x S^{n2 - 1}",
            f"S^{n1 - 1}",
            f"S^{n2 - 1}",
        ),
    )


def make_cpn(N_cplx: int) -> Profile:
    """Fubini-Study ``CP^N`` with warps ``sin t`` and ``sqrt((2N-2)/N) sin t cos t``."""
    if N_cplx < 3:
        raise ConfigError("CP^N profile needs N >= 3")
    n = N_cplx
    return Profile(
        name=f"cpn:{n}",
        dim_N=2 * n,
        d=math.pi / 2,
        warps=(
            Warp(Curve.analytic("sin"), 2 * n - 2),
            Warp(Curve.analytic("sin_cos", math.sqrt((2 * n - 2) / n)), 1),
        ),
        singular_dims=(0, 2 * n - 2),
        # holomorphic sectional curvature 4, Ric = 2(n+1) g
        scalar_curvature=Curve.constant(4.0 * n * (n + 1)),
        orbit_labels=(f"S^{2 * n - 1}", "point", f"CP^{n - 1}"),
    )


def make_hpn(N_quat: int) -> Profile:
    """Quaternionic projective space with warps ``sin t cos t`` and ``cos t``."""
    if N_quat < 2:
        raise ConfigError("HP^N profile needs N >= 2")
    n = N_quat
    return Profile(
        name=f"hpn:{n}",
        dim_N=4 * n,
        d=math.pi / 2,
        warps=(
            Warp(Curve.analytic("sin_cos"), 4 * n - 4),
            Warp(Curve.analytic("cos"), 3),
        ),
        singular_dims=(3, 0),
        # quaternionic sectional curvature 4, Ric = (4n+8) g
        scalar_curvature=Curve.constant(16.0 * n * (n + 2)),
        orbit_labels=(f"S^{4 * n - 1}", "S^3", "point"),
    )


def make_flat(length: float) -> Profile:
    """Interval with ``beta = 1`` and ``h = 0``; used for constant-coefficient checks."""
    if not length > 0:
        raise ConfigError("flat profile needs a positive length")
    return Profile(
        name=f"flat:{length:g}",
        dim_N=1,
        d=float(length),
        warps=(),
        singular_dims=None,
        scalar_curvature=Curve.constant(0.0),
        orbit_labels=("point", "point", "point"),
    )


def profile_from_soliton(sol: SolitonSolution) -> Profile:
    """Koiso-Cao soliton on ``CP^2 # -CP^2`` as a profile.

    ``f1 = -f2 f2'`` (multiplicity 1) and ``f2`` (multiplicity 2); the
    scalar curvature is ``4c f2'^2 + 2c f2 f2'' + 4``.
    """
    if not sol.ok:
        raise ConfigError("soliton solution did not pass its endpoint checks")
    t = sol.t_grid
    f2, f2p, f2pp = sol.f2, sol.f2p, sol.f2pp
    f1 = -f2 * f2p
    f1p = -(f2p**2) - f2 * f2pp
    # f2''' from differentiating the ODE; keeps R's interpolant Hermite-exact
    f2ppp = _soliton_third_derivative(sol.c, f2, f2p, f2pp)
    c = sol.c
    R = 4 * c * f2p**2 + 2 * c * f2 * f2pp + 4
    Rp = 8 * c * f2p * f2pp + 2 * c * (f2p * f2pp + f2 * f2ppp)
    f1[0] = f1[-1] = 0.0
    return Profile(
        name="koiso-cao",
        dim_N=4,
        d=float(sol.domain_length),
        warps=(
            Warp(Curve.sampled(t, f1, f1p), 1),
            Warp(Curve.sampled(t, f2, f2p), 2),
        ),
        singular_dims=(2, 2),
        scalar_curvature=Curve.sampled(t, R, Rp),
        orbit_labels=("S^3", "S^2", "S^2"),
    )


def _soliton_third_derivative(c, f, fp, fpp):
    # d/dt of 2 f f'' = 4 - 4 f'^2 - f^2 - c f^2 f'^2
    rhs = -8 * fp * fpp - 2 * f * fp - 2 * c * (f * fp**3 + f**2 * fp * fpp)
    return (rhs - 2 * fp * fpp) / (2 * f)


@dataclass
class ValidationReport:
    ok: bool
    failures: list[dict]
    worst_h_deviation: float
    checks: dict

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failures": self.failures,
            "worst_h_deviation": self.worst_h_deviation,
            "checks": self.checks,
        }


def _five_point_log_derivative(profile: Profile, t, step: float):
    b = profile.beta
    db = (b(t - 2 * step) - 8 * b(t - step) + 8 * b(t + step) - b(t + 2 * step)) / (12 * step)
    return db / b(t)


def validate(profile: Profile, samples: int = 200, fd_step: float = 1e-4) -> ValidationReport:
    """Check the profile invariants on a sample grid.

    Returns a report; a failing invariant is listed with its location and the
    size of the violation rather than raised.
    """
    if samples < 10:
        raise ConfigError("validate needs at least 10 samples")
    failures: list[dict] = []
    checks: dict = {}
    d = profile.d

    msum = sum(w.multiplicity for w in profile.warps)
    checks["multiplicity_sum"] = msum
    if msum != profile.dim_N - 1:
        failures.append(
            {"invariant": "multiplicity sum", "expected": profile.dim_N - 1, "got": msum}
        )

    t = np.linspace(0.05 * d, 0.95 * d, samples)
    beta = profile.beta(t)
    if np.any(beta <= 0):
        i = int(np.argmin(beta))
        failures.append({"invariant": "beta positive", "t": float(t[i]), "value": float(beta[i])})

    dev = np.abs(profile.h(t) - _five_point_log_derivative(profile, t, fd_step))
    worst = float(np.max(dev))
    checks["h_vs_log_beta"] = worst
    if worst > 1e-6:
        i = int(np.argmax(dev))
        failures.append({"invariant": "h = beta'/beta", "t": float(t[i]), "deviation": worst})

    if profile.singular_dims is not None:
        left, right = profile.singular_ends
        for side, (end, is_sing) in enumerate(((0.0, left), (d, right))):
            tag = "left" if side == 0 else "right"
            if not is_sing:
                failures.append({"invariant": "beta vanishes at singular orbit", "t": end})
                continue
            for w in profile.warps:
                val = float(w.curve(np.array([end]))[0])
                der = float(w.curve.deriv(np.array([end]))[0])
                if abs(val) < 1e-10 and abs(der) < 1e-8:
                    failures.append(
                        {"invariant": "collapsing warp has nonzero slope", "t": end}
                    )
                if abs(val) >= 1e-10 and abs(der) > 1e-6:
                    failures.append(
                        {"invariant": "surviving warp is flat", "t": end, "slope": der}
                    )
            # t h(t) -> N - n - 1 at each singular orbit
            eps = 1e-3
            tt = np.array([eps if side == 0 else d - eps])
            lim = float((eps if side == 0 else -eps) * profile.h(tt)[0])
            target = profile.dim_N - profile.singular_dims[side] - 1
            checks[f"{tag}_asymptotic"] = {"t_h": lim, "target": target}
            if abs(lim - target) > 0.05 * max(abs(target), 1):
                failures.append(
                    {"invariant": "endpoint asymptotics", "t": float(tt[0]), "got": lim,
                     "expected": target}
                )

    return ValidationReport(ok=not failures, failures=failures, worst_h_deviation=worst,
                            checks=checks)


def catalog() -> dict[str, str]:
    """Names accepted by :func:`profile_from_name` with a short description."""
    return {
        "sphere:n1,n2": "round S^N, N = n1+n2-1, O(n1)xO(n2) action, d = pi",
        "cpn:N": "Fubini-Study CP^N (N >= 3), d = pi/2",
        "hpn:N": "quaternionic projective HP^N (N >= 2), d = pi/2",
        "koiso-cao": "Koiso-Cao Kahler-Ricci soliton on CP^2 # -CP^2 (solved numerically)",
        "flat:L": "constant weight interval of length L (oracle checks)",
    }


def profile_from_name(name: str, soliton_step: float = 1e-3) -> Profile:
    kind, _, args = name.partition(":")
    try:
        if kind == "sphere":
            n1, n2 = (int(x) for x in args.split(","))
            return make_sphere(n1, n2)
        if kind == "cpn":
            return make_cpn(int(args))
        if kind == "hpn":
            return make_hpn(int(args))
        if kind == "flat":
            return make_flat(float(args))
    except ValueError as exc:
        raise ConfigError(f"bad geometry arguments in {name!r}") from exc
    if kind in ("koiso-cao", "koiso_cao"):
        from .koiso_cao import solve_soliton

        return profile_from_soliton(solve_soliton(step=soliton_step))
    raise ConfigError(f"unknown geometry {name!r}")
