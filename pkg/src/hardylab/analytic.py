"""Closed-form spectral objects of the Hardy operator on cones.

For a cone C = {(r, w) : r > 0, w in D} with cross-section D on the unit
sphere S^{N-1}, separation of variables reduces -Delta - mu/|x|^2 to the
principal Dirichlet eigenpair (lambda_D, v_D) of the spherical Laplacian on
D and an Euler equidimensional equation in r.  This module computes those
objects exactly (arcs), by shooting (spherical caps) or takes lambda_D as
given (explicit cross-sections), and exposes the truncated-cone eigenpair
used as ground truth for the finite-element pipeline.

All functions here are pure and thread-safe.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from logging import getLogger
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.interpolate import CubicSpline

from .errors import DomainError, ShootingError, SupercriticalCouplingError

logger = getLogger(__name__)

Sampler = Callable[[np.ndarray], np.ndarray]

SHOOTING_TOL = 1e-10
SHOOTING_STEPS = 2000
SHOOTING_MAX_BISECTIONS = 200
_SHOOTING_START = 1e-6


class CrossSection(BaseModel):
    """Cross-section D of a cone together with the ambient dimension N.

    ``kind`` selects the representation: an arc of opening ``theta`` on S^1,
    a polar cap of half-angle ``theta0`` on S^2, or an arbitrary cross-section
    known only through its principal eigenvalue ``lambda_D``.
    """

    dimension: int = Field(default=2, ge=2, description="Ambient dimension N")
    kind: Literal["arc", "cap", "explicit"] = Field(default="arc")
    theta: float | None = Field(default=None, description="Arc opening (radians)")
    theta0: float | None = Field(default=None, description="Cap half-angle (radians)")
    lambda_D: float | None = Field(default=None, description="Explicit eigenvalue")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "arc":
            if self.theta is None or not 0.0 < self.theta < 2.0 * math.pi:
                raise DomainError("arc opening must satisfy 0 < theta < 2*pi")
            if self.dimension != 2:
                raise DomainError("an arc cross-section lives on S^1, requires N = 2")
        elif self.kind == "cap":
            if self.theta0 is None or not 0.0 < self.theta0 < math.pi:
                raise DomainError("cap half-angle must satisfy 0 < theta0 < pi")
            if self.dimension != 3:
                raise DomainError("cap cross-sections require N = 3")
        elif self.lambda_D is None or self.lambda_D <= 0.0:
            raise DomainError("explicit lambda_D must be positive")
        return self

    @classmethod
    def arc(cls, theta: float) -> CrossSection:
        return cls(dimension=2, kind="arc", theta=theta)

    @classmethod
    def cap(cls, theta0: float) -> CrossSection:
        return cls(dimension=3, kind="cap", theta0=theta0)

    @classmethod
    def explicit(cls, lambda_D: float, dimension: int) -> CrossSection:
        return cls(dimension=dimension, kind="explicit", lambda_D=lambda_D)


class Eigenpair(NamedTuple):
    lambda_D: float
    v_D: Sampler | None


@dataclass(frozen=True)
class ConeSpectrum:
    """Principal cross-section eigenvalue and the critical coupling of the cone."""

    lambda_D: float
    mu_C: float
    N: int
    v_D: Sampler | None = field(default=None, compare=False, repr=False)

    @property
    def has_sampler(self) -> bool:
        return self.v_D is not None


@dataclass(frozen=True)
class ExponentPair:
    """Roots of alpha^2 + (N-2) alpha + (mu - lambda_D) = 0, ordered."""

    alpha_plus: float
    alpha_minus: float
    discriminant: float


@dataclass(frozen=True)
class RadialProfile:
    """Radial factor of a separated solution.

    Without ``log_flag`` the profile is ``a r^alpha_+ + b r^alpha_-``.  With
    ``log_flag`` both exponents coincide (critical coupling) and the profile
    is ``r^alpha (a log r + b)``; ``a=1, b=0`` is the log companion of the
    ground state.
    """

    a: float
    b: float
    exponents: ExponentPair
    log_flag: bool = False

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        ap, am = self.exponents.alpha_plus, self.exponents.alpha_minus
        if self.log_flag:
            return r**ap * (self.a * np.log(r) + self.b)
        return self.a * r**ap + self.b * r**am

    def increment(self, r, dr):
        """Return ``u(r + dr) - u(r)`` without cancellation."""
        r = np.asarray(r, dtype=float)
        lg = np.log1p(np.asarray(dr, dtype=float) / r)
        ap, am = self.exponents.alpha_plus, self.exponents.alpha_minus
        if self.log_flag:
            base = r**ap
            return base * (
                np.expm1(ap * lg) * (self.a * np.log(r) + self.b)
                + np.exp(ap * lg) * self.a * lg
            )
        return self.a * r**ap * np.expm1(ap * lg) + self.b * r**am * np.expm1(am * lg)


class Criticality(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


class TruncatedCone(NamedTuple):
    mu_trunc: float
    u_exact: Callable[[np.ndarray, np.ndarray], np.ndarray]


def _arc_sampler(theta: float) -> Sampler:
    def v_D(phi):
        phi = np.asarray(phi, dtype=float)
        inside = (phi >= 0.0) & (phi <= theta)
        return np.where(inside, np.sin(np.pi * np.clip(phi, 0.0, theta) / theta), 0.0)

    return v_D


def _legendre_rhs(t: float, v: float, p: float, lam: float) -> tuple[float, float]:
    s = math.sin(t)
    return p / s, -lam * s * v


def _shoot(lam: float, theta0: float, n_steps: int, keep: bool = False):
    """Integrate -(sin t v')' = lam sin t v from the pole with v(0) = 1.

    Uses fixed-step RK4 in the variables (v, p = sin t v'), started from the
    regular series v = 1 - lam t^2/4 at a small offset.  Returns the first
    sign change flag and, if ``keep`` is set, the trajectory.
    """
    t = _SHOOTING_START
    v = 1.0 - lam * t * t / 4.0
    p = math.sin(t) * (-lam * t / 2.0)
    h = (theta0 - t) / n_steps
    ts = [0.0, t] if keep else None
    vs = [1.0, v] if keep else None
    crossed = False
    for _ in range(n_steps):
        k1v, k1p = _legendre_rhs(t, v, p, lam)
        k2v, k2p = _legendre_rhs(t + h / 2, v + h / 2 * k1v, p + h / 2 * k1p, lam)
        k3v, k3p = _legendre_rhs(t + h / 2, v + h / 2 * k2v, p + h / 2 * k2p, lam)
        k4v, k4p = _legendre_rhs(t + h, v + h * k3v, p + h * k3p, lam)
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        t += h
        if keep:
            ts.append(t)
            vs.append(v)
        if v <= 0.0:
            crossed = True
            if not keep:
                break
    return crossed, (np.array(ts), np.array(vs)) if keep else None


def _cap_eigenpair(theta0: float) -> Eigenpair:
    lo, hi = 0.0, 1.0
    for _ in range(64):
        crossed, _ = _shoot(hi, theta0, SHOOTING_STEPS)
        if crossed:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ShootingError(f"could not bracket the cap eigenvalue for theta0={theta0}")

    for step in range(SHOOTING_MAX_BISECTIONS):
        if hi - lo <= SHOOTING_TOL:
            break
        mid = 0.5 * (lo + hi)
        crossed, _ = _shoot(mid, theta0, SHOOTING_STEPS)
        if crossed:
            hi = mid
        else:
            lo = mid
    else:
        raise ShootingError(
            f"shooting did not converge after {SHOOTING_MAX_BISECTIONS} bisections "
            f"(bracket width {hi - lo:.3e})"
        )

    lam = 0.5 * (lo + hi)
    logger.debug(f"Cap eigenvalue for theta0={theta0:.6f}: {lam:.12f} ({step} bisections)")
    _, (ts, vs) = _shoot(lam, theta0, SHOOTING_STEPS, keep=True)
    vs = np.clip(vs, 0.0, None)
    vs[-1] = 0.0
    spline = CubicSpline(ts, vs / vs.max())

    def v_D(theta):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= 0.0) & (theta <= theta0)
        return np.where(inside, np.clip(spline(np.clip(theta, 0.0, theta0)), 0.0, None), 0.0)

    return Eigenpair(lam, v_D)


def cross_section_eigenpair(cs: CrossSection) -> Eigenpair:
    """Principal Dirichlet eigenpair of the spherical Laplacian on D.

    The eigenfunction sampler is normalized to sup-norm one and vanishes
    outside D.  Explicit cross-sections carry no sampler (``v_D`` is None).
    """
    if cs.kind == "arc":
        return Eigenpair((math.pi / cs.theta) ** 2, _arc_sampler(cs.theta))
    if cs.kind == "cap":
        return _cap_eigenpair(cs.theta0)
    return Eigenpair(float(cs.lambda_D), None)


def hardy_constant(N: int, lambda_D: float, v_D: Sampler | None = None) -> ConeSpectrum:
    """Return the cone spectrum with mu_C = (N-2)^2/4 + lambda_D."""
    if N < 2:
        raise DomainError(f"dimension must be at least 2, got {N}")
    if not lambda_D > 0.0:
        raise DomainError(f"lambda_D must be positive, got {lambda_D}")
    return ConeSpectrum(lambda_D=lambda_D, mu_C=(N - 2) ** 2 / 4.0 + lambda_D, N=N, v_D=v_D)


def cone_spectrum(cs: CrossSection) -> ConeSpectrum:
    lam, v_D = cross_section_eigenpair(cs)
    return hardy_constant(cs.dimension, lam, v_D)


def exponents(N: int, lambda_D: float, mu: float) -> ExponentPair:
    """Roots alpha_+ >= alpha_- of the indicial equation of the radial ODE."""
    b = float(N - 2)
    c = mu - lambda_D
    disc = b * b - 4.0 * c
    if disc < 0.0:
        # rounding at mu == mu_C
        if disc > -1e-12 * max(1.0, b * b, 4.0 * abs(c)):
            disc = 0.0
        else:
            raise SupercriticalCouplingError(
                f"supercritical coupling: mu={mu} exceeds (N-2)^2/4 + lambda_D = "
                f"{b * b / 4.0 + lambda_D}"
            )
    sq = math.sqrt(disc)
    q = -0.5 * (b + sq)
    if q == 0.0:
        roots = (0.0, 0.0) if sq == 0.0 else (0.5 * sq, -0.5 * sq)
    else:
        roots = (q, c / q)
    return ExponentPair(max(roots), min(roots), disc)


def separated_solution(spec: ConeSpectrum, mu: float, a: float, b: float) -> RadialProfile:
    """Radial profile ``a r^alpha_+ + b r^alpha_-`` of a separated solution."""
    if a < 0.0 or b < 0.0:
        raise DomainError("separated solutions need nonnegative coefficients a, b")
    return RadialProfile(a, b, exponents(spec.N, spec.lambda_D, mu))


def critical_log_profile(spec: ConeSpectrum, a: float = 1.0, b: float = 0.0) -> RadialProfile:
    """Profile ``r^{-(N-2)/2} (a log r + b)`` solving the ODE at mu = mu_C."""
    return RadialProfile(a, b, exponents(spec.N, spec.lambda_D, spec.mu_C), log_flag=True)


def euler_residual(profile: RadialProfile, spec: ConeSpectrum, mu: float, r: float) -> float:
    """Central-difference residual of -u'' - (N-1)/r u' - (mu - lambda_D)/r^2 u."""
    if not r > 0.0:
        raise DomainError("euler_residual needs r > 0")
    h = r * 1e-5
    up = profile.increment(r, h)
    um = profile.increment(r, -h)
    u = profile(r)
    d2 = (up + um) / (h * h)
    d1 = (up - um) / (2.0 * h)
    return float(-d2 - (spec.N - 1) / r * d1 - (mu - spec.lambda_D) / (r * r) * u)


def truncated_cone_mu(spec: ConeSpectrum, r_min: float, r_max: float) -> TruncatedCone:
    """Principal Dirichlet eigenpair of the cone truncated to r_min < r < r_max.

    With L = log(r_max/r_min) and s = log(r/r_min) the substitution
    u = r^{-(N-2)/2} w(s) v_D reduces the problem to -w'' = (mu - mu_C) w on
    (0, L), hence mu_trunc = mu_C + (pi/L)^2.
    """
    if not 0.0 < r_min < r_max:
        raise DomainError(f"truncation needs 0 < r_min < r_max, got ({r_min}, {r_max})")
    L = math.log(r_max / r_min)
    beta = -(spec.N - 2) / 2.0

    def u_exact(r, omega):
        if spec.v_D is None:
            raise DomainError("cross-section eigenfunction unavailable for explicit lambda_D")
        r = np.asarray(r, dtype=float)
        s = np.log(r / r_min)
        radial = r**beta * np.sin(np.pi * np.clip(s, 0.0, L) / L)
        return radial * spec.v_D(omega)

    return TruncatedCone(spec.mu_C + (math.pi / L) ** 2, u_exact)


def classify_coupling(spec: ConeSpectrum, mu: float, rtol: float = 1e-12) -> Criticality:
    """Criticality of -Delta - mu/|x|^2 on the (untruncated) cone."""
    if abs(mu - spec.mu_C) <= rtol * max(1.0, spec.mu_C):
        return Criticality.CRITICAL
    return Criticality.SUBCRITICAL if mu < spec.mu_C else Criticality.SUPERCRITICAL


def solution_cone_dimension(spec: ConeSpectrum, mu: float) -> int:
    """Dimension of the cone of positive separated solutions vanishing on the
    lateral boundary: two independent powers below mu_C, one at mu_C, none
    above."""
    return {
        Criticality.SUBCRITICAL: 2,
        Criticality.CRITICAL: 1,
        Criticality.SUPERCRITICAL: 0,
    }[classify_coupling(spec, mu)]


def wider_cone_comparison(cs: CrossSection, cs1: CrossSection) -> tuple[ConeSpectrum, ConeSpectrum]:
    """Spectra of nested cones C with D and C1 with D1 containing D strictly.

    Enlarging the cross-section strictly lowers lambda_D and therefore mu_C.
    """
    if cs.dimension != cs1.dimension or cs.kind != cs1.kind:
        raise DomainError("nested cones must share dimension and cross-section kind")
    nested = {
        "arc": lambda: cs1.theta > cs.theta,
        "cap": lambda: cs1.theta0 > cs.theta0,
        "explicit": lambda: cs1.lambda_D < cs.lambda_D,
    }[cs.kind]()
    if not nested:
        raise DomainError("the second cross-section must strictly contain the first")
    spec, spec1 = cone_spectrum(cs), cone_spectrum(cs1)
    if not spec1.lambda_D < spec.lambda_D:
        raise ShootingError("cross-section eigenvalues are not strictly ordered")
    return spec, spec1
