"""Concentration, decay and extrapolation diagnostics of discrete minimizers.

A minimizer attached to a compact perturbation keeps its V-weighted mass
near the perturbation as the truncation widens; the truncated pure-cone
eigenfunction spreads it uniformly over log r.  The verdict below turns that
dichotomy into a pure function of the recorded diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from logging import getLogger

import numpy as np
from scipy import stats

from ..analytic import ConeSpectrum, exponents
from ..config.schema import ClassificationThresholds
from ..errors import DecayWindowError
from ..fem import element_vmass
from ..geometry import Mesh, PotentialSpec

logger = getLogger(__name__)

MIN_DECAY_SAMPLES = 5
BOUNDARY_DECADES = 2.0


class Classification(str, Enum):
    LOCALIZED = "localized-minimizer"
    SPREADING = "spreading-nonattained"
    INCONCLUSIVE = "inconclusive"


class Trend(str, Enum):
    INCREASING = "increasing"
    FLAT = "flat"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class ConcentrationDiagnostic:
    """V-mass fractions per decade annulus and inside a reference window."""

    edges: np.ndarray
    fractions: np.ndarray
    localization_ratio: float
    max_annulus_fraction: float
    reference_window: tuple[float, float]

    @property
    def decades(self) -> float:
        return float(self.edges[-1] - self.edges[0])


def element_centroid_radii(mesh: Mesh) -> np.ndarray:
    c = mesh.vertices[mesh.triangles].mean(axis=1)
    return np.hypot(c[:, 0], c[:, 1])


def concentration(
    mesh: Mesh, pot: PotentialSpec, u_full: np.ndarray, reference_window: tuple[float, float]
) -> ConcentrationDiagnostic:
    """Split int V u^2 over decade annuli by element centroid."""
    mass = element_vmass(mesh, pot, u_full)
    mass = np.clip(mass, 0.0, None)
    total = mass.sum()
    log_r = np.log10(element_centroid_radii(mesh))
    r = mesh.polar[:, 0]
    lo, hi = math.log10(r.min()), math.log10(r.max())
    edges = np.arange(math.floor(lo + 1e-9), math.ceil(hi - 1e-9) + 1, dtype=float)
    edges[0], edges[-1] = min(edges[0], lo), max(edges[-1], hi)
    per_annulus, _ = np.histogram(np.clip(log_r, edges[0], edges[-1]), bins=edges, weights=mass)
    fractions = per_annulus / total
    a, b = reference_window
    inside = (log_r >= math.log10(a)) & (log_r <= math.log10(b))
    return ConcentrationDiagnostic(
        edges=edges,
        fractions=fractions,
        localization_ratio=float(mass[inside].sum() / total),
        max_annulus_fraction=float(fractions.max()),
        reference_window=(float(a), float(b)),
    )


@dataclass(frozen=True)
class DecayFit:
    """Least-squares slope of log u against log r on one radial window."""

    region: str
    window: tuple[float, float]
    slope: float
    stderr: float
    predicted: float
    n_samples: int

    @property
    def deviation(self) -> float:
        if abs(self.predicted) > 1e-12:
            return abs(self.slope - self.predicted) / abs(self.predicted)
        return abs(self.slope - self.predicted)

    def to_dict(self) -> dict:
        return {**asdict(self), "deviation": self.deviation}


def mid_ray(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Cone vertices on the angular grid line closest to theta / 2, by radius."""
    cone = slice(0, mesh.n_cone_vertices)
    phi = mesh.polar[cone, 1]
    j = np.argmin(np.abs(phi - 0.5 * mesh.theta))
    on_ray = np.flatnonzero(np.isclose(phi, phi[j], rtol=0.0, atol=1e-12))
    order = np.argsort(mesh.polar[on_ray, 0])
    return on_ray[order], mesh.polar[on_ray[order], 0]


def default_decay_windows(mesh: Mesh) -> tuple[tuple[float, float], tuple[float, float]]:
    """Near and far windows clear of the bulge bands and the truncation ends."""
    r = mesh.polar[:, 0]
    margin = 10.0**BOUNDARY_DECADES
    r_lo, r_hi = r.min() * margin, r.max() / margin
    if mesh.bands:
        radii = mesh.polar[: mesh.n_cone_vertices, 0]
        n_cols = mesh.grading.n_angular + 1
        layer_r = radii[::n_cols]
        inner = min(layer_r[b.i_a] for b in mesh.bands)
        outer = max(layer_r[b.i_b] for b in mesh.bands)
    else:
        inner = outer = math.sqrt(r.min() * r.max())
    return (r_lo, inner), (outer, r_hi)


def fit_slope(
    r: np.ndarray,
    u: np.ndarray,
    window: tuple[float, float],
    region: str,
    predicted: float,
    envelope=None,
) -> DecayFit:
    lo, hi = window
    keep = (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12)) & (u > 0.0)
    if envelope is not None:
        keep &= envelope(r) > 0.0
    if keep.sum() < MIN_DECAY_SAMPLES:
        raise DecayWindowError(
            f"{region} window ({lo:.3g}, {hi:.3g}) holds {int(keep.sum())} samples, "
            f"need at least {MIN_DECAY_SAMPLES}"
        )
    y = np.log(u[keep])
    if envelope is not None:
        y = y - np.log(envelope(r[keep]))
    fit = stats.linregress(np.log(r[keep]), y)
    if not np.isfinite(fit.slope):
        raise DecayWindowError(f"{region} fit produced a non-finite slope")
    return DecayFit(
        region=region,
        window=(float(lo), float(hi)),
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        predicted=float(predicted),
        n_samples=int(keep.sum()),
    )


def decay_fit(
    mesh: Mesh,
    u: np.ndarray,
    mu_limit: float,
    spec: ConeSpectrum,
    windows: tuple[tuple[float, float], tuple[float, float]] | None = None,
    envelope: str = "none",
) -> tuple[DecayFit, DecayFit]:
    """Fit near and far power laws of u along the mid ray.

    The near slope is compared with alpha_+(mu_limit), the far slope with
    alpha_-(mu_limit).  ``envelope="sine"`` divides out sin(pi s / L) of the
    truncated cone before fitting.
    """
    idx, r = mid_ray(mesh)
    values = np.asarray(u, dtype=float)[idx]
    near_w, far_w = windows or default_decay_windows(mesh)
    pair = exponents(spec.N, spec.lambda_D, min(mu_limit, spec.mu_C))

    env = None
    if envelope == "sine":
        r_min, r_max = mesh.polar[:, 0].min(), mesh.polar[:, 0].max()
        L = math.log(r_max / r_min)
        env = lambda rr: np.sin(np.pi * np.log(rr / r_min) / L)  # noqa: E731

    near = fit_slope(r, values, near_w, "near", pair.alpha_plus, env)
    far = fit_slope(r, values, far_w, "far", pair.alpha_minus, env)
    logger.debug(
        f"decay slopes near={near.slope:.4f} (alpha+={near.predicted:.4f}), "
        f"far={far.slope:.4f} (alpha-={far.predicted:.4f})"
    )
    return near, far


@dataclass(frozen=True)
class Extrapolation:
    mu_inf: float
    c: float
    mu_inf_stderr: float


def extrapolate(L: np.ndarray, mu: np.ndarray) -> Extrapolation:
    """Least-squares fit of mu(L) = mu_inf + c / L^2."""
    L = np.asarray(L, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if len(L) < 2:
        return Extrapolation(float(mu[-1]), float("nan"), float("nan"))
    A = np.column_stack([np.ones_like(L), 1.0 / L**2])
    coef, _, _, _ = np.linalg.lstsq(A, mu, rcond=None)
    stderr = float("nan")
    dof = len(L) - 2
    if dof > 0:
        resid = mu - A @ coef
        cov = np.linalg.inv(A.T @ A) * (resid @ resid) / dof
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    return Extrapolation(float(coef[0]), float(coef[1]), stderr)


def cone_window_fraction(r_min: float, r_max: float, window: tuple[float, float]) -> float:
    """V-mass fraction of the truncated pure-cone eigenfunction inside ``window``.

    In s = log r the V-weighted density is sin^2(pi (s - s_min) / L) in every
    dimension, so the fraction has a closed form.
    """
    L = math.log(r_max / r_min)
    ta, tb = (np.clip(np.log(np.asarray(window, dtype=float) / r_min) / L, 0.0, 1.0)).tolist()
    return float((tb - ta) - (math.sin(2 * math.pi * tb) - math.sin(2 * math.pi * ta)) / (2 * math.pi))


def localization_trend(values, tolerance: float) -> Trend:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return Trend.FLAT
    steps = np.diff(values)
    total = values[-1] - values[0]
    if total > tolerance and np.all(steps >= -tolerance):
        return Trend.INCREASING
    if total < -tolerance:
        return Trend.DECREASING
    return Trend.FLAT


def wider_than(rows, reference: tuple[float, float]) -> list:
    """Rows whose truncation strictly contains the reference window."""
    a, b = reference
    return [row for row in rows if row.r_min < a * (1 - 1e-9) and row.r_max > b * (1 + 1e-9)]


@dataclass
class Verdict:
    """Summary of one truncation sweep.

    ``localization_trend`` is the trend of the excess of the window ratio over
    the pure-cone value, taken over truncations strictly wider than the
    reference window.
    """

    mu_extrapolated: float
    c_fit: float
    mu_extrapolated_stderr: float
    mu_C: float
    gap_vs_muC: float
    gap_certified: bool
    localization_trend: Trend
    final_localization_ratio: float
    final_cone_ratio: float
    final_max_annulus_fraction: float
    decades: float
    classification: Classification
    trend_points: int = 0
    decay: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["localization_trend"] = self.localization_trend.value
        d["classification"] = self.classification.value
        return d


def classify(
    ratio: float,
    max_fraction: float,
    decades: float,
    trend: Trend,
    relative_gap: float,
    thresholds: ClassificationThresholds,
) -> Classification:
    """Localized if the extrapolated mu sits clearly below mu_C and the excess
    over the cone is not falling, or if the reference window holds at least
    ``localized_ratio`` of the mass with a rising excess.  Spreading if there
    is no such gap, the excess is not rising and no decade holds more than
    ``spreading_factor / decades``.  Values within the margin of a threshold
    are inconclusive.
    """
    margin = thresholds.inconclusive_margin
    loc = thresholds.localized_ratio
    bound = thresholds.spreading_factor / max(decades, 1e-12)
    gap_certified = relative_gap > thresholds.gap_margin

    near_loc = abs(ratio - loc) <= margin * loc
    near_spread = abs(max_fraction - bound) <= margin * bound
    if gap_certified and trend is not Trend.DECREASING:
        return Classification.LOCALIZED
    if ratio >= loc and not near_loc and trend is Trend.INCREASING:
        return Classification.LOCALIZED
    if not gap_certified and trend is not Trend.INCREASING and max_fraction <= bound and not near_spread:
        return Classification.SPREADING
    return Classification.INCONCLUSIVE


def make_verdict(
    rows,
    spec: ConeSpectrum,
    thresholds: ClassificationThresholds,
    reference: tuple[float, float],
    decay: dict | None = None,
) -> Verdict:
    """Build the verdict from sweep rows sorted by L."""
    L = np.array([row.L for row in rows])
    mu = np.array([row.mu_h for row in rows])
    ext = extrapolate(L, mu)
    last = rows[-1]
    wide = wider_than(rows, reference)
    if len(wide) < 2:
        logger.warning(
            f"fewer than two truncations wider than the reference window {reference}, "
            "trend taken over the whole sweep"
        )
        wide = list(rows)
    excess = [row.localization_ratio - cone_window_fraction(row.r_min, row.r_max, reference) for row in wide]
    trend = localization_trend(excess, thresholds.trend_tolerance)
    decades = last.L / math.log(10.0)
    relative_gap = (spec.mu_C - ext.mu_inf) / spec.mu_C
    verdict = Verdict(
        mu_extrapolated=ext.mu_inf,
        c_fit=ext.c,
        mu_extrapolated_stderr=ext.mu_inf_stderr,
        mu_C=spec.mu_C,
        gap_vs_muC=spec.mu_C - ext.mu_inf,
        gap_certified=relative_gap > thresholds.gap_margin,
        localization_trend=trend,
        final_localization_ratio=last.localization_ratio,
        final_cone_ratio=cone_window_fraction(last.r_min, last.r_max, reference),
        final_max_annulus_fraction=last.max_annulus_fraction,
        decades=decades,
        classification=classify(
            last.localization_ratio, last.max_annulus_fraction, decades, trend, relative_gap, thresholds
        ),
        trend_points=len(wide),
        decay=decay or {},
    )
    logger.info(
        f"verdict: {verdict.classification.value} (mu_inf={ext.mu_inf:.6f}, "
        f"mu_C={spec.mu_C:.6f}, ratio={last.localization_ratio:.3f}, "
        f"cone ratio={verdict.final_cone_ratio:.3f}, trend={trend.value})"
    )
    return verdict
