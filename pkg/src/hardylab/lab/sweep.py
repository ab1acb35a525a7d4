"""Truncation sweeps: one FEM eigenproblem per window, run on a worker pool."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from logging import getLogger

import numpy as np
from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from ..analytic import ConeSpectrum, CrossSection, cone_spectrum
from ..config.schema import (
    ClassificationThresholds,
    LabConfig,
    ResolutionPolicy,
    SolverConfig,
    SweepSection,
)
from ..eig import EigResult, smallest_pair
from ..errors import DecayWindowError, DomainError, HardyLabError
from ..fem import assemble_system
from ..geometry import DomainSpec, Mesh, PotentialSpec, TruncationWindow, build_domain, generate_mesh
from .diagnostics import ConcentrationDiagnostic, Verdict, concentration, decay_fit, make_verdict

logger = getLogger(__name__)

RESULT_COLUMNS = [
    "L",
    "r_min",
    "r_max",
    "dofs",
    "mu_h",
    "residual",
    "localization_ratio",
    "max_annulus_fraction",
    "slope_near",
    "slope_far",
]


class SweepPlan(BaseModel):
    """A domain family swept over a widening truncation schedule."""

    domain: DomainSpec
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    schedule: list[TruncationWindow] = Field(min_length=1)
    resolution: ResolutionPolicy = Field(default_factory=ResolutionPolicy)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    thresholds: ClassificationThresholds = Field(default_factory=ClassificationThresholds)
    reference_window: tuple[float, float] | None = None
    workers: int = Field(default=1, ge=1)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _increasing_schedule(self):
        lengths = [w.L for w in self.schedule]
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise DomainError("truncation schedule must be strictly increasing in L")
        return self

    @classmethod
    def from_config(cls, config: LabConfig, section: SweepSection | None = None) -> SweepPlan:
        section = section or config.sweep
        return cls(
            domain=section.domain,
            potential=section.potential,
            schedule=section.schedule,
            resolution=config.resolution,
            solver=config.solver,
            thresholds=config.thresholds,
            reference_window=section.reference_window,
            workers=config.workers,
        )

    def with_domain(self, domain: DomainSpec) -> SweepPlan:
        return self.model_copy(update={"domain": domain})

    def with_potential(self, potential: PotentialSpec) -> SweepPlan:
        return self.model_copy(update={"potential": potential})

    def reference(self) -> tuple[float, float]:
        """Localization window: explicit, else a decade around the bulges."""
        if self.reference_window is not None:
            return self.reference_window
        if self.domain.bulges:
            return (
                min(b.r_a for b in self.domain.bulges) / 10.0,
                max(b.r_b for b in self.domain.bulges) * 10.0,
            )
        return (0.1, 10.0)

    def spectrum(self) -> ConeSpectrum:
        return cone_spectrum(CrossSection.arc(self.domain.theta))


@dataclass
class SweepRow:
    L: float
    r_min: float
    r_max: float
    dofs: int
    mu_h: float
    residual: float
    iterations: int
    positivity_ok: bool
    gap_ok: bool
    mu_second: float
    localization_ratio: float
    max_annulus_fraction: float
    slope_near: float = float("nan")
    slope_far: float = float("nan")

    def record(self) -> dict:
        return {k: getattr(self, k) for k in RESULT_COLUMNS}


@dataclass(eq=False)
class PointSolution:
    """Everything one sweep point produced."""

    window: TruncationWindow
    mesh: Mesh
    eig: EigResult
    u_full: np.ndarray
    diagnostic: ConcentrationDiagnostic
    row: SweepRow


@dataclass(eq=False)
class SweepResult:
    plan: SweepPlan
    points: list[PointSolution] = field(default_factory=list)
    verdict: Verdict | None = None
    error: str | None = None

    @property
    def rows(self) -> list[SweepRow]:
        return [p.row for p in self.points]

    @property
    def complete(self) -> bool:
        return self.error is None and len(self.points) == len(self.plan.schedule)

    @property
    def last(self) -> PointSolution:
        return self.points[-1]


def solve_point(plan: SweepPlan, window: TruncationWindow, spec: ConeSpectrum | None = None) -> PointSolution:
    """Mesh, assemble and solve a single truncation window."""
    spec = spec or plan.spectrum()
    domain = build_domain(plan.domain.truncated(window))
    plan.potential.check_support(domain)
    mesh = generate_mesh(domain, plan.resolution.n_radial(window), plan.resolution.n_angular)
    system = assemble_system(mesh, plan.potential)
    eig = smallest_pair(system, **plan.solver.solve_kwargs())
    u_full = system.to_full(eig.u_h)
    diag = concentration(mesh, plan.potential, u_full, plan.reference())

    try:
        near, far = decay_fit(mesh, u_full, min(eig.mu_h, spec.mu_C), spec)
        slope_near, slope_far = near.slope, far.slope
    except DecayWindowError as e:
        logger.debug(f"no decay fit at L={window.L:.3f}: {e}")
        slope_near = slope_far = float("nan")

    row = SweepRow(
        L=window.L,
        r_min=window.r_min,
        r_max=window.r_max,
        dofs=system.n,
        mu_h=eig.mu_h,
        residual=eig.rel_residual,
        iterations=eig.iterations,
        positivity_ok=eig.positivity_ok,
        gap_ok=eig.gap_ok,
        mu_second=eig.mu_second,
        localization_ratio=diag.localization_ratio,
        max_annulus_fraction=diag.max_annulus_fraction,
        slope_near=slope_near,
        slope_far=slope_far,
    )
    logger.info(
        f"L={window.L:7.3f} dofs={system.n:7d} mu_h={eig.mu_h:.8f} "
        f"ratio={diag.localization_ratio:.3f}"
    )
    return PointSolution(window, mesh, eig, u_full, diag, row)


def sweep_truncation(plan: SweepPlan, progress: bool = False) -> SweepResult:
    """Solve every window of the plan and classify the sweep.

    Points run concurrently on ``plan.workers`` threads.  A failing point
    cancels the rest; the rows solved so far are kept and flagged.
    """
    spec = plan.spectrum()
    result = SweepResult(plan)
    solved: list[PointSolution] = []
    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        futures = {pool.submit(solve_point, plan, w, spec): w for w in plan.schedule}
        for future in tqdm(
            as_completed(futures), total=len(futures), desc="sweep", disable=not progress, leave=False
        ):
            window = futures[future]
            try:
                solved.append(future.result())
            except HardyLabError as e:
                result.error = f"L={window.L:.4f}: {e}"
                logger.error(f"Sweep point failed, aborting ({result.error})")
                for f in futures:
                    f.cancel()
                break

    result.points = sorted(solved, key=lambda p: p.window.L)
    if result.points:
        last = result.last
        decay = {"slope_near": last.row.slope_near, "slope_far": last.row.slope_far}
        result.verdict = make_verdict(result.rows, spec, plan.thresholds, plan.reference(), decay)
    return result


def plot_rows(result: SweepResult) -> dict[str, list[dict]]:
    """Tabular plot data: mu against 1/L^2 and the per-decade mass histograms."""
    mu_vs_L = [{"inv_L2": 1.0 / p.row.L**2, "L": p.row.L, "mu_h": p.row.mu_h} for p in result.points]
    histograms = []
    for p in result.points:
        edges = p.diagnostic.edges
        for k, frac in enumerate(p.diagnostic.fractions):
            histograms.append(
                {"L": p.row.L, "log10_r_lo": edges[k], "log10_r_hi": edges[k + 1], "fraction": frac}
            )
    return {"mu_vs_inv_L2": mu_vs_L, "annulus_fractions": histograms}
