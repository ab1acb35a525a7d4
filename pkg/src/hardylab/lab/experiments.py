"""Experiments built on truncation sweeps.

Each function returns a report dataclass.  Expected inequalities are
asserted by raising :class:`ExperimentAssertionError`, which carries the
report so callers can still write partial results.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from logging import getLogger

from ..analytic import CrossSection, cone_spectrum, truncated_cone_mu, wider_cone_comparison
from ..config.schema import MonoSection, ResolutionPolicy, SolverConfig
from ..eig import smallest_pair
from ..errors import ExperimentAssertionError, HardyLabError
from ..fem import assemble_system, interpolate, rayleigh_quotient
from ..geometry import (
    Bulge,
    DomainSpec,
    PotentialSpec,
    TruncationWindow,
    build_domain,
    generate_mesh,
    refine_mesh,
)
from .diagnostics import Classification, DecayFit, Verdict, decay_fit
from .sweep import SweepPlan, SweepResult, solve_point, sweep_truncation

logger = getLogger(__name__)


def _fail(report, message: str):
    logger.error(message)
    err = ExperimentAssertionError(message)
    err.report = report
    raise err


def _require_complete(result: SweepResult, report, label: str) -> None:
    if not result.complete:
        _fail(report, f"{label} sweep incomplete: {result.error}")


@dataclass(eq=False)
class GapReport:
    cone: SweepResult
    perturbed: SweepResult
    gaps: list[float] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict | None:
        return self.perturbed.verdict

    @property
    def mu_inf_gap(self) -> float:
        return self.perturbed.verdict.gap_vs_muC if self.perturbed.verdict else float("nan")

    def to_dict(self) -> dict:
        return {
            "gaps": self.gaps,
            "mu_inf_gap": self.mu_inf_gap,
            "cone": self.cone.verdict.to_dict() if self.cone.verdict else None,
            "perturbed": self.perturbed.verdict.to_dict() if self.perturbed.verdict else None,
        }


def gap_experiment(cone: DomainSpec, bulge: Bulge | None, plan: SweepPlan) -> GapReport:
    """Paired sweeps with and without the bulge on compatible meshes.

    Asserts mu_h(C u B) < mu_h(C) at every window and mu_inf(C u B) < mu_C.
    An empty bulge reproduces the pure-cone sweep with zero gap.
    """
    bare = cone.without_bulges()
    bulges = [bulge] if bulge is not None else []
    perturbed_plan = plan.with_domain(bare.with_bulges(bulges))
    cone_plan = plan.with_domain(bare).model_copy(
        update={"reference_window": perturbed_plan.reference()}
    )

    cone_result = sweep_truncation(cone_plan)
    if bulge is None:
        report = GapReport(cone_result, cone_result, [0.0] * len(cone_result.points))
        _require_complete(cone_result, report, "cone")
        return report

    perturbed = sweep_truncation(perturbed_plan)
    report = GapReport(cone_result, perturbed)
    _require_complete(cone_result, report, "cone")
    _require_complete(perturbed, report, "perturbed")

    report.gaps = [c.mu_h - p.mu_h for c, p in zip(cone_result.rows, perturbed.rows)]
    for row, gap in zip(perturbed.rows, report.gaps):
        if not gap > 0.0:
            _fail(report, f"no strict gap at L={row.L:.4f}: mu_h(C)-mu_h(CuB)={gap:.3e}")
    if not perturbed.verdict.mu_extrapolated < perturbed.verdict.mu_C:
        _fail(
            report,
            f"extrapolated mu_inf={perturbed.verdict.mu_extrapolated:.6f} is not below "
            f"mu_C={perturbed.verdict.mu_C:.6f}",
        )
    logger.info(f"strict gap at every window, mu_C - mu_inf = {report.mu_inf_gap:.6f}")
    return report


@dataclass(eq=False)
class DecayReport:
    sweep: SweepResult
    near: DecayFit
    far: DecayFit

    def to_dict(self) -> dict:
        return {
            "near": self.near.to_dict(),
            "far": self.far.to_dict(),
            "verdict": self.sweep.verdict.to_dict(),
        }


def decay_experiment(plan: SweepPlan, envelope: str = "none") -> DecayReport:
    """Sweep, then fit near/far power laws of the widest minimizer against
    the exponents at the extrapolated mu_inf."""
    result = sweep_truncation(plan)
    if not result.points:
        raise HardyLabError(f"decay sweep produced no points: {result.error}")
    last = result.last
    near, far = decay_fit(
        last.mesh, last.u_full, result.verdict.mu_extrapolated, plan.spectrum(), envelope=envelope
    )
    report = DecayReport(result, near, far)
    if not result.complete:
        _fail(report, f"decay sweep incomplete: {result.error}")
    return report


@dataclass(eq=False)
class ProbeReport:
    extra_angles: list[float]
    results: list[SweepResult]
    crossover: int | None
    monotone: bool

    @property
    def verdicts(self) -> list[Verdict]:
        return [r.verdict for r in self.results if r.verdict is not None]

    def to_dict(self) -> dict:
        return {
            "extra_angles": self.extra_angles,
            "classifications": [v.classification.value for v in self.verdicts],
            "mu_extrapolated": [v.mu_extrapolated for v in self.verdicts],
            "crossover": self.crossover,
            "monotone": self.monotone,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def nonattainment_probe(
    cone: DomainSpec,
    bulges: list[Bulge],
    potential: PotentialSpec,
    plan: SweepPlan,
) -> ProbeReport:
    """One sweep per bulge of a shrinking sequence under V = 1/|x|^2 - W.

    The crossover index (first spreading verdict) is reported, not asserted;
    a localized verdict after the first spreading one breaks monotonicity.
    """
    bare = cone.without_bulges()
    results = []
    for j, bulge in enumerate(bulges):
        logger.info(f"probe {j}: extra_angle={bulge.extra_angle:.6f}")
        sub = plan.with_domain(bare.with_bulges([bulge])).with_potential(potential)
        result = sweep_truncation(sub)
        if not result.complete:
            report = ProbeReport([b.extra_angle for b in bulges[: j + 1]], results + [result], None, False)
            _fail(report, f"probe sweep {j} incomplete: {result.error}")
        results.append(result)

    labels = [r.verdict.classification for r in results]
    spreading = [j for j, c in enumerate(labels) if c is Classification.SPREADING]
    crossover = spreading[0] if spreading else None
    monotone = crossover is None or all(
        c is not Classification.LOCALIZED for c in labels[crossover:]
    )
    if crossover is not None:
        logger.info(f"crossover at index {crossover} (extra_angle={bulges[crossover].extra_angle:.6f})")
    if not monotone:
        logger.warning("localized verdict after the first spreading verdict")
    return ProbeReport([b.extra_angle for b in bulges], results, crossover, monotone)


@dataclass
class BumpRow:
    fraction: float
    angle: float
    L: float
    mu_B: float
    mu_X: float
    mu_sector_exact: float


@dataclass(eq=False)
class BumpSearchReport:
    theta_X: float
    rows: list[BumpRow]

    def to_dict(self) -> dict:
        return {"theta_X": self.theta_X, "rows": [asdict(r) for r in self.rows]}


def bump_search(
    theta_X: float,
    angle_fractions: list[float],
    schedule: list[TruncationWindow],
    plan: SweepPlan,
) -> BumpSearchReport:
    """mu_B of growing truncated sectors B of X, each taken as the whole domain.

    Asserts mu_B >= mu_X (1 - tol) and a non-increasing trend toward
    mu_X = (pi / theta_X)^2.
    """
    mu_X = cone_spectrum(CrossSection.arc(theta_X)).mu_C
    tol = plan.solver.tol
    rows = []
    for fraction, window in zip(angle_fractions, schedule):
        angle = fraction * theta_X
        sector = plan.with_domain(DomainSpec(theta=angle, theta_X=theta_X))
        point = solve_point(sector, window)
        exact = truncated_cone_mu(sector.spectrum(), window.r_min, window.r_max).mu_trunc
        rows.append(BumpRow(fraction, angle, window.L, point.eig.mu_h, mu_X, exact))
        logger.info(f"bump angle={angle:.4f} L={window.L:.3f}: mu_B={point.eig.mu_h:.6f}")

    report = BumpSearchReport(theta_X, rows)
    for row in rows:
        if row.mu_B < mu_X * (1.0 - tol):
            _fail(report, f"mu_B={row.mu_B:.8f} below mu_X={mu_X:.8f}")
    for a, b in zip(rows, rows[1:]):
        if b.mu_B > a.mu_B * (1.0 + tol):
            _fail(report, f"mu_B increased from {a.mu_B:.8f} to {b.mu_B:.8f}")
    return report


@dataclass
class MonoChain:
    name: str
    labels: list[str]
    values: list[float]
    direction: str
    strict: bool = False
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(eq=False)
class MonoReport:
    chains: list[MonoChain]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.chains)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "chains": [asdict(c) for c in self.chains]}


def _check_chain(chain: MonoChain, slack: float) -> MonoChain:
    for (la, a), (lb, b) in zip(zip(chain.labels, chain.values), zip(chain.labels[1:], chain.values[1:])):
        if chain.direction == "decreasing":
            bad = b >= a if chain.strict else b > a * (1.0 + slack)
        else:
            bad = b < a * (1.0 - slack)
        if bad:
            chain.violations.append(f"{la} -> {lb}: {a:.12g} -> {b:.12g}")
    return chain


def _mu_h(mesh, potential: PotentialSpec, solver: SolverConfig) -> float:
    return smallest_pair(assemble_system(mesh, potential), **solver.solve_kwargs()).mu_h


def monotonicity_suite(
    section: MonoSection, solver: SolverConfig, resolution: ResolutionPolicy | None = None
) -> MonoReport:
    """Domain, mesh and potential monotonicity of mu_h on nested configurations.

    Bulge widths are whole multiples of the angular cell so each bulge mesh
    contains the smaller ones as sub-complexes.
    """
    window = section.window
    resolution = resolution or ResolutionPolicy()
    n_radial = resolution.n_radial(window)
    n_angular = resolution.n_angular
    dphi = section.theta / n_angular
    base = DomainSpec(theta=section.theta, theta_X=section.theta_X).truncated(window)
    hardy = PotentialSpec()
    slack = 10.0 * solver.tol

    labels, values = [], []
    for cols in section.extra_angle_columns:
        bulge = Bulge(r_a=section.band[0], r_b=section.band[1], extra_angle=cols * dphi)
        mesh = generate_mesh(base.with_bulges([bulge]), n_radial, n_angular)
        labels.append(f"extra={cols}*dphi")
        values.append(_mu_h(mesh, hardy, solver))
    domain_chain = _check_chain(MonoChain("domain", labels, values, "decreasing", strict=True), slack)

    mesh = generate_mesh(base, max(2, n_radial // 2), max(2, n_angular // 2))
    labels, values = ["level 0"], [_mu_h(mesh, hardy, solver)]
    for level in range(1, section.refinements + 1):
        mesh = refine_mesh(mesh)
        labels.append(f"level {level}")
        values.append(_mu_h(mesh, hardy, solver))
    mesh_chain = _check_chain(MonoChain("refinement", labels, values, "decreasing"), slack)

    mesh = generate_mesh(base, n_radial, n_angular)
    labels, values = [], []
    for amplitude in sorted(section.amplitudes):
        pot = PotentialSpec(w_bumps=[section.w_bump]).with_amplitude(amplitude)
        pot.check_support(base)
        labels.append(f"w0={amplitude:g}")
        values.append(_mu_h(mesh, pot, solver))
    potential_chain = _check_chain(MonoChain("potential", labels, values, "increasing"), slack)

    report = MonoReport([domain_chain, mesh_chain, potential_chain])
    for chain in report.chains:
        logger.info(f"{chain.name} chain: {'ok' if chain.ok else 'VIOLATED'} {chain.values}")
    if not report.ok:
        offending = "; ".join(f"{c.name}: {v}" for c in report.chains for v in c.violations)
        _fail(report, f"monotonicity violated ({offending})")
    return report


@dataclass(eq=False)
class WideConeReport:
    mu_C: float
    mu_C1: float
    sweep: SweepResult

    def to_dict(self) -> dict:
        return {"mu_C": self.mu_C, "mu_C1": self.mu_C1, "verdict": self.sweep.verdict.to_dict()}


def wider_cone_experiment(theta: float, theta1: float, plan: SweepPlan) -> WideConeReport:
    """Replace the compact bulge by a wider cone C1 and sweep it.

    The perturbation is not relatively compact, so no minimizer appears:
    the verdict is spreading with mu_inf near mu_C1 < mu_C.
    """
    spec, spec1 = wider_cone_comparison(CrossSection.arc(theta), CrossSection.arc(theta1))
    result = sweep_truncation(plan.with_domain(DomainSpec(theta=theta1, theta_X=max(theta1, plan.domain.theta_X))))
    report = WideConeReport(spec.mu_C, spec1.mu_C, result)
    if not result.complete:
        _fail(report, f"wide-cone sweep incomplete: {result.error}")
    return report


@dataclass
class ConvergenceRow:
    level: int
    n_radial: int
    n_angular: int
    dofs: int
    mu_h: float
    error: float
    ratio: float
    eigvec_error: float


@dataclass(eq=False)
class ConvergenceReport:
    mu_exact: float
    rows: list[ConvergenceRow]

    def to_dict(self) -> dict:
        return {"mu_exact": self.mu_exact, "rows": [asdict(r) for r in self.rows]}


def convergence_study(
    theta: float,
    window: TruncationWindow,
    n_radial: int,
    n_angular: int,
    levels: int,
    solver: SolverConfig,
) -> ConvergenceReport:
    """FEM error on the pure truncated sector under uniform doubling.

    Meshes are regenerated at each level so vertices stay on the arcs.  The
    eigenvector error is the relative V-weighted distance to the best
    multiple of the exact eigenfunction's interpolant.
    """
    spec = cone_spectrum(CrossSection.arc(theta))
    exact = truncated_cone_mu(spec, window.r_min, window.r_max)
    domain = build_domain(DomainSpec(theta=theta, theta_X=max(theta, math.pi)).truncated(window))
    pot = PotentialSpec()

    rows: list[ConvergenceRow] = []
    for level in range(levels):
        nr, na = n_radial * 2**level, n_angular * 2**level
        mesh = generate_mesh(domain, nr, na)
        system = assemble_system(mesh, pot)
        eig = smallest_pair(system, **solver.solve_kwargs())
        u_ex = system.to_free(interpolate(mesh, exact.u_exact))
        M = system.M_V
        scale = float(u_ex @ (M @ eig.u_h)) / M.quad(u_ex)
        diff = eig.u_h - scale * u_ex
        eigvec_error = math.sqrt(M.quad(diff) / M.quad(scale * u_ex))
        error = eig.mu_h - exact.mu_trunc
        ratio = rows[-1].error / error if rows and error != 0.0 else float("nan")
        rows.append(ConvergenceRow(level, nr, na, system.n, eig.mu_h, error, ratio, eigvec_error))
        logger.info(
            f"level {level}: dofs={system.n} mu_h={eig.mu_h:.10f} error={error:.3e} ratio={ratio:.3f}"
        )
        # pipeline consistency
        rq = rayleigh_quotient(system, eig.u_h)
        if abs(rq - eig.mu_h) > 1e-10 * eig.mu_h:
            logger.warning(f"Rayleigh quotient {rq:.15g} differs from mu_h {eig.mu_h:.15g}")
    return ConvergenceReport(exact.mu_trunc, rows)


def probe_bulges(band: tuple[float, float], extra_angles: list[float]) -> list[Bulge]:
    return [Bulge(r_a=band[0], r_b=band[1], extra_angle=a) for a in extra_angles]
