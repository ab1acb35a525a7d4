from __future__ import annotations

from abc import ABC, abstractmethod
from logging import getLogger
from pathlib import Path

from rich.table import Table

from ..config.schema import LabConfig
from .experiments import (
    _require_complete,
    bump_search,
    convergence_study,
    decay_experiment,
    gap_experiment,
    monotonicity_suite,
    nonattainment_probe,
    probe_bulges,
    wider_cone_experiment,
)
from .output import write_json, write_sweep_outputs, write_table
from .sweep import SweepPlan, sweep_truncation

logger = getLogger(__name__)


class Experiment(ABC):
    """Abstract base class for all lab experiments.

    **Methods:**

    - :meth:`run`: Run the experiment.
    - :meth:`return_data`: Return the results as a JSON-ready dict.
    - :meth:`pretty_print`: Render a summary table.
    - :meth:`write`: Write result files into an output directory.
    """

    name = "experiment"

    def __init__(self, config: LabConfig):
        self.config = config
        self.report = None

    @abstractmethod
    def run(self):
        """Run the experiment and keep its report.

        **Raises:**

        - :class:`ExperimentAssertionError`: If an expected inequality fails.
        """

    @abstractmethod
    def return_data(self) -> dict:
        """Return the gathered results."""

    @abstractmethod
    def write(self, out: Path) -> Path:
        """Write result files into ``out``."""

    def pretty_print(self) -> Table:
        table = Table(title=f"{self.name} results")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="magenta")
        for key, value in self.summary().items():
            table.add_row(key, f"{value:.8g}" if isinstance(value, float) else str(value))
        return table

    def summary(self) -> dict:
        return {}

    def adopt(self, report) -> None:
        """Keep a partial report carried by an assertion failure."""
        self.report = report


def _verdict_summary(verdict) -> dict:
    if verdict is None:
        return {"classification": "none"}
    return {
        "classification": verdict.classification.value,
        "mu_extrapolated": verdict.mu_extrapolated,
        "mu_C": verdict.mu_C,
        "gap_vs_muC": verdict.gap_vs_muC,
        "localization_ratio": verdict.final_localization_ratio,
        "cone_ratio": verdict.final_cone_ratio,
        "gap_certified": verdict.gap_certified,
        "max_annulus_fraction": verdict.final_max_annulus_fraction,
        "trend": verdict.localization_trend.value,
    }


class SweepExperiment(Experiment):
    name = "sweep"

    def run(self):
        self.report = sweep_truncation(SweepPlan.from_config(self.config), progress=True)
        _require_complete(self.report, self.report, "truncation")
        return self.report

    def return_data(self) -> dict:
        data = self.report.verdict.to_dict() if self.report.verdict else {}
        return {**data, "complete": self.report.complete, "error": self.report.error}

    def summary(self) -> dict:
        return _verdict_summary(self.report.verdict)

    def write(self, out: Path) -> Path:
        return write_sweep_outputs(out, [self.report], self.return_data())


class GapExperiment(Experiment):
    name = "gap"

    def run(self):
        section = self.config.gap
        plan = SweepPlan.from_config(self.config, section)
        self.report = gap_experiment(section.domain, section.bulge, plan)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        return {**_verdict_summary(self.report.verdict), "min_gap": min(self.report.gaps, default=0.0)}

    def write(self, out: Path) -> Path:
        results, labels = [self.report.cone], ["cone"]
        if self.report.perturbed is not self.report.cone:
            results.append(self.report.perturbed)
            labels.append("perturbed")
        return write_sweep_outputs(out, results, self.return_data(), labels)


class DecayExperiment(Experiment):
    name = "decay"

    def run(self):
        section = self.config.decay
        plan = SweepPlan.from_config(self.config, section)
        self.report = decay_experiment(plan, envelope=section.envelope)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        return {
            **_verdict_summary(self.report.sweep.verdict),
            "slope_near": self.report.near.slope,
            "alpha_plus": self.report.near.predicted,
            "slope_far": self.report.far.slope,
            "alpha_minus": self.report.far.predicted,
        }

    def write(self, out: Path) -> Path:
        return write_sweep_outputs(out, [self.report.sweep], self.return_data())


class ProbeExperiment(Experiment):
    name = "probe"

    def run(self):
        section = self.config.probe
        plan = SweepPlan.from_config(self.config, section)
        potential = section.potential.model_copy(
            update={"w_bumps": [*section.potential.w_bumps, section.w_bump]}
        )
        bulges = probe_bulges(section.band, section.extra_angles)
        self.report = nonattainment_probe(section.domain, bulges, potential, plan)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        return {"crossover": self.report.crossover, "monotone": self.report.monotone}

    def write(self, out: Path) -> Path:
        labels = [f"j{j}" for j in range(len(self.report.results))]
        return write_sweep_outputs(out, self.report.results, self.return_data(), labels)


class BumpSearchExperiment(Experiment):
    name = "bump-search"

    def run(self):
        section = self.config.bump_search
        plan = SweepPlan.from_config(self.config).model_copy(update={"schedule": section.schedule})
        self.report = bump_search(section.theta_X, section.angle_fractions, section.schedule, plan)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        rows = self.report.rows
        return {"mu_X": rows[-1].mu_X, "mu_B_last": rows[-1].mu_B} if rows else {}

    def write(self, out: Path) -> Path:
        out = Path(out)
        write_table(self.return_data()["rows"], out / "results.csv")
        write_json(self.return_data(), out / "verdict.json")
        return out


class MonotonicityExperiment(Experiment):
    name = "mono"

    def run(self):
        self.report = monotonicity_suite(self.config.mono, self.config.solver, self.config.resolution)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        return {c.name: "ok" if c.ok else "violated" for c in self.report.chains}

    def write(self, out: Path) -> Path:
        out = Path(out)
        rows = [
            {"chain": c.name, "label": label, "mu_h": value}
            for c in self.report.chains
            for label, value in zip(c.labels, c.values)
        ]
        write_table(rows, out / "results.csv")
        write_json(self.return_data(), out / "verdict.json")
        return out


class WideConeExperiment(Experiment):
    name = "wide-cone"

    def run(self):
        section = self.config.wide_cone
        plan = SweepPlan.from_config(self.config).model_copy(update={"schedule": section.schedule})
        self.report = wider_cone_experiment(section.theta, section.theta1, plan)
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        return {**_verdict_summary(self.report.sweep.verdict), "mu_C1": self.report.mu_C1}

    def write(self, out: Path) -> Path:
        return write_sweep_outputs(out, [self.report.sweep], self.return_data())


class ConvergenceExperiment(Experiment):
    name = "convergence"

    def run(self):
        s = self.config.convergence
        self.report = convergence_study(
            s.theta, s.window, s.n_radial, s.n_angular, s.levels, self.config.solver
        )
        return self.report

    def return_data(self) -> dict:
        return self.report.to_dict()

    def summary(self) -> dict:
        last = self.report.rows[-1]
        return {"mu_exact": self.report.mu_exact, "error": last.error, "ratio": last.ratio}

    def write(self, out: Path) -> Path:
        out = Path(out)
        write_table(self.return_data()["rows"], out / "results.csv")
        write_json(self.return_data(), out / "verdict.json")
        return out


EXPERIMENTS: dict[str, type[Experiment]] = {
    cls.name: cls
    for cls in (
        SweepExperiment,
        GapExperiment,
        DecayExperiment,
        ProbeExperiment,
        BumpSearchExperiment,
        MonotonicityExperiment,
        WideConeExperiment,
        ConvergenceExperiment,
    )
}
