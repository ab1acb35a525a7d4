"""Configuration schema for hardylab using Pydantic."""

import math
from enum import Enum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import DomainError
from ..geometry import Bulge, DomainSpec, PotentialSpec, TruncationWindow, WBump

SCHEMA_VERSION = 1


class LogLevel(str, Enum):
    """Supported log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogStyle(str, Enum):
    """Console log rendering."""

    RICH = "rich"
    COLOR = "color"


class PathConfig(BaseModel):
    """Path configuration for results and cached meshes."""

    results_path: Path = Field(
        default=Path("./results/"), description="Default directory for experiment output"
    )
    cache_path: Path = Field(
        default=Path("~/.cache/hardylab/"), description="Directory for cache files"
    )

    @field_validator("*", mode="before")
    @classmethod
    def expand_user_path(cls, v):
        """Expand user path if it's a string."""
        if isinstance(v, (str, Path)):
            return Path(v).expanduser()
        return v


class SolverConfig(BaseModel):
    """Eigensolver and linear-solver tolerances."""

    tol: float = Field(default=1e-10, gt=0.0, description="Relative eigen-residual target")
    max_iter: int = Field(default=2000, ge=1, description="Maximum inverse iterations")
    block_size: int = Field(default=4, ge=1, description="Subspace size of the block iteration")
    preconditioner: Literal["ilu", "jacobi"] = Field(default="ilu")
    ilu_drop_tol: float = Field(default=1e-6, gt=0.0)
    ilu_fill_factor: float = Field(default=10.0, ge=1.0)
    linear_rtol: float = Field(default=1e-12, gt=0.0, description="PCG relative tolerance")
    strict_positivity: bool = Field(
        default=True, description="Fail when the principal eigenvector changes sign"
    )
    gap_threshold: float = Field(
        default=1e-6, ge=0.0, description="Relative second-eigenvalue gap required for simplicity"
    )

    def solve_kwargs(self) -> dict:
        return self.model_dump()


class ResolutionPolicy(BaseModel):
    """Mesh resolution in log-polar units, constant across a sweep."""

    layers_per_decade: int = Field(default=32, ge=1)
    n_angular: int = Field(default=32, ge=2)

    def n_radial(self, window: TruncationWindow) -> int:
        return max(2, int(round(self.layers_per_decade * window.decades)))


class ClassificationThresholds(BaseModel):
    """Documented thresholds of the localization / spreading verdict."""

    localized_ratio: float = Field(default=0.9, gt=0.0, le=1.0)
    spreading_factor: float = Field(
        default=2.5, gt=0.0, description="Spreading if max annulus fraction <= factor / decades"
    )
    trend_tolerance: float = Field(
        default=0.02, ge=0.0, description="Change of the excess over the cone ratio below which the trend is flat"
    )
    inconclusive_margin: float = Field(
        default=0.02, ge=0.0, description="Relative band around a threshold labeled inconclusive"
    )
    gap_margin: float = Field(
        default=0.01, ge=0.0, description="Relative gap (mu_C - mu_inf) / mu_C that certifies a bound state"
    )


def _default_schedule() -> list[TruncationWindow]:
    return [TruncationWindow.symmetric(d) for d in (2.0, 3.0, 4.0, 5.0, 6.0)]


def _centred_schedule(*decades: float) -> list[TruncationWindow]:
    """Windows centred on the bulge band [1, 10]."""
    return [TruncationWindow.symmetric(d, center=math.sqrt(10.0)) for d in decades]


class SweepSection(BaseModel):
    """Domain family, potential and truncation schedule of a sweep."""

    domain: DomainSpec = Field(default_factory=lambda: DomainSpec(theta=math.pi / 2))
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    schedule: list[TruncationWindow] = Field(default_factory=_default_schedule)
    reference_window: tuple[float, float] | None = Field(
        default=None, description="Localization window (defaults around the bulges)"
    )


class GapSection(SweepSection):
    bulge: Bulge | None = Field(
        default_factory=lambda: Bulge(r_a=1.0, r_b=2.0, extra_angle=math.pi / 4)
    )


class DecaySection(SweepSection):
    domain: DomainSpec = Field(
        default_factory=lambda: DomainSpec(
            theta=math.pi / 2, bulges=[Bulge(r_a=1.0, r_b=10.0, extra_angle=math.pi / 4)]
        )
    )
    schedule: list[TruncationWindow] = Field(default_factory=lambda: _centred_schedule(4.0, 6.0, 8.0))
    envelope: Literal["none", "sine"] = Field(default="none")


class ProbeSection(SweepSection):
    extra_angles: list[float] = Field(
        default_factory=lambda: [math.pi / 2**k for k in range(2, 9)],
        description="Shrinking bulge angles, largest first",
    )
    band: tuple[float, float] = Field(default=(1.0, 10.0))
    schedule: list[TruncationWindow] = Field(
        default_factory=lambda: _centred_schedule(2.0, 3.0, 4.0, 5.0, 6.0)
    )
    w_bump: WBump = Field(
        default_factory=lambda: WBump(
            amplitude=0.1, r_c=0.5, r_d=2.0, phi1=math.pi / 8, phi2=3 * math.pi / 8
        )
    )

    @field_validator("extra_angles")
    @classmethod
    def _shrinking(cls, v):
        if any(b >= a for a, b in zip(v, v[1:])):
            raise DomainError("probe bulge angles must shrink strictly")
        return v


class BumpSearchSection(BaseModel):
    theta_X: float = Field(default=math.pi, gt=0.0, le=2 * math.pi)
    angle_fractions: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    schedule: list[TruncationWindow] = Field(
        default_factory=lambda: [TruncationWindow.symmetric(d) for d in (1.0, 2.0, 3.0, 4.0)]
    )

    @model_validator(mode="after")
    def _paired(self):
        if len(self.angle_fractions) != len(self.schedule):
            raise DomainError("bump search needs one truncation window per angle fraction")
        if any(not 0.0 < f <= 1.0 for f in self.angle_fractions):
            raise DomainError("angle fractions must lie in (0, 1]")
        return self


class MonoSection(BaseModel):
    theta: float = Field(default=math.pi / 2, gt=0.0)
    theta_X: float = Field(default=math.pi, gt=0.0, le=2 * math.pi)
    window: TruncationWindow = Field(default_factory=lambda: TruncationWindow.symmetric(3.0))
    band: tuple[float, float] = Field(default=(1.0, 2.0))
    extra_angle_columns: list[int] = Field(
        default_factory=lambda: [4, 8, 16], description="Bulge widths in angular cells"
    )
    refinements: int = Field(default=2, ge=1)
    amplitudes: list[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2])
    w_bump: WBump = Field(
        default_factory=lambda: WBump(
            amplitude=0.2, r_c=0.5, r_d=2.0, phi1=math.pi / 8, phi2=3 * math.pi / 8
        )
    )


class WideConeSection(BaseModel):
    theta: float = Field(default=math.pi / 2, gt=0.0)
    theta1: float = Field(default=3 * math.pi / 4, gt=0.0)
    schedule: list[TruncationWindow] = Field(default_factory=_default_schedule)


class ConvergenceSection(BaseModel):
    theta: float = Field(default=math.pi / 2, gt=0.0)
    window: TruncationWindow = Field(default_factory=lambda: TruncationWindow(r_min=0.1, r_max=10.0))
    n_radial: int = Field(default=8, ge=2)
    n_angular: int = Field(default=4, ge=2)
    levels: int = Field(default=4, ge=2)


class LabConfig(BaseModel):
    """Main hardylab configuration."""

    model_config = ConfigDict(validate_assignment=True, extra="allow")

    schema_version: int = Field(default=SCHEMA_VERSION, description="Config schema version")
    log_level: LogLevel = Field(default=LogLevel.INFO, description="Logging level")
    log_style: LogStyle = Field(default=LogStyle.RICH, description="Console log rendering")
    environment: str = Field(
        default="production",
        description="Environment name (development, testing, production)",
    )
    workers: int = Field(default=1, ge=1, description="Concurrent sweep points")

    paths: PathConfig = Field(default_factory=PathConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    resolution: ResolutionPolicy = Field(default_factory=ResolutionPolicy)
    thresholds: ClassificationThresholds = Field(default_factory=ClassificationThresholds)

    sweep: SweepSection = Field(default_factory=SweepSection)
    gap: GapSection = Field(default_factory=GapSection)
    decay: DecaySection = Field(default_factory=DecaySection)
    probe: ProbeSection = Field(default_factory=ProbeSection)
    bump_search: BumpSearchSection = Field(default_factory=BumpSearchSection)
    mono: MonoSection = Field(default_factory=MonoSection)
    wide_cone: WideConeSection = Field(default_factory=WideConeSection)
    convergence: ConvergenceSection = Field(default_factory=ConvergenceSection)

    @field_validator("schema_version")
    @classmethod
    def _supported_version(cls, v):
        if v > SCHEMA_VERSION:
            raise ValueError(f"config schema version {v} is newer than supported ({SCHEMA_VERSION})")
        return v

    def create_directories(self) -> None:
        """Create necessary directories."""
        for path in [self.paths.results_path, self.paths.cache_path]:
            path.mkdir(parents=True, exist_ok=True)
