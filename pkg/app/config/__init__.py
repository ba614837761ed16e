# app/config/__init__.py

"""
Configuration models.

Every tunable of a run is a pydantic model: the SMO trainer settings, the
train/validation/test split, the hyperparameter grids, the benchmark
settings and the fully-resolved ``RunConfig`` that the command-line tools
write next to their outputs.
"""

import itertools
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.kernels import KernelSpec, LinearKernel, NdkKernel, PolynomialKernel, RbfKernel

logger = logging.getLogger(__name__)

KernelFamily = Literal["linear", "square", "cubic", "polynomial", "rbf", "ndk"]
AssignmentMode = Literal["independent_threshold", "signed_distance_argmax_fallback"]
FeatureMode = Literal["tfidf_only", "geometric_mean"]
DecisionPath = Literal["dual", "precomputed", "primal"]

KERNEL_FAMILIES: Tuple[str, ...] = ("linear", "square", "cubic", "polynomial", "rbf", "ndk")


class SmoConfig(BaseModel):
    """
    Settings of the SMO trainer.

    Attributes:
    -----------
    C : float
        Box constraint, alpha in [0, C].
    tol : float
        KKT tolerance on y f(x).
    max_passes : int
        Consecutive sweeps over the non-bound multipliers before a full
        sweep over all examples is forced.
    max_iters : int
        Budget of successful pair updates.
    seed : int
        Seed of the second-choice generator.
    cache_rows : int
        Capacity of the kernel-row cache.
    debug : bool
        Check that the dual objective never decreases.
    """

    model_config = ConfigDict(frozen=True)

    C: float = Field(1.0, gt=0, description="Box constraint")
    tol: float = Field(1e-3, gt=0, description="KKT tolerance")
    max_passes: int = Field(10, ge=1, description="Non-bound sweeps between full sweeps")
    max_iters: int = Field(10**6, ge=1, description="Maximum successful pair updates")
    seed: int = Field(0, ge=0, description="Seed for the random second choice")
    cache_rows: int = Field(4096, ge=1, description="Kernel row cache capacity")
    debug: bool = Field(False, description="Check monotone dual objective")


class SplitConfig(BaseModel):
    """Fractions of the seeded train/validation/test split."""

    model_config = ConfigDict(frozen=True)

    train: float = Field(0.6, gt=0, lt=1)
    validation: float = Field(0.2, ge=0, lt=1)
    test: float = Field(0.2, ge=0, lt=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> "SplitConfig":
        total = self.train + self.validation + self.test
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        return self


def _powers_of_two(lo: int, hi: int) -> List[float]:
    return [2.0 ** k for k in range(lo, hi + 1)]


class GridConfig(BaseModel):
    """
    Hyperparameter grids for the grid search.

    The defaults are configuration choices, not values taken from
    published experiments.
    """

    model_config = ConfigDict(frozen=True)

    C_values: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    rbf_gamma: List[float] = Field(default_factory=lambda: _powers_of_two(-7, 3))
    ndk_a: List[float] = Field(default_factory=lambda: _powers_of_two(-5, 3))
    ndk_c: List[float] = Field(default_factory=lambda: [0.0, 1.0, 10.0])
    poly_a: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    poly_c: List[float] = Field(default_factory=lambda: [0.0, 1.0])
    poly_degrees: List[int] = Field(default_factory=lambda: [2])

    @field_validator("C_values", "rbf_gamma", "ndk_a")
    @classmethod
    def _positive(cls, values: List[float]) -> List[float]:
        if any(v <= 0 for v in values):
            raise ValueError("grid values must be positive")
        return values

    @field_validator("ndk_c")
    @classmethod
    def _non_negative(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("NDK offsets in the grid must be >= 0")
        return values

    def kernels(self, family: str) -> List[KernelSpec]:
        """Kernel specs of one family in grid order."""
        if family == "linear":
            return [LinearKernel()]
        if family in ("square", "cubic", "polynomial"):
            degrees = {"square": [2], "cubic": [3]}.get(family, self.poly_degrees)
            return [PolynomialKernel(a=a, c=c, d=d)
                    for d, a, c in itertools.product(degrees, self.poly_a, self.poly_c)]
        if family == "rbf":
            return [RbfKernel(gamma=g) for g in self.rbf_gamma]
        if family == "ndk":
            return [NdkKernel(a=a, c=c) for a, c in itertools.product(self.ndk_a, self.ndk_c)]
        raise ValueError(f"unknown kernel family {family!r}")

    def points(self, family: str) -> List[Tuple[KernelSpec, float]]:
        """All (kernel, C) pairs of a family; kernel parameters vary slowest."""
        return [(k, C) for k in self.kernels(family) for C in self.C_values]


class BenchConfig(BaseModel):
    """Timing harness settings."""

    model_config = ConfigDict(frozen=True)

    repetitions: int = Field(5, ge=5, description="Timed repetitions per path")
    warmup: int = Field(1, ge=0, description="Untimed warm-up runs per path")


class RunConfig(BaseModel):
    """
    Fully-resolved configuration of one command-line run.

    Written as JSON next to the run's outputs so that every result can be
    traced back to its inputs.
    """

    command: str
    seed: int = 0
    paths: Dict[str, str] = Field(default_factory=dict)
    kernel: Optional[KernelSpec] = None
    smo: Optional[SmoConfig] = None
    split: Optional[SplitConfig] = None
    grid: Optional[GridConfig] = None
    bench: Optional[BenchConfig] = None
    assignment_mode: AssignmentMode = "signed_distance_argmax_fallback"
    feature_mode: FeatureMode = "tfidf_only"
    path: DecisionPath = "dual"
    workers: int = Field(1, ge=1)
    options: Dict[str, Union[str, int, float, bool, None]] = Field(default_factory=dict)

    def write(self, target: Union[str, Path]) -> Path:
        """Write this configuration as JSON and return the path written."""
        target = Path(target)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.debug(f"Run configuration written to {target}")
        return target
