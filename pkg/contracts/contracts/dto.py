from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


SolverBackend = Literal["sine_spectral", "sor"]
OptimizerStatus = Literal[
    "running",
    "converged",
    "stalled",
    "step_exhausted",
    "max_outer",
    "solver_failed",
]


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    backend: SolverBackend = Field(default="sine_spectral", description="Dirichlet Poisson backend")
    residual_tol: float = Field(default=1e-10, gt=0.0, description="Relative residual tolerance")
    max_iterations: Optional[int] = Field(
        default=None,
        gt=0,
        description="SOR sweep limit; None resolves to 50*N^2 for the grid being solved",
    )
    sor_omega: float = Field(default=1.9, description="SOR relaxation factor in (0, 2)")

    @field_validator("sor_omega")
    @classmethod
    def _omega_in_range(cls, value: float) -> float:
        if not 0.0 < value < 2.0:
            raise ValueError("sor_omega must lie in (0, 2)")
        return value

    def resolve_max_iterations(self, points_per_axis: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 50 * points_per_axis * points_per_axis


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    step_sigma: float = Field(default=0.1, gt=0.0, description="Initial control scale")
    max_outer: int = Field(default=500, gt=0)
    ssd_rel_tol: float = Field(default=1e-8, gt=0.0, description="Stop on relative ssd decrease below this")
    ssd_abs_tol: float = Field(default=1e-20, ge=0.0, description="Stop once ssd falls below this")
    backtrack_factor: float = Field(default=0.5, description="Sigma shrink factor in (0, 1)")
    max_backtracks: int = Field(default=20, gt=0)
    step_growth: float = Field(default=1.5, ge=1.0, description="Sigma growth after an accepted step")
    sigma_max: float = Field(default=1.0, gt=0.0)
    reject_folds: bool = Field(default=True, description="Treat folded candidates as rejected steps")
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("backtrack_factor")
    @classmethod
    def _factor_in_range(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        return value


class TraceRecord(BaseModel):
    iteration: int
    ssd: float
    jac_residual: float = Field(..., description="Interior L2 norm of J(phi) - f0")
    curl_residual: float = Field(..., description="Interior L2 norm of curl(phi) - g0")
    min_jacobian: float
    sigma: float = Field(..., description="Control scale of the accepted step; 0 for the start record")
    reference_error: Optional[float] = Field(
        default=None,
        description="L2 distance to a reference transformation, when one was supplied",
    )


class OptimizerTrace(BaseModel):
    records: list[TraceRecord] = Field(default_factory=list)
    status: OptimizerStatus = "running"
    folded: bool = False
    message: Optional[str] = None
    normalization_defect: Optional[float] = Field(
        default=None,
        description="Discrete integral of the unnormalized target Jacobian minus one (reconstruction runs)",
    )

    @property
    def accepted_iterations(self) -> int:
        return max(0, len(self.records) - 1)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @model_validator(mode="after")
    def _ssd_non_increasing(self) -> "OptimizerTrace":
        for previous, current in zip(self.records, self.records[1:]):
            if current.ssd > previous.ssd:
                raise ValueError("ssd must be non-increasing across accepted iterations")
        return self


class NormTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_l2: float = Field(..., ge=0.0)
    grad_l2: float = Field(..., ge=0.0)
    lap_l2: float = Field(..., ge=0.0)

    @property
    def epsilon(self) -> float:
        return max(self.u_l2, self.grad_l2, self.lap_l2)


class BoundRow(BaseModel):
    k: int
    bound_u: float
    bound_grad: float
    bound_lap: float


class BoundSequence(BaseModel):
    epsilon: float = Field(..., gt=0.0)
    c: float = Field(..., gt=0.0, description="Poincare constant")
    rows: list[BoundRow]

    @property
    def convergent(self) -> bool:
        return self.epsilon < min(1.0, 1.0 / self.c**0.5)


class ChainRow(BaseModel):
    label: str = Field(..., description="Step of the inequality chain, e.g. 'green', 'poincare'")
    relation: str = Field(..., description="Human-readable relation evaluated on the measured norms")
    kind: Literal["inequality", "claim"] = "inequality"
    lhs: float
    rhs: float
    holds: bool


class ChainReport(BaseModel):
    norms: NormTriple
    c: float
    epsilon: float
    rows: list[ChainRow]

    @property
    def all_pass(self) -> bool:
        return all(row.holds for row in self.rows if row.kind == "inequality")


class FixedPointStep(BaseModel):
    m: int
    norms: NormTriple
    grad_f_l2: float = Field(..., description="L2 norm of the gradient of F(u_m)")
    eps_squared_bounds_grad_f: bool = Field(..., description="Whether epsilon^2 bounds grad F(u_m)")
    product_bound: float = Field(..., description="Discrete product bound for the next iterate's Laplacian norm")


class FixedPointTrajectory(BaseModel):
    steps: list[FixedPointStep] = Field(default_factory=list)
    diverged: bool = False

    @property
    def triples(self) -> list[NormTriple]:
        return [step.norms for step in self.steps]


class MonitorManifest(BaseModel):
    dim: int = Field(..., ge=2, le=3)
    points_per_axis: int = Field(..., ge=3)
    f0_file: str = Field(..., description="FLD1 file holding the target Jacobian determinant")
    g0_file: str = Field(..., description="FLD1 file holding the target curl")
    curl_enabled: bool = False
    source: Optional[str] = Field(default=None, description="Image or transformation the monitor came from")


class RunManifest(BaseModel):
    subcommand: str
    inputs: list[str] = Field(default_factory=list)
    points_per_axis: Optional[int] = None
    dim: Optional[int] = None
    overrides: dict[str, float | int | bool | str] = Field(default_factory=dict)
    output_dir: str
    seed: int = 0
