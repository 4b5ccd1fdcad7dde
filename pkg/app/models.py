"""
Pydantic models for group documents, quadrature settings and emitted reports.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class StructureConstant(BaseModel):
    """One nonzero bracket coefficient: [X_i, X_j] has U_k-component v."""

    k: int = Field(..., description="Second-layer index, 1-based")
    i: int = Field(..., description="First-layer index of the left factor, 1-based")
    j: int = Field(..., description="First-layer index of the right factor, 1-based")
    v: float = Field(..., description="Coefficient value")

    @field_validator("k", "i", "j")
    @classmethod
    def validate_one_based(cls, v):
        if v < 1:
            raise ValueError("Indices are 1-based and must be positive")
        return v


class GroupSpecDocument(BaseModel):
    """JSON form of a two-step stratified group."""

    d1: int = Field(..., gt=0, description="Dimension of the first layer")
    d2: int = Field(..., gt=0, description="Dimension of the second layer")
    c: List[StructureConstant] = Field(
        default_factory=list, description="Sparse structure constants"
    )

    @model_validator(mode="after")
    def validate_index_ranges(self):
        for entry in self.c:
            if entry.k > self.d2 or entry.i > self.d1 or entry.j > self.d1:
                raise ValueError(
                    f"Structure constant ({entry.k},{entry.i},{entry.j}) "
                    f"outside d1={self.d1}, d2={self.d2}"
                )
        return self


class QuadratureSpec(BaseModel):
    """Node counts for the polar mu-side quadrature of kernel formulas."""

    radial_nodes: int = Field(16, ge=2, description="Gauss-Legendre nodes per radial panel")
    angular_nodes: int = Field(16, ge=2, description="Nodes per sphere axis")
    k_energy_cap: float = Field(
        41.0, gt=0, description="Largest unit-sphere eigenvalue kept when no chi cutoff is applied"
    )
    x_radial_nodes: int = Field(
        64, ge=2, description="Gauss-Laguerre nodes for per-block radial integrals"
    )

    @classmethod
    def default(cls) -> "QuadratureSpec":
        return cls()

    @classmethod
    def fine(cls) -> "QuadratureSpec":
        return cls(radial_nodes=32, angular_nodes=24, k_energy_cap=81.0, x_radial_nodes=96)

    def doubled(self) -> "QuadratureSpec":
        return self.model_copy(
            update={
                "radial_nodes": 2 * self.radial_nodes,
                "angular_nodes": 2 * self.angular_nodes,
            }
        )

    def cap_doubled(self) -> "QuadratureSpec":
        return self.model_copy(update={"k_energy_cap": 2 * self.k_energy_cap})


class KernelResult(BaseModel):
    real: float = Field(..., description="Real part of the kernel value")
    imag: float = Field(..., description="Imaginary part of the kernel value")
    k_terms: int = Field(..., ge=0, description="Largest k-lattice size used on any ray")
    quad_error_est: float = Field(
        ..., ge=0, description="Relative change under radial node doubling, and under cap doubling without a cutoff"
    )

    @property
    def value(self) -> complex:
        return complex(self.real, self.imag)


class MetivierVerdict(BaseModel):
    verdict: bool
    min_sv: float
    witness_mu: List[float]
    n_samples: int
    tol: float
    sampled: bool = Field(
        True, description="Positive verdicts are sampling-based certificates"
    )


class NumerologyRow(BaseModel):
    d1: int
    d2: int
    rho_rh: int
    admissible: bool
    exceptional: Optional[bool] = None
    three_halves: Optional[bool] = None
    p_threshold: Optional[str] = None
    bar_p: Optional[str] = None
    condition_iii: Optional[str] = None
    exactness: Literal["exact"] = "exact"


class ThetaRow(BaseModel):
    p: str
    theta: str
    regularity: str
    exactness: Literal["exact"] = "exact"


class KerAClass(BaseModel):
    kind: Literal["ZERO", "FULL", "INTERMEDIATE"]
    v: List[float] = Field(..., description="Unit vector; a kernel vector unless kind is ZERO")
    singular_values: List[float]


class BoundsRow(BaseModel):
    mu: List[float]
    alpha: int
    block: int
    d_b_ratio: float
    d_b_exact: float = Field(..., description="Closed-form |D^alpha b_n| / b_n from b = |mu| +- |A mu|")
    fd_error: float = Field(..., ge=0, description="|finite-difference ratio - closed-form ratio|")
    d_p_norm: float


class BoundsProbe(BaseModel):
    alpha: int
    kappa_b: float
    kappa_P: float
    skipped: int
    fd_step: float
    rows: List[BoundsRow] = Field(default_factory=list)


class ScanRow(BaseModel):
    ell: int
    alpha: int
    mass: float = Field(..., ge=0)
    model: float = Field(..., description="Scaling-law prediction 2^{ell(2 alpha - d2)} times the multiplier norm")
    ratio: float
    error_est: float


class ScanReport(BaseModel):
    route: Literal["first_layer", "second_layer"]
    rows: List[ScanRow]
    fitted_slope: float
    slope_target: float
    residual: float
    implied_constant: float
    two_sided: bool = Field(
        ..., description="Flag only: small residual suggests the power law is attained"
    )

    @field_validator("rows")
    @classmethod
    def validate_sorted(cls, v):
        if [row.ell for row in v] != sorted(row.ell for row in v):
            raise ValueError("Scan rows must be sorted by ell")
        return v


class RestrictionRow(BaseModel):
    ell: int
    p: str
    lower_bound: float = Field(..., description="||F(L)chi(2^l U) f||_2 / ||f||_p on the grid")
    rhs: float
    ratio: float
    error_est: float


class OracleLevel(BaseModel):
    n: int
    box: float
    h: float
    rel_error: float
    chebyshev_tail: float


class OracleReport(BaseModel):
    levels: List[OracleLevel]
    monotone: bool


class RunManifest(BaseModel):
    id: str
    command_line: List[str]
    group_sha256: Optional[str] = None
    multiplier: Optional[str] = None
    quadrature: Optional[QuadratureSpec] = None
    bump: str
    version: str
    wall_time_s: float
