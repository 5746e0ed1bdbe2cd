"""Problem specification: the single source of truth for a run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .domains import Domain, Disk
from .errors import ParameterError


def weight_exponent_floor(n: int, k: int) -> float:
    """Admissible lower bound -min(1, n/2k) for the weight exponent s."""
    return -min(1.0, n / (2.0 * k))


@dataclass(frozen=True)
class ProblemSpec:
    """Eigenproblem parameters plus solver caps and tolerances.

    The continuous problem is S_k(D^2 u) = ((|x|^2 + delta^2)^s |lambda u|)^k
    on ``domain`` with u = 0 on the boundary; delta = 0 recovers the pure
    power weight |x|^{2s}.
    """

    n: int
    k: int
    s: float
    domain: Domain
    delta: float = 0.0
    h: float = 1.0 / 64.0

    # iteration caps and tolerances
    lambda_rel_tol: float = 2e-3        # relative width of the final lambda bracket
    lambda_ceiling_factor: float = 1e4  # search ceiling as multiple of the seed guess
    picard_tol: float = 1e-9            # relative fixed-point tolerance
    picard_max_iter: int = 3000
    blowup_value_cap: float = 1e6       # |u| beyond this is a blow-up signal
    divergence_window: int = 20         # consecutive growing increments => blow-up
    monotone_slack: float = 1e-8        # allowed nodewise increase before flagging
    ma_tol: float = 1e-10
    ma_max_newton: int = 80
    poisson_residual_factor: float = 1e-10

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ParameterError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        floor = weight_exponent_floor(self.n, self.k)
        if not self.s > floor:
            raise ParameterError(
                f"s = {self.s} must exceed -min(1, n/(2k)) = {floor}")
        if self.delta < 0:
            raise ParameterError("delta must be nonnegative")
        if self.h <= 0:
            raise ParameterError("h must be positive")

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def require_grid_supported(self):
        if self.n != 2:
            raise ParameterError("grid solvers support n = 2 only")
        if self.k not in (1, 2):
            raise ParameterError("grid solvers support k in {1, n=2} only")
        if self.s < 0 and self.delta == 0.0:
            raise ParameterError(
                "delta = 0 with s < 0 is refused on the grid "
                "(singular weight at the origin node); use delta > 0")

    @property
    def weight_power(self) -> float:
        """Exponent 2sk of the physical weight |x|^{2sk} on the k-th power side."""
        return 2.0 * self.s * self.k

    def reference_radius(self) -> float:
        """Length scale used to seed eigenvalue brackets."""
        d = self.domain
        if isinstance(d, Disk):
            return d.radius
        if d.kind == "ellipse":
            return math.sqrt(d.a * d.b)
        return d.side / math.sqrt(math.pi)   # square: equal-area disk radius

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "k": self.k, "s": self.s,
            "domain": self.domain.to_dict(), "delta": self.delta, "h": self.h,
            "lambda_rel_tol": self.lambda_rel_tol,
            "lambda_ceiling_factor": self.lambda_ceiling_factor,
            "picard_tol": self.picard_tol,
            "picard_max_iter": self.picard_max_iter,
            "blowup_value_cap": self.blowup_value_cap,
            "divergence_window": self.divergence_window,
            "monotone_slack": self.monotone_slack,
            "ma_tol": self.ma_tol,
            "ma_max_newton": self.ma_max_newton,
            "poisson_residual_factor": self.poisson_residual_factor,
        }
        return out
