"""Single-orbit Newton iteration with stopping, cycle and budget rules."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from . import _kernels
from .numerics import SATURATION, CriticalPointError, sc_ratio
from .polyfam import PolyFamily, eval as poly_eval


class Status(enum.IntEnum):
    RUNNING = _kernels.RUNNING
    CONVERGED = _kernels.CONVERGED
    CYCLE_TRAPPED = _kernels.CYCLE
    EXHAUSTED = _kernels.EXHAUSTED
    FAILED = _kernels.FAILED


@dataclass(frozen=True)
class Tier:
    name: str
    promote: bool
    eps_stop: float
    eps_root: float


# "double-double" evaluates the final Newton steps at ~106 bits while points
# stay in double storage
TIERS = {
    "double": Tier("double", False, 1e-13, 1e-12),
    "double-double": Tier("double-double", True, 1e-15, 1e-14),
}
DEFAULT_TIER = "double-double"


@dataclass(frozen=True)
class EngineConfig:
    eps_stop: float = TIERS[DEFAULT_TIER].eps_stop
    max_iter_factor: float = 10.0
    eps_cycle: float | None = None
    high_precision_threshold: float = 1e-13
    promote: bool = TIERS[DEFAULT_TIER].promote
    saturation: float = SATURATION

    def __post_init__(self):
        if self.eps_cycle is None:
            object.__setattr__(self, "eps_cycle", 1e3 * self.eps_stop)
        for name in ("eps_stop", "max_iter_factor", "eps_cycle", "high_precision_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_cycle < self.eps_stop:
            raise ValueError("eps_cycle must be >= eps_stop")

    @classmethod
    def for_tier(cls, tier: str = DEFAULT_TIER, **overrides) -> EngineConfig:
        t = TIERS[tier]
        return cls(eps_stop=overrides.pop("eps_stop", t.eps_stop), promote=t.promote,
                   **overrides)

    def max_iter(self, degree: int) -> int:
        return max(1, int(self.max_iter_factor * degree))


@dataclass
class Orbit:
    z: complex
    last_displacement: complex = 0j
    iterations: int = 0
    generation: int = 0
    baseline_cross_ratio: complex | None = None
    status: Status = Status.RUNNING
    period_estimate: int = 0
    sentinel: complex = field(default=None)
    sentinel_iter: int = 0

    def __post_init__(self):
        if self.sentinel is None:
            self.sentinel = self.z
            self.sentinel_iter = self.iterations


def newton_step(fam: PolyFamily, z: complex, saturation: float = SATURATION) -> tuple[complex, complex]:
    """One Newton step; raises CriticalPointError where ``p'(z) = 0``."""
    r = poly_eval(fam, z)
    d = sc_ratio(r.p, r.dp, saturation)
    return z - d, d


def _promoted(fam: PolyFamily, z: complex, d: complex) -> complex:
    kind, c, n = fam.kernel_args
    return _kernels.displacement_dd(kind, c, n, complex(z), complex(d))


def advance(orbit: Orbit, fam: PolyFamily, cfg: EngineConfig) -> Orbit:
    """Return ``orbit`` moved by one Newton step with its status updated."""
    if orbit.status != Status.RUNNING:
        raise ValueError(f"cannot advance an orbit with status {orbit.status.name}")
    z = orbit.z
    try:
        z_next, d = newton_step(fam, z, cfg.saturation)
    except CriticalPointError:
        z = z + cfg.eps_stop * (1 + 1j)
        try:
            z_next, d = newton_step(fam, z, cfg.saturation)
        except CriticalPointError:
            return replace(orbit, z=z, status=Status.FAILED)
    if cfg.promote and abs(d) < cfg.high_precision_threshold:
        d = _promoted(fam, z, d)
        z_next = z - d
    it = orbit.iterations + 1
    out = replace(orbit, z=z_next, last_displacement=d, iterations=it)
    if abs(d) < cfg.eps_stop:
        out.status = Status.CONVERGED
    elif not (math.isfinite(z_next.real) and math.isfinite(z_next.imag)):
        out.status = Status.FAILED
    elif it - orbit.sentinel_iter >= 2 and abs(z_next - orbit.sentinel) < cfg.eps_cycle:
        out.status = Status.CYCLE_TRAPPED
        out.period_estimate = it - orbit.sentinel_iter
    elif it >= cfg.max_iter(fam.degree):
        out.status = Status.EXHAUSTED
    elif it & (it - 1) == 0:
        out.sentinel = z_next
        out.sentinel_iter = it
    return out
