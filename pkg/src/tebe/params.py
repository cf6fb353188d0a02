"""Model parameters and coordinate conversions."""
from __future__ import annotations

import math
from dataclasses import dataclass

ZETA_BARRIER = 0.5


class DomainError(ValueError):
    """Raised when a parameter lies outside its admissible range."""


def param_conversions(zeta: float) -> tuple[float, float, float]:
    """Return (beta, theta, t) for a twist ``zeta = sin(beta)``.

    ``t = tan(pi/4 - 3 beta / 2)`` and ``theta = arctan(t)``.
    """
    zeta = float(zeta)
    if not (0.0 <= zeta < ZETA_BARRIER) or not math.isfinite(zeta):
        raise DomainError(f"zeta must lie in [0, 1/2), got {zeta!r}")
    beta = math.asin(zeta)
    t = math.tan(math.pi / 4 - 1.5 * beta)
    return beta, math.atan(t), t


@dataclass(frozen=True)
class ModelParams:
    """Magnetic charge ``k`` and twist ``zeta``; angles are derived on demand."""

    k: int
    zeta: float

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "zeta", float(self.zeta))
        param_conversions(self.zeta)

    @property
    def b(self) -> int:
        return self.k + 1

    @property
    def beta(self) -> float:
        return math.asin(self.zeta)

    @property
    def t(self) -> float:
        return param_conversions(self.zeta)[2]

    @property
    def theta(self) -> float:
        return param_conversions(self.zeta)[1]

    @property
    def cos_beta(self) -> float:
        return math.sqrt(1.0 - self.zeta * self.zeta)

    @property
    def d_zeta(self) -> float:
        """Decay-rate factor ``1 - 2 zeta`` appearing in the far-field bounds."""
        return 1.0 - 2.0 * self.zeta

    def with_zeta(self, zeta: float) -> "ModelParams":
        return ModelParams(self.k, zeta)


@dataclass(frozen=True)
class Coords:
    """Radial profile coordinates: sigma = sinh(tau) = cot(psi), omega = pi/2 - psi."""

    tau: float
    sigma: float
    psi: float
    omega: float

    @classmethod
    def from_tau(cls, tau: float) -> "Coords":
        sigma = math.sinh(tau)
        psi = math.atan2(1.0, sigma)
        return cls(tau, sigma, psi, math.pi / 2 - psi)

    @classmethod
    def from_sigma(cls, sigma: float) -> "Coords":
        psi = math.atan2(1.0, sigma)
        return cls(math.asinh(sigma), sigma, psi, math.pi / 2 - psi)

    @classmethod
    def from_psi(cls, psi: float) -> "Coords":
        sigma = math.cos(psi) / math.sin(psi)
        return cls(math.asinh(sigma), sigma, psi, math.pi / 2 - psi)
