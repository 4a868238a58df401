"""Physical parameter sets of the benchmark systems."""

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, TypeVar

from ..errors import ConfigError

P = TypeVar("P", bound="SystemParams")


class SystemParams:
    """Mixin giving parameter dataclasses a strict ``from_dict``/``to_dict`` pair."""

    @classmethod
    def from_dict(cls: type[P], data: dict[str, Any] | None) -> P:
        data = {} if data is None else dict(data)
        known = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(
                f"Unknown {cls.__name__} keys: {unknown}. Allowed: {sorted(known)}."
            )
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid {cls.__name__}: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)  # type: ignore[call-overload, no-any-return]


def _positive(owner: str, **values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{owner}.{name} must be positive, got {value}.")


def _non_negative(owner: str, **values: float) -> None:
    for name, value in values.items():
        if value < 0:
            raise ValueError(f"{owner}.{name} must be non-negative, got {value}.")


@dataclass(frozen=True)
class PendulumParams(SystemParams):
    g: float = 1.0
    L: float = 1.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        _positive("PendulumParams", g=self.g, L=self.L)
        _non_negative("PendulumParams", noise=self.noise)


@dataclass(frozen=True)
class DoublePendulumParams(SystemParams):
    m1: float = 1.0
    m2: float = 1.0
    L1: float = 1.0
    L2: float = 1.0
    g: float = 1.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        _positive(
            "DoublePendulumParams",
            m1=self.m1,
            m2=self.m2,
            L1=self.L1,
            L2=self.L2,
            g=self.g,
        )
        _non_negative("DoublePendulumParams", noise=self.noise)


@dataclass(frozen=True)
class FputParams(SystemParams):
    """Periodic FPUT chain; ``alpha`` and ``beta`` weight the r**2 and r**3 bond forces."""

    N: int = 8
    m: float = 1.0
    k: float = 1.0
    alpha: float = 0.0
    beta: float = 0.7
    sigma_q: float = 0.1
    sigma_p: float = 0.1
    noise: float = 0.0

    def __post_init__(self) -> None:
        if self.N < 3:
            raise ValueError(f"FputParams.N must be at least 3, got {self.N}.")
        _positive("FputParams", m=self.m, k=self.k)
        _non_negative(
            "FputParams",
            beta=self.beta,
            sigma_q=self.sigma_q,
            sigma_p=self.sigma_p,
            noise=self.noise,
        )


@dataclass(frozen=True)
class SweParams(SystemParams):
    """
    Periodic shallow-water setup on a square domain.

    ``init`` selects the initial condition: ``"pulse"`` (Gaussian bump of
    ``amplitude`` and ``sigma_cells``, centered unless ``randomize_center``) or
    ``"random"`` (smoothed Gaussian random field of ``amplitude`` with
    correlation length ``correlation_cells``, smoothed until neighbouring cells
    differ by less than ``jump_threshold``).
    """

    Lx: float = 1.0e6
    g: float = 9.81
    H: float = 100.0
    N: int = 64
    cfl: float = 0.1
    init: str = "pulse"
    amplitude: float = 0.1
    sigma_cells: float = 2.0
    randomize_center: bool = False
    correlation_cells: float = 4.0
    jump_threshold: float = 1.0e-3

    def __post_init__(self) -> None:
        _positive(
            "SweParams",
            Lx=self.Lx,
            g=self.g,
            H=self.H,
            N=self.N,
            cfl=self.cfl,
            sigma_cells=self.sigma_cells,
            correlation_cells=self.correlation_cells,
            jump_threshold=self.jump_threshold,
        )
        _non_negative("SweParams", amplitude=self.amplitude)
        if self.init not in ("pulse", "random"):
            raise ValueError(
                f"SweParams.init must be 'pulse' or 'random', got '{self.init}'."
            )

    @property
    def dx(self) -> float:
        return self.Lx / self.N

    @property
    def dy(self) -> float:
        return self.Lx / self.N

    @property
    def dt(self) -> float:
        """CFL step ``cfl * min(dx, dy) / sqrt(g H)``."""
        return self.cfl * min(self.dx, self.dy) / math.sqrt(self.g * self.H)

    @property
    def depth_floor(self) -> float:
        return 1.0e-6 * self.H


@dataclass(frozen=True)
class TaylorGreenParams(SystemParams):
    """
    Decaying Taylor-Green vortex on ``[0, L)^2``.

    ``random_phase`` shifts the vortex pattern by a random offset per
    trajectory so independent rollouts differ.
    """

    N: int = 64
    L: float = 2.0 * math.pi
    U0: float = 1.0
    Re: float = 100.0
    k: float = 1.0
    random_phase: bool = False

    def __post_init__(self) -> None:
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"TaylorGreenParams.N must be a power of two, got {self.N}.")
        _positive("TaylorGreenParams", L=self.L, U0=self.U0, Re=self.Re, k=self.k)

    @property
    def nu(self) -> float:
        return self.U0 * self.L / self.Re

    @property
    def dx(self) -> float:
        return self.L / self.N


@dataclass(frozen=True)
class TwoScaleToyParams(SystemParams):
    """
    Slow-fast toy ``H = p_s**2/2M_s + p_f**2/2M_f + V(q_s, q_f) + W(q_f)/eps``.

    ``V = k_s q_s**2 / 2 + coupling * q_s * q_f`` and
    ``W = k_f (q_f - q_star)**2 / 2``.
    """

    eps: float = 1.0e-2
    m_s: float = 1.0
    m_f: float = 1.0
    k_s: float = 1.0
    coupling: float = 0.0
    k_f: float = 1.0
    q_star: float = 0.0
    sigma_q: float = 1.0
    sigma_p: float = 0.5
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"TwoScaleToyParams.eps must lie in (0, 1), got {self.eps}.")
        _positive("TwoScaleToyParams", m_s=self.m_s, m_f=self.m_f)
        _non_negative(
            "TwoScaleToyParams",
            k_f=self.k_f,
            sigma_q=self.sigma_q,
            sigma_p=self.sigma_p,
            noise=self.noise,
        )

    @property
    def fast_frequency(self) -> float:
        """Angular frequency ``sqrt(k_f / (eps m_f))`` of the uncoupled fast mode."""
        return math.sqrt(self.k_f / (self.eps * self.m_f))
