"""Pydantic schemas for the battery energy storage (BES) plant simulation.

The plant is a reduced-order SOC integrator supervised by a SCADA hysteresis
controller that only acts inside a bounded control window.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

SOC_MIN = 0.0
SOC_MAX = 100.0


class Mode(str, Enum):
    """Operating mode of the BES switches."""

    IDLE = "Idle"
    CHARGING = "Charging"
    DISCHARGING = "Discharging"


class ThresholdPair(BaseModel):
    """SOC thresholds of the hysteresis controller (charge below low, discharge above high)."""

    model_config = ConfigDict(frozen=True)

    low: float = Field(default=35.0, ge=SOC_MIN, le=SOC_MAX, description="Charge trigger (%)")
    high: float = Field(
        default=80.0, ge=SOC_MIN, le=SOC_MAX, description="Discharge trigger (%)"
    )

    @model_validator(mode="after")
    def check_order(self) -> "ThresholdPair":
        """Ensure low < high."""
        if self.low >= self.high:
            msg = f"threshold low ({self.low}) must be below high ({self.high})"
            raise ValueError(msg)
        return self

    def as_tuple(self) -> tuple[float, float]:
        """Return the (low, high) tuple."""
        return (self.low, self.high)


class SimConfig(BaseModel):
    """Plant and controller parameters.

    Defaults place several threshold crossings inside the 50-150 s control
    window; none of them are taken from a published battery model.
    """

    model_config = ConfigDict(frozen=True)

    dt: float = Field(default=0.1, gt=0, description="Timestep (s)")
    duration: float = Field(default=600.0, gt=0, description="Simulated horizon (s)")
    initial_soc: float = Field(default=78.0, ge=SOC_MIN, le=SOC_MAX)
    charge_rate: float = Field(default=1.0, gt=0, description="Charging slope (%/s)")
    discharge_rate: float = Field(default=1.0, gt=0, description="Discharging slope (%/s)")
    window_start: float = Field(default=50.0, ge=0, description="Control window open (s)")
    window_end: float = Field(default=150.0, description="Control window close (s)")
    thresholds: ThresholdPair = Field(default_factory=ThresholdPair)
    seed: int = Field(default=0, description="Reserved for stochastic extensions")

    @model_validator(mode="after")
    def check_window(self) -> "SimConfig":
        """Ensure duration >= window_end > window_start >= 0."""
        if not self.window_end > self.window_start:
            msg = (
                f"window_end ({self.window_end}) must be after "
                f"window_start ({self.window_start})"
            )
            raise ValueError(msg)
        if self.duration < self.window_end:
            msg = f"duration ({self.duration}) must cover window_end ({self.window_end})"
            raise ValueError(msg)
        return self

    @property
    def window(self) -> tuple[float, float]:
        """Control window as a (start, end) tuple."""
        return (self.window_start, self.window_end)

    @property
    def n_steps(self) -> int:
        """Number of samples on the grid t = 0, dt, 2*dt, ... <= duration."""
        return int(np.floor(self.duration / self.dt + 1e-9)) + 1

    def time_grid(self) -> np.ndarray:
        """Sample times, computed as k*dt so the grid does not drift."""
        return np.arange(self.n_steps, dtype=np.float64) * self.dt


class TransitionEdge(BaseModel):
    """Recorded change of the in-effect mode, as a <SOC, time> tuple."""

    model_config = ConfigDict(frozen=True)

    time: float
    soc: float
    from_mode: Mode
    to_mode: Mode

    @model_validator(mode="after")
    def check_modes(self) -> "TransitionEdge":
        """An edge must change the mode."""
        if self.from_mode == self.to_mode:
            msg = f"edge at t={self.time} does not change mode ({self.from_mode.value})"
            raise ValueError(msg)
        return self


@dataclass(frozen=True, eq=False)
class SocTrace:
    """Time series of SOC and in-effect mode.

    Attributes:
        times: Sample times (s), strictly increasing with step dt
        soc: SOC at each sample (%), within [0, 100]
        modes: In-effect mode at each sample

    """

    times: np.ndarray
    soc: np.ndarray
    modes: tuple[Mode, ...]

    def __post_init__(self) -> None:
        """Check aligned lengths."""
        if not len(self.times) == len(self.soc) == len(self.modes):
            msg = (
                f"trace columns differ in length: times={len(self.times)}, "
                f"soc={len(self.soc)}, modes={len(self.modes)}"
            )
            raise ValueError(msg)

    def __len__(self) -> int:
        """Number of samples."""
        return len(self.times)

    def __eq__(self, other: object) -> bool:
        """Exact, element-wise equality."""
        if not isinstance(other, SocTrace):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.soc, other.soc)
            and self.modes == other.modes
        )

    __hash__ = None  # type: ignore[assignment]
