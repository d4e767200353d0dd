"""Pydantic schemas for ransomware-driven attack scenarios and their impact."""

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from app.evguard.schemas.plant import ThresholdPair

MAX_DDOS_DELAY_S = 300.0  # five minutes


class NoAttack(BaseModel):
    """Attack-free reference run."""

    model_config = ConfigDict(frozen=True)

    type: Literal["none"] = "none"


class DdosAttack(BaseModel):
    """DDoS modeled as pure latency on the SCADA command path."""

    model_config = ConfigDict(frozen=True)

    type: Literal["ddos"] = "ddos"
    delay_s: float = Field(
        default=0.0, ge=0.0, le=MAX_DDOS_DELAY_S, description="Command delay (s)"
    )


class FdiAttack(BaseModel):
    """False data injection replacing the controller's SOC thresholds."""

    model_config = ConfigDict(frozen=True)

    type: Literal["fdi"] = "fdi"
    thresholds: ThresholdPair

    @property
    def low(self) -> float:
        """Injected low threshold."""
        return self.thresholds.low

    @property
    def high(self) -> float:
        """Injected high threshold."""
        return self.thresholds.high


AttackScenario = Annotated[NoAttack | DdosAttack | FdiAttack, Field(discriminator="type")]

attack_scenario_adapter: TypeAdapter[NoAttack | DdosAttack | FdiAttack] = TypeAdapter(
    AttackScenario
)


class ThresholdViolation(BaseModel):
    """A sample where SOC sat beyond a legitimate threshold and kept moving outward."""

    model_config = ConfigDict(frozen=True)

    time: float
    soc: float
    which_threshold: Literal["low", "high"]


class ImpactReport(BaseModel):
    """Attacked-vs-reference comparison of transition edges and SOC excursions."""

    edge_delay_pct: list[float] = Field(
        default_factory=list, description="100*(t_att - t_ref)/t_ref per matched edge"
    )
    soc_overshoot_pct: list[float] = Field(
        default_factory=list,
        description="100*(soc_att - soc_ref)/soc_ref per matched edge",
    )
    threshold_violations: list[ThresholdViolation] = Field(default_factory=list)
    starved: bool = Field(
        default=False, description="No recharge takes effect after the window closes"
    )

    @property
    def matched_edges(self) -> int:
        """Number of edges paired by index."""
        return len(self.edge_delay_pct)

    def summary(self) -> dict[str, float | int | bool | None]:
        """Min/max of each percentage series, plus counts."""

        def _bounds(values: list[float]) -> tuple[float | None, float | None]:
            if not values:
                return None, None
            return min(values), max(values)

        delay_min, delay_max = _bounds(self.edge_delay_pct)
        # Severity is reported by magnitude, keeping the sign of the extreme value.
        overshoot_min = (
            min(self.soc_overshoot_pct, key=abs) if self.soc_overshoot_pct else None
        )
        overshoot_max = (
            max(self.soc_overshoot_pct, key=abs) if self.soc_overshoot_pct else None
        )
        return {
            "matched_edges": self.matched_edges,
            "edge_delay_pct_min": delay_min,
            "edge_delay_pct_max": delay_max,
            "soc_overshoot_pct_min": overshoot_min,
            "soc_overshoot_pct_max": overshoot_max,
            "threshold_violations": len(self.threshold_violations),
            "starved": self.starved,
        }
