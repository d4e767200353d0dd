"""Schemas for the layered detection mesh: nodes, alerts, bus and transcript."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.evguard.schemas.features import ScalerParams
from app.evguard.schemas.neuralnet import ModelParams


class Layer(str, Enum):
    """Mesh layers, upstream first."""

    SCADA = "SCADA"
    GEN_TRANS_DIST = "GenTransDist"
    EVSE_NETWORK = "EVSENetwork"
    CAEV = "CAEV"

    @property
    def position(self) -> int:
        """0 for SCADA ... 3 for CAEV."""
        return list(Layer).index(self)


class Severity(str, Enum):
    """Alert severity bands over the ransomware score."""

    LOW = "Low"
    HIGH = "High"
    CRITICAL = "Critical"


class Mitigation(str, Enum):
    """Response ladder; a node only ever climbs it."""

    NORMAL = "Normal"
    BACKUP_ON = "BackupOn"
    ISOLATED = "Isolated"
    SHUTDOWN = "Shutdown"

    @property
    def level(self) -> int:
        """Rank on the ladder (Normal = 0)."""
        return list(Mitigation).index(self)


# Minimum response each severity requires
SEVERITY_MITIGATION = {
    Severity.LOW: Mitigation.BACKUP_ON,
    Severity.HIGH: Mitigation.ISOLATED,
    Severity.CRITICAL: Mitigation.SHUTDOWN,
}
HIGH_SCORE = 0.9
CRITICAL_SCORE = 0.99


class NodeId(BaseModel):
    """Layer plus index within the layer, written ``SCADA:0``."""

    model_config = ConfigDict(frozen=True)

    layer: Layer
    index: int = Field(default=0, ge=0)

    def __str__(self) -> str:
        """``<layer>:<index>``."""
        return f"{self.layer.value}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        """Parse ``SCADA:0`` (a bare layer name means index 0)."""
        layer, _, index = text.strip().partition(":")
        return cls(layer=Layer(layer), index=int(index) if index else 0)


class Alert(BaseModel):
    """Detection raised by a node and shared with the mesh."""

    model_config = ConfigDict(frozen=True)

    alert_id: str
    origin: NodeId
    detected_at: int = Field(ge=0, description="logical tick")
    score: float = Field(ge=0.0, le=1.0, description="ransomware score")
    severity: Severity


@dataclass(frozen=True)
class NodeState:
    """Detection node: its model and scaler plus the mitigation state machine."""

    node_id: NodeId
    threshold: float = 0.5
    model: ModelParams | None = None
    scaler: ScalerParams | None = None
    mitigation: Mitigation = Mitigation.NORMAL
    seen_alerts: frozenset[str] = field(default_factory=frozenset)


class BusConfig(BaseModel):
    """Unreliable unicast bus with acknowledgments and retransmission."""

    model_config = ConfigDict(frozen=True)

    latency: int = Field(default=1, ge=1, description="ticks per hop")
    drop_probability: float = Field(default=0.0, ge=0.0, le=1.0)
    max_retries: int = Field(default=3, ge=0)
    ack_timeout: int = Field(default=3, ge=1, description="ticks")
    seed: int = 7

    @model_validator(mode="after")
    def check_timeout(self) -> "BusConfig":
        """The timeout must outlast a data+ack round trip."""
        if self.ack_timeout <= 2 * self.latency:
            msg = (
                f"ack_timeout ({self.ack_timeout}) must exceed the round trip "
                f"2*latency ({2 * self.latency})"
            )
            raise ValueError(msg)
        return self


class MeshConfig(BaseModel):
    """Mesh topology and detection policy."""

    model_config = ConfigDict(frozen=True)

    nodes_per_layer: int = Field(default=1, ge=1)
    threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    propagation: Literal["global", "downstream"] = "global"


class ScenarioRecord(BaseModel):
    """Sample injected at ``node`` at ``tick``; ``ref`` is a trace path or ``row:N``."""

    model_config = ConfigDict(frozen=True)

    tick: int = Field(ge=0)
    node: NodeId
    ref: str = Field(min_length=1)


class EventType(str, Enum):
    """Transcript event kinds."""

    INGEST = "ingest"
    ALERT = "alert"
    SEND = "send"
    DROP = "drop"
    DELIVER = "deliver"
    DUPLICATE = "duplicate"
    ACK = "ack"
    ACK_DROP = "ack_drop"
    TIMEOUT = "timeout"
    GIVE_UP = "give_up"
    MITIGATION = "mitigation"


class TranscriptEvent(BaseModel):
    """One transcript row."""

    model_config = ConfigDict(frozen=True)

    tick: int
    seq: int
    event_type: EventType
    node: str
    alert_id: str = ""
    detail: str = ""


class MeshTranscript(BaseModel):
    """Everything that happened in a mesh run, plus the final mitigation levels."""

    events: list[TranscriptEvent] = Field(default_factory=list)
    final_mitigation: dict[str, Mitigation] = Field(default_factory=dict)

    def of_type(self, event_type: EventType) -> list[TranscriptEvent]:
        """Events of one kind, in order."""
        return [e for e in self.events if e.event_type is event_type]
