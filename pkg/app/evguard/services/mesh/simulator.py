"""Deterministic logical-time simulation of the detection mesh.

Nodes never share state: an alert reaches another node only as a message on
the bus. The bus is unicast from the origin to each target with an
acknowledgment per delivery. A send without an ack within ``ack_timeout`` ticks
is retried until ``max_retries`` retransmissions are spent. Drops (of data and of
acks) are drawn from one Generator seeded with ``BusConfig.seed``, in event
order, so a run replays bit-exactly.
"""

import heapq
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from app.evguard.core.config import settings
from app.evguard.schemas.errors import ConfigurationError, ScenarioError
from app.evguard.schemas.features import ScalerParams
from app.evguard.schemas.mesh import (
    Alert,
    BusConfig,
    EventType,
    Layer,
    MeshConfig,
    MeshTranscript,
    NodeId,
    NodeState,
    ScenarioRecord,
    TranscriptEvent,
)
from app.evguard.schemas.neuralnet import ModelParams
from app.evguard.services.mesh.node import handle_alert, raise_alert, ransomware_score
from app.evguard.services.mesh.scenario import SampleResolver

logger = logging.getLogger(__name__)

TRANSCRIPT_COLUMNS = ["tick", "seq", "event_type", "node", "alert_id", "detail"]


@dataclass
class Mesh:
    """Node states keyed by ``str(NodeId)``, upstream layers first."""

    config: MeshConfig
    nodes: dict[str, NodeState]

    def targets(self, origin: NodeId) -> list[str]:
        """Nodes an alert from ``origin`` is sent to."""
        keys = []
        for key, node in self.nodes.items():
            if node.node_id == origin:
                continue
            if (
                self.config.propagation == "downstream"
                and node.node_id.layer.position < origin.layer.position
            ):
                continue
            keys.append(key)
        return keys


def build_mesh(
    config: MeshConfig | None = None,
    model: ModelParams | None = None,
    scaler: ScalerParams | None = None,
) -> Mesh:
    """One node per (layer, index), all sharing the same model and scaler.

    Args:
        config: Topology and threshold; the propagation mode defaults to the
            configured ``mesh_propagation``
        model: Trained parameters every node scores with
        scaler: Training-time scaler

    """
    config = config or MeshConfig(propagation=settings.mesh_propagation)
    nodes: dict[str, NodeState] = {}
    for layer in Layer:
        for index in range(config.nodes_per_layer):
            node_id = NodeId(layer=layer, index=index)
            nodes[str(node_id)] = NodeState(
                node_id=node_id, threshold=config.threshold, model=model, scaler=scaler
            )
    return Mesh(config=config, nodes=nodes)


class _Kind(int, Enum):
    INJECT = 0
    DELIVER = 1
    ACK = 2
    TIMEOUT = 3


@dataclass(order=True)
class _Event:
    tick: int
    seq: int
    kind: _Kind = field(compare=False)
    payload: dict = field(compare=False, default_factory=dict)


class _MeshRun:
    """Event queue plus the node states of one run."""

    def __init__(self, mesh: Mesh, bus: BusConfig) -> None:
        self.mesh = mesh
        self.bus = bus
        self.nodes = dict(mesh.nodes)
        self.rng = np.random.default_rng(bus.seed)
        self.queue: list[_Event] = []
        self.events: list[TranscriptEvent] = []
        self.acked: set[tuple[str, str]] = set()
        self._seq = 0

    def schedule(self, tick: int, kind: _Kind, **payload: object) -> None:
        heapq.heappush(self.queue, _Event(tick, self._seq, kind, payload))
        self._seq += 1

    def log(
        self, tick: int, event_type: EventType, node: str, alert_id: str = "", detail: str = ""
    ) -> None:
        event = TranscriptEvent(
            tick=tick,
            seq=len(self.events),
            event_type=event_type,
            node=node,
            alert_id=alert_id,
            detail=detail,
        )
        self.events.append(event)
        msg = f"t={tick} {event_type.value} {node} {alert_id} {detail}".rstrip()
        logger.debug(msg)

    def _dropped(self) -> bool:
        return bool(self.rng.random() < self.bus.drop_probability)

    def apply(self, tick: int, key: str, alert: Alert) -> None:
        """Hand an alert to a node's state machine and log the outcome."""
        before = self.nodes[key]
        after = handle_alert(before, alert)
        if after is before:
            self.log(tick, EventType.DUPLICATE, key, alert.alert_id)
            return
        self.nodes[key] = after
        if after.mitigation is not before.mitigation:
            detail = f"{before.mitigation.value}->{after.mitigation.value}"
            self.log(tick, EventType.MITIGATION, key, alert.alert_id, detail)

    def broadcast(self, tick: int, alert: Alert) -> None:
        origin = str(alert.origin)
        for target in self.mesh.targets(alert.origin):
            self.send(tick, alert, origin, target, attempt=0)

    def send(self, tick: int, alert: Alert, origin: str, target: str, attempt: int) -> None:
        detail = f"to={target} attempt={attempt}"
        self.log(tick, EventType.SEND, origin, alert.alert_id, detail)
        if self._dropped():
            self.log(tick, EventType.DROP, origin, alert.alert_id, detail)
        else:
            self.schedule(
                tick + self.bus.latency, _Kind.DELIVER, alert=alert, target=target, attempt=attempt
            )
        self.schedule(
            tick + self.bus.ack_timeout, _Kind.TIMEOUT, alert=alert, target=target, attempt=attempt
        )

    def on_deliver(self, tick: int, alert: Alert, target: str, attempt: int) -> None:
        origin = str(alert.origin)
        self.log(
            tick, EventType.DELIVER, target, alert.alert_id, f"from={origin} attempt={attempt}"
        )
        self.apply(tick, target, alert)
        if self._dropped():
            self.log(
                tick, EventType.ACK_DROP, target, alert.alert_id, f"to={origin} attempt={attempt}"
            )
        else:
            self.schedule(
                tick + self.bus.latency, _Kind.ACK, alert=alert, target=target, attempt=attempt
            )

    def on_ack(self, tick: int, alert: Alert, target: str, attempt: int) -> None:
        self.acked.add((alert.alert_id, target))
        detail = f"from={target} attempt={attempt}"
        self.log(tick, EventType.ACK, str(alert.origin), alert.alert_id, detail)

    def on_timeout(self, tick: int, alert: Alert, target: str, attempt: int) -> None:
        if (alert.alert_id, target) in self.acked:
            return
        origin = str(alert.origin)
        if attempt < self.bus.max_retries:
            detail = f"to={target} attempt={attempt}"
            self.log(tick, EventType.TIMEOUT, origin, alert.alert_id, detail)
            self.send(tick, alert, origin, target, attempt + 1)
        else:
            detail = f"to={target} attempts={attempt + 1}"
            self.log(tick, EventType.GIVE_UP, origin, alert.alert_id, detail)

    def on_inject(self, tick: int, record: ScenarioRecord, vector: np.ndarray, number: int) -> None:
        key = str(record.node)
        node = self.nodes[key]
        score = ransomware_score(node, vector)
        self.log(tick, EventType.INGEST, key, detail=f"ref={record.ref} score={score:.6f}")
        alert = raise_alert(node, score, tick, sequence=number)
        if alert is None:
            return
        self.log(
            tick,
            EventType.ALERT,
            key,
            alert.alert_id,
            f"severity={alert.severity.value} score={alert.score:.6f}",
        )
        self.apply(tick, key, alert)
        self.broadcast(tick, alert)

    def run(self) -> None:
        while self.queue:
            event = heapq.heappop(self.queue)
            payload = event.payload
            if event.kind is _Kind.INJECT:
                self.on_inject(event.tick, payload["record"], payload["vector"], payload["number"])
            elif event.kind is _Kind.DELIVER:
                self.on_deliver(event.tick, payload["alert"], payload["target"], payload["attempt"])
            elif event.kind is _Kind.ACK:
                self.on_ack(event.tick, payload["alert"], payload["target"], payload["attempt"])
            else:
                self.on_timeout(event.tick, payload["alert"], payload["target"], payload["attempt"])

    def transcript(self) -> MeshTranscript:
        return MeshTranscript(
            events=self.events,
            final_mitigation={key: node.mitigation for key, node in self.nodes.items()},
        )


def broadcast(mesh: Mesh, alert: Alert, bus: BusConfig | None = None) -> list[TranscriptEvent]:
    """Deliver one alert from its origin to every target node.

    The mesh passed in is not modified; target states evolve on a copy.

    Args:
        mesh: Mesh containing the origin
        alert: Alert raised at ``alert.origin``
        bus: Bus behaviour (defaults to a lossless bus)

    Returns:
        Delivery log: every send, drop, delivery, ack, timeout and give-up with
        its logical tick

    Raises:
        ScenarioError: If the origin is not a mesh node

    """
    if str(alert.origin) not in mesh.nodes:
        msg = f"Alert origin {alert.origin} is not a node of the mesh"
        raise ScenarioError(msg)
    run = _MeshRun(mesh, bus or BusConfig())
    run.broadcast(alert.detected_at, alert)
    run.run()
    return run.events


def _validate(
    scenario: Sequence[ScenarioRecord],
    mesh: Mesh,
    samples: SampleResolver | Mapping[str, np.ndarray],
) -> None:
    for record in scenario:
        if str(record.node) not in mesh.nodes:
            msg = f"Scenario injects at unknown node {record.node} (tick {record.tick})"
            raise ScenarioError(msg)
        if isinstance(samples, SampleResolver):
            samples.check(record.ref)
        elif record.ref not in samples:
            msg = f"Scenario sample {record.ref!r} is not available"
            raise ScenarioError(msg)
    missing = [key for key, node in mesh.nodes.items() if node.model is None]
    if scenario and missing:
        msg = f"Mesh nodes without a trained model: {', '.join(missing)}"
        raise ConfigurationError(msg)


def run_mesh_sim(
    scenario: Sequence[ScenarioRecord],
    mesh: Mesh,
    bus: BusConfig | None = None,
    *,
    samples: SampleResolver | Mapping[str, np.ndarray],
) -> MeshTranscript:
    """Run a scenario of timed sample injections through the mesh.

    Events are processed in (tick, sequence) order. The whole scenario is
    validated and every sample resolved before the first event runs.

    Args:
        scenario: Injection records
        mesh: Nodes with trained models; left unmodified
        bus: Bus behaviour (defaults to a lossless bus)
        samples: Resolves each record's ref to a scaled 140-value vector

    Returns:
        MeshTranscript with every event and the final mitigation per node

    Raises:
        ScenarioError: On an unknown node or an unresolvable sample
        ConfigurationError: If a node has no model

    """
    bus = bus or BusConfig()
    _validate(scenario, mesh, samples)
    resolve = samples.resolve if isinstance(samples, SampleResolver) else samples.__getitem__
    vectors = [np.asarray(resolve(record.ref), dtype=np.float64) for record in scenario]

    run = _MeshRun(mesh, bus)
    ordered = sorted(enumerate(scenario), key=lambda item: item[1].tick)
    for number, (index, record) in enumerate(ordered):
        run.schedule(
            record.tick, _Kind.INJECT, record=record, vector=vectors[index], number=number
        )
    run.run()
    transcript = run.transcript()

    alerts = len(transcript.of_type(EventType.ALERT))
    escalated = sum(1 for m in transcript.final_mitigation.values() if m.level > 0)
    msg = (
        f"Mesh run finished: {len(scenario)} injection(s), {alerts} alert(s), "
        f"{len(transcript.events)} events, {escalated}/{len(mesh.nodes)} nodes escalated"
    )
    logger.info(msg)
    return transcript


def transcript_frame(transcript: MeshTranscript | Sequence[TranscriptEvent]) -> pd.DataFrame:
    """Transcript rows as a DataFrame with the CSV column order."""
    events = transcript.events if isinstance(transcript, MeshTranscript) else transcript
    rows = [
        {
            "tick": e.tick,
            "seq": e.seq,
            "event_type": e.event_type.value,
            "node": e.node,
            "alert_id": e.alert_id,
            "detail": e.detail,
        }
        for e in events
    ]
    return pd.DataFrame(rows, columns=TRANSCRIPT_COLUMNS)


def write_transcript_csv(
    transcript: MeshTranscript | Sequence[TranscriptEvent], path: str | Path
) -> Path:
    """Write ``tick,seq,event_type,node,alert_id,detail`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    transcript_frame(transcript).to_csv(path, index=False, lineterminator="\n")
    return path
