"""Unit tests for detection nodes, the alert bus and mesh scenarios."""

import numpy as np
import pandas as pd
import pytest

from app.evguard.schemas.errors import (
    ConfigurationError,
    DatasetFormatError,
    ErrorCode,
    ScenarioError,
)
from app.evguard.schemas.mesh import (
    Alert,
    BusConfig,
    EventType,
    Layer,
    MeshConfig,
    Mitigation,
    NodeId,
    NodeState,
    Severity,
)
from app.evguard.schemas.neuralnet import DnnSpec, ModelParams
from app.evguard.services.features import fit_scaler
from app.evguard.services.mesh import (
    SampleResolver,
    broadcast,
    build_mesh,
    handle_alert,
    ingest_sample,
    parse_scenario,
    run_mesh_sim,
    severity_for,
    write_transcript_csv,
)
from app.evguard.services.neuralnet import build

pytestmark = pytest.mark.unit

SCADA = NodeId(layer=Layer.SCADA)
CAEV = NodeId(layer=Layer.CAEV)


def _probe_model() -> ModelParams:
    """Model whose P(normal) is expit(4 - 12 * x[0]).

    x[0] = 0 scores as benign (ransomware score ~0.02), 0.5 as Low (~0.88) and
    1 as Critical (~0.9997).
    """
    params = build(DnnSpec(hidden=(1,), l1=0.0, l2=0.0), 0)
    tensors = {name: np.zeros_like(t) for name, t in params}
    tensors["dense1.weight"][0, 0] = 1.0
    tensors["output.weight"][0, 0] = -12.0
    tensors["output.bias"][0] = 4.0
    return params.replace(tensors)


def _vector(x0: float) -> np.ndarray:
    vector = np.zeros(140)
    vector[0] = x0
    return vector


SAMPLES = {"benign": _vector(0.0), "low": _vector(0.5), "critical": _vector(1.0)}


def _alert(alert_id: str, severity: Severity, origin: NodeId = SCADA, tick: int = 0) -> Alert:
    score = {Severity.LOW: 0.6, Severity.HIGH: 0.95, Severity.CRITICAL: 0.999}[severity]
    return Alert(alert_id=alert_id, origin=origin, detected_at=tick, score=score, severity=severity)


@pytest.fixture
def mesh():
    """One node per layer, lossless defaults, sharing the probe model."""
    return build_mesh(MeshConfig(propagation="global"), model=_probe_model())


class TestSeverityAndStateMachine:
    """Test severity bands and the mitigation ladder."""

    @pytest.mark.parametrize(
        ("score", "severity"),
        [
            (0.5, Severity.LOW),
            (0.8999, Severity.LOW),
            (0.9, Severity.HIGH),
            (0.98, Severity.HIGH),
            (0.99, Severity.CRITICAL),
            (1.0, Severity.CRITICAL),
        ],
    )
    def test_bands(self, score, severity):
        """Low below 0.9, High below 0.99, Critical above."""
        assert severity_for(score) is severity

    def test_idempotent(self):
        """Handling the same alert twice equals handling it once."""
        node = NodeState(node_id=CAEV)
        alert = _alert("a", Severity.HIGH)
        once = handle_alert(node, alert)
        assert once.mitigation is Mitigation.ISOLATED
        assert handle_alert(once, alert) is once

    def test_escalation_is_monotonic(self):
        """Critical shuts down and a later Low alert does not de-escalate."""
        node = handle_alert(NodeState(node_id=CAEV), _alert("a", Severity.LOW))
        assert node.mitigation is Mitigation.BACKUP_ON
        node = handle_alert(node, _alert("b", Severity.CRITICAL))
        assert node.mitigation is Mitigation.SHUTDOWN
        node = handle_alert(node, _alert("c", Severity.LOW))
        assert node.mitigation is Mitigation.SHUTDOWN
        assert node.seen_alerts == {"a", "b", "c"}

    def test_input_state_untouched(self):
        """handle_alert returns a new state."""
        node = NodeState(node_id=CAEV)
        handle_alert(node, _alert("a", Severity.CRITICAL))
        assert node.mitigation is Mitigation.NORMAL
        assert node.seen_alerts == frozenset()


class TestIngest:
    """Test online scoring at a node."""

    @pytest.fixture
    def node(self):
        """SCADA node with the probe model and the default threshold."""
        return NodeState(node_id=SCADA, model=_probe_model())

    def test_benign_raises_nothing(self, node):
        """A low ransomware score produces no alert."""
        assert ingest_sample(node, SAMPLES["benign"], now=3) is None

    def test_critical_alert(self, node):
        """A high score becomes a Critical alert stamped with the tick."""
        alert = ingest_sample(node, SAMPLES["critical"], now=3, sequence=2)
        assert alert.severity is Severity.CRITICAL
        assert alert.origin == SCADA
        assert alert.detected_at == 3
        assert alert.alert_id == "SCADA:0@3#2"

    def test_low_alert(self, node):
        """A score between the threshold and 0.9 is Low."""
        assert ingest_sample(node, SAMPLES["low"], now=0).severity is Severity.LOW

    def test_wrong_length(self, node):
        """A 139-value vector is rejected."""
        with pytest.raises(DatasetFormatError) as excinfo:
            ingest_sample(node, np.zeros(139), now=0)
        assert excinfo.value.error_code == ErrorCode.SHAPE_MISMATCH

    def test_unscaled_vector(self, node):
        """Raw counts outside [0, 1] are rejected."""
        with pytest.raises(DatasetFormatError) as excinfo:
            ingest_sample(node, _vector(25.0), now=0)
        assert excinfo.value.error_code == ErrorCode.INVALID_CELL

    def test_no_model(self):
        """A node without a model cannot score."""
        with pytest.raises(ConfigurationError):
            ingest_sample(NodeState(node_id=SCADA), SAMPLES["benign"], now=0)


class TestBroadcast:
    """Test alert delivery over the bus."""

    def test_lossless_delivery(self, mesh):
        """Every other node gets exactly one delivery, one latency after detection."""
        events = broadcast(mesh, _alert("a", Severity.CRITICAL, tick=10))
        delivers = [e for e in events if e.event_type is EventType.DELIVER]
        assert sorted(e.node for e in delivers) == ["CAEV:0", "EVSENetwork:0", "GenTransDist:0"]
        assert all(e.tick == 11 for e in delivers)
        assert len([e for e in events if e.event_type is EventType.ACK]) == 3
        assert not [e for e in events if e.event_type is EventType.TIMEOUT]

    def test_mesh_not_modified(self, mesh):
        """Broadcasting works on a copy of the node states."""
        broadcast(mesh, _alert("a", Severity.CRITICAL))
        assert all(node.mitigation is Mitigation.NORMAL for node in mesh.nodes.values())

    def test_total_loss_gives_up(self, mesh):
        """drop=1, retries=3: four sends per target, no delivery, one give-up each."""
        bus = BusConfig(drop_probability=1.0, max_retries=3)
        events = broadcast(mesh, _alert("a", Severity.HIGH), bus)
        for target in ("GenTransDist:0", "EVSENetwork:0", "CAEV:0"):
            sends = [
                e for e in events if e.event_type is EventType.SEND and f"to={target} " in e.detail
            ]
            assert len(sends) == 4
        assert not [e for e in events if e.event_type is EventType.DELIVER]
        give_ups = [e for e in events if e.event_type is EventType.GIVE_UP]
        assert len(give_ups) == 3
        assert all("attempts=4" in e.detail for e in give_ups)

    def test_retransmission_reaches_everyone(self):
        """With drop 0.2 and 10 retries, all 99 targets receive the alert."""
        mesh = build_mesh(MeshConfig(nodes_per_layer=25), model=_probe_model())
        bus = BusConfig(drop_probability=0.2, max_retries=10, seed=11)
        events = broadcast(mesh, _alert("a", Severity.LOW), bus)
        delivered = {e.node for e in events if e.event_type is EventType.DELIVER}
        assert len(delivered) == 99
        sends = [e for e in events if e.event_type is EventType.SEND]
        drops = [e for e in events if e.event_type is EventType.DROP]
        assert 0.08 < len(drops) / len(sends) < 0.34

    @pytest.mark.parametrize("seed", range(100))
    def test_heavy_loss_with_many_retries(self, mesh, seed):
        """Drop 0.5 with 50 retries reaches every node, each changing state once."""
        bus = BusConfig(drop_probability=0.5, max_retries=50, seed=seed)
        events = broadcast(mesh, _alert("a", Severity.CRITICAL), bus)
        delivered = {e.node for e in events if e.event_type is EventType.DELIVER}
        assert delivered == {"GenTransDist:0", "EVSENetwork:0", "CAEV:0"}
        mitigations = [e for e in events if e.event_type is EventType.MITIGATION]
        assert sorted(e.node for e in mitigations) == sorted(delivered)

    @pytest.mark.parametrize(("drop", "retries"), [(0.2, 10), (0.5, 1)])
    def test_failure_rate_matches_binomial(self, mesh, drop, retries):
        """Undelivered targets over 1000 seeds stay within 3 sigma of drop ** (retries + 1)."""
        trials = 1000
        targets = {"GenTransDist:0", "EVSENetwork:0", "CAEV:0"}
        failures = 0
        for seed in range(trials):
            bus = BusConfig(drop_probability=drop, max_retries=retries, seed=seed)
            events = broadcast(mesh, _alert(f"a{seed}", Severity.HIGH), bus)
            delivered = {e.node for e in events if e.event_type is EventType.DELIVER}
            failures += len(targets - delivered)
        n = trials * len(targets)
        p = drop ** (retries + 1)
        sigma = np.sqrt(n * p * (1.0 - p))
        assert abs(failures - n * p) <= 3.0 * sigma + 1e-9

    def test_unknown_origin(self, mesh):
        """An alert from outside the mesh is rejected."""
        stranger = NodeId(layer=Layer.CAEV, index=7)
        with pytest.raises(ScenarioError):
            broadcast(mesh, _alert("a", Severity.LOW, origin=stranger))

    def test_downstream_propagation(self):
        """Downstream mode only reaches the origin's layer and those below it."""
        mesh = build_mesh(MeshConfig(propagation="downstream"), model=_probe_model())
        origin = NodeId(layer=Layer.GEN_TRANS_DIST)
        assert mesh.targets(origin) == ["EVSENetwork:0", "CAEV:0"]
        assert mesh.targets(CAEV) == []

    def test_timeout_must_cover_round_trip(self):
        """ack_timeout <= 2 * latency is rejected."""
        with pytest.raises(ValueError, match="round trip"):
            BusConfig(latency=2, ack_timeout=4)


class TestScenario:
    """Test scenario parsing and sample resolution."""

    def test_parse(self):
        """Header and comments are skipped; records are ordered by tick."""
        records = parse_scenario(
            "tick,node,ref\n# warm-up\n5,CAEV:0,row:3\n\n1,SCADA,traces/a.trace\n5,SCADA:0,row:1\n"
        )
        assert [(r.tick, str(r.node), r.ref) for r in records] == [
            (1, "SCADA:0", "traces/a.trace"),
            (5, "CAEV:0", "row:3"),
            (5, "SCADA:0", "row:1"),
        ]

    @pytest.mark.parametrize("line", ["1,SCADA:0", "x,SCADA:0,row:1", "1,Satellite:0,row:1"])
    def test_malformed_line(self, line):
        """A bad line is reported with its number."""
        with pytest.raises(ScenarioError, match="line 2"):
            parse_scenario(f"# comment\n{line}\n")

    def test_resolver_rows(self, scaled_corpus, layout):
        """row:N returns dataset row N; out-of-range rows are rejected."""
        resolver = SampleResolver(layout=layout, dataset=scaled_corpus)
        assert np.array_equal(resolver.resolve("row:4"), scaled_corpus.features[4])
        with pytest.raises(ScenarioError):
            resolver.check(f"row:{len(scaled_corpus)}")
        with pytest.raises(ScenarioError):
            resolver.check("row:abc")

    def test_resolver_trace_file(self, tmp_path, small_corpus, layout):
        """A trace path is featurized and scaled with the node scaler."""
        (tmp_path / "sample.trace").write_text("mov eax, 1\nxor eax, eax\n")
        scaler = fit_scaler(small_corpus, "minmax")
        resolver = SampleResolver(layout=layout, scaler=scaler, base_dir=tmp_path)
        resolver.check("sample.trace")
        vector = resolver.resolve("sample.trace")
        assert vector.shape == (140,)
        assert vector.min() >= 0.0
        assert vector.max() <= 1.0
        with pytest.raises(ScenarioError, match="not found"):
            resolver.check("missing.trace")


class TestRunMeshSim:
    """Test whole scenario runs."""

    def test_empty_scenario(self):
        """No injections: no events, every node Normal, models not required."""
        transcript = run_mesh_sim([], build_mesh(MeshConfig()), samples={})
        assert transcript.events == []
        assert set(transcript.final_mitigation.values()) == {Mitigation.NORMAL}

    def test_critical_sample_shuts_everything_down(self, mesh):
        """A critical detection at SCADA escalates the whole mesh."""
        scenario = parse_scenario("0,SCADA:0,critical\n")
        transcript = run_mesh_sim(scenario, mesh, samples=SAMPLES)
        assert set(transcript.final_mitigation.values()) == {Mitigation.SHUTDOWN}
        assert [e.event_type for e in transcript.events[:3]] == [
            EventType.INGEST,
            EventType.ALERT,
            EventType.MITIGATION,
        ]
        assert [e.seq for e in transcript.events] == list(range(len(transcript.events)))

    def test_benign_sample(self, mesh):
        """A benign sample is ingested and nothing else happens."""
        transcript = run_mesh_sim(parse_scenario("0,CAEV:0,benign\n"), mesh, samples=SAMPLES)
        assert [e.event_type for e in transcript.events] == [EventType.INGEST]

    def test_mixed_severities(self, mesh):
        """A Low alert then a Critical one: every node ends at Shutdown, none goes back."""
        scenario = parse_scenario("0,CAEV:0,low\n20,EVSENetwork:0,critical\n")
        transcript = run_mesh_sim(scenario, mesh, samples=SAMPLES)
        assert set(transcript.final_mitigation.values()) == {Mitigation.SHUTDOWN}
        for node in mesh.nodes:
            levels = [
                e.detail
                for e in transcript.of_type(EventType.MITIGATION)
                if e.node == node
            ]
            assert levels[0].startswith("Normal->")
            assert levels[-1].endswith("->Shutdown")

    def test_replay_is_deterministic(self, mesh):
        """Equal bus seeds give identical transcripts; the input mesh is untouched."""
        scenario = parse_scenario("0,SCADA:0,critical\n2,CAEV:0,low\n")
        bus = BusConfig(drop_probability=0.3, max_retries=5, seed=9)
        first = run_mesh_sim(scenario, mesh, bus, samples=SAMPLES)
        second = run_mesh_sim(scenario, mesh, bus, samples=SAMPLES)
        assert first == second
        assert all(node.mitigation is Mitigation.NORMAL for node in mesh.nodes.values())

    def test_unknown_node(self, mesh):
        """Injecting at a node outside the mesh fails before running."""
        with pytest.raises(ScenarioError, match="unknown node"):
            run_mesh_sim(parse_scenario("0,CAEV:3,low\n"), mesh, samples=SAMPLES)

    def test_unknown_sample(self, mesh):
        """A ref missing from the sample mapping fails before running."""
        with pytest.raises(ScenarioError, match="not available"):
            run_mesh_sim(parse_scenario("0,CAEV:0,nothing\n"), mesh, samples=SAMPLES)

    def test_missing_models(self):
        """A non-empty scenario needs a model on every node."""
        with pytest.raises(ConfigurationError, match="without a trained model"):
            run_mesh_sim(parse_scenario("0,CAEV:0,low\n"), build_mesh(MeshConfig()), samples=SAMPLES)

    def test_transcript_csv(self, tmp_path, mesh):
        """The transcript CSV carries one row per event."""
        transcript = run_mesh_sim(parse_scenario("0,SCADA:0,critical\n"), mesh, samples=SAMPLES)
        path = write_transcript_csv(transcript, tmp_path / "transcript.csv")
        frame = pd.read_csv(path, keep_default_na=False)
        assert list(frame.columns) == ["tick", "seq", "event_type", "node", "alert_id", "detail"]
        assert len(frame) == len(transcript.events)
        assert frame["event_type"].iloc[0] == "ingest"
