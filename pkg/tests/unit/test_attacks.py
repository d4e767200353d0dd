"""Unit tests for attack injection, impact reports and sweeps."""

import json

import pytest

from app.evguard.schemas.attacks import DdosAttack, FdiAttack, NoAttack
from app.evguard.schemas.errors import ConfigurationError, GridMismatchError, ScenarioError
from app.evguard.schemas.plant import Mode, SimConfig, ThresholdPair
from app.evguard.services.attack_sweeps import ddos_sweep, fdi_sweep
from app.evguard.services.attacks import (
    DelayChannel,
    apply_fdi,
    impact_report,
    load_attack_scenario,
    parse_attack_scenario,
    realized_swing,
    scenario_document,
    write_impact_csv,
)
from app.evguard.services.plant_simulator import run_simulation

pytestmark = pytest.mark.unit


class TestDelayChannel:
    """Test the FIFO command delay channel."""

    def test_zero_delay_delivers_immediately(self):
        """With no delay a command is delivered at its send time."""
        channel = DelayChannel(delay=0.0)
        channel.send(52.0, Mode.DISCHARGING)
        assert channel.deliver(52.0) is Mode.DISCHARGING

    def test_delay_holds_command(self):
        """A 60 s delay releases the command at the first step >= send + 60."""
        channel = DelayChannel(delay=60.0)
        channel.send(52.0, Mode.DISCHARGING)
        assert channel.deliver(111.9) is None
        assert channel.deliver(112.0) is Mode.DISCHARGING
        assert channel.in_flight() == []

    def test_fifo_order(self):
        """Commands come out in the order they were sent."""
        channel = DelayChannel(delay=10.0)
        channel.send(0.0, Mode.CHARGING)
        channel.send(1.0, Mode.DISCHARGING)
        assert channel.deliver(20.0) is Mode.CHARGING
        assert channel.deliver(20.0) is Mode.DISCHARGING

    def test_drain_drops_past_horizon(self):
        """A command due after the horizon is dropped."""
        channel = DelayChannel(delay=300.0)
        channel.send(140.0, Mode.CHARGING)
        assert channel.drain(horizon=400.0) == [(140.0, Mode.CHARGING)]
        assert channel.in_flight() == []


class TestApplyFdi:
    """Test threshold injection."""

    def test_replaces_thresholds_only(self):
        """Only the thresholds change."""
        cfg = SimConfig()
        injected = apply_fdi(cfg, (10.0, 90.0))
        assert injected.thresholds == ThresholdPair(low=10.0, high=90.0)
        assert injected.model_copy(update={"thresholds": cfg.thresholds}) == cfg

    def test_baseline_tuple_is_unchanged_behaviour(self):
        """Injecting the legitimate (35, 80) reproduces the baseline run."""
        reference = run_simulation(SimConfig(), NoAttack())
        attacked = run_simulation(apply_fdi(SimConfig(), (35.0, 80.0)))
        assert reference[0] == attacked[0]

    def test_inverted_pair_rejected(self):
        """(80, 35) violates low < high."""
        with pytest.raises(ConfigurationError):
            apply_fdi(SimConfig(), (80.0, 35.0))

    def test_full_range_swing(self):
        """(0, 100) drives SOC to both physical bounds."""
        trace, _ = run_simulation(None, FdiAttack(thresholds=ThresholdPair(low=0.0, high=100.0)))
        assert trace.soc.max() == 100.0
        assert trace.soc.min() == 0.0


class TestImpactReport:
    """Test attacked-vs-reference comparisons."""

    def test_self_comparison_is_zero(self):
        """Comparing a run with itself gives zero deltas and no violations."""
        run = run_simulation()
        report = impact_report(run, run, SimConfig().thresholds)
        assert report.edge_delay_pct == [0.0] * report.matched_edges
        assert report.soc_overshoot_pct == [0.0] * report.matched_edges
        assert report.threshold_violations == []
        assert report.starved is False

    def test_sixty_second_delay(self):
        """A 60 s delay shifts the first edge by 60/52 and overshoots by 20/80."""
        reference = run_simulation()
        attacked = run_simulation(None, DdosAttack(delay_s=60.0))
        report = impact_report(reference, attacked, SimConfig().thresholds)
        assert report.edge_delay_pct[0] == pytest.approx(100.0 * 60.0 / 52.0, abs=0.3)
        assert report.soc_overshoot_pct[0] == pytest.approx(25.0, abs=0.2)
        assert report.threshold_violations
        assert all(v.which_threshold == "high" for v in report.threshold_violations[:1])

    @pytest.mark.parametrize("delay", [60.0, 120.0, 180.0, 240.0, 300.0])
    def test_overshoot_matches_rate_times_delay(self, delay):
        """First-edge overshoot equals min(rate * d, 100 - high) within one step."""
        cfg = SimConfig()
        _, ref_edges = run_simulation(cfg)
        _, att_edges = run_simulation(cfg, DdosAttack(delay_s=delay))
        expected = min(cfg.charge_rate * delay, 100.0 - cfg.thresholds.high)
        assert att_edges[0].soc - ref_edges[0].soc == pytest.approx(expected, abs=0.1 + 1e-9)

    def test_unclamped_overshoot_is_exact(self):
        """Short delays overshoot by exactly rate * d."""
        cfg = SimConfig()
        _, ref_edges = run_simulation(cfg)
        for delay in (5.0, 10.0, 15.0):
            _, att_edges = run_simulation(cfg, DdosAttack(delay_s=delay))
            assert att_edges[0].soc - ref_edges[0].soc == pytest.approx(delay, abs=1e-6)

    def test_severity_monotone_in_delay(self):
        """Edge delay and overshoot never decrease with the delay."""
        reference = run_simulation()
        delays, overshoots = [], []
        for delay in (0.0, 60.0, 120.0, 180.0, 240.0, 300.0):
            attacked = run_simulation(None, DdosAttack(delay_s=delay))
            report = impact_report(reference, attacked, SimConfig().thresholds)
            delays.append(report.edge_delay_pct[0])
            overshoots.append(abs(report.soc_overshoot_pct[0]))
        assert delays == sorted(delays)
        assert delays[0] == 0.0
        assert overshoots == sorted(overshoots)

    def test_five_minute_delay_starves(self):
        """A 300 s delay leaves SOC above the low threshold with no recharge."""
        cfg = SimConfig(duration=400.0)
        reference = run_simulation(cfg)
        attacked = run_simulation(cfg, DdosAttack(delay_s=300.0))
        report = impact_report(reference, attacked, cfg.thresholds)
        assert report.starved is True
        trace, _ = attacked
        after = trace.times >= cfg.window_end
        assert trace.soc[after].min() > cfg.thresholds.low
        assert not any(
            m is Mode.CHARGING and s < cfg.thresholds.high
            for m, s, a in zip(trace.modes, trace.soc, after, strict=True)
            if a
        )

    def test_grid_mismatch(self):
        """Traces on different grids cannot be compared."""
        reference = run_simulation(SimConfig())
        attacked = run_simulation(SimConfig(dt=0.2))
        with pytest.raises(GridMismatchError):
            impact_report(reference, attacked, SimConfig().thresholds)

    def test_write_impact_csv(self, tmp_path):
        """The CSV has one row per matched edge plus a JSON summary."""
        reference = run_simulation()
        report = impact_report(
            reference, run_simulation(None, DdosAttack(delay_s=60.0)), SimConfig().thresholds
        )
        path = write_impact_csv(report, tmp_path / "impact.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "edge_index,edge_delay_pct,soc_overshoot_pct"
        assert len(lines) == report.matched_edges + 1
        summary = json.loads((tmp_path / "impact_summary.json").read_text())
        assert summary["matched_edges"] == report.matched_edges


class TestScenarioDocuments:
    """Test JSON attack scenario documents."""

    def test_parse_each_type(self):
        """Flat documents map onto the three scenario types."""
        assert parse_attack_scenario({"type": "none"}) == NoAttack()
        assert parse_attack_scenario({"type": "ddos", "delay_s": 120}) == DdosAttack(delay_s=120.0)
        fdi = parse_attack_scenario({"type": "fdi", "low": 5, "high": 95})
        assert fdi.thresholds == ThresholdPair(low=5.0, high=95.0)

    def test_document_inverse(self):
        """scenario_document inverts parse_attack_scenario."""
        attack = FdiAttack(thresholds=ThresholdPair(low=10.0, high=90.0))
        assert parse_attack_scenario(scenario_document(attack)) == attack

    def test_delay_above_five_minutes_rejected(self):
        """DDoS delays are limited to 0..300 s."""
        with pytest.raises(ScenarioError):
            parse_attack_scenario({"type": "ddos", "delay_s": 301})

    def test_load_rejects_non_object(self, tmp_path):
        """A JSON array is not a scenario."""
        path = tmp_path / "scenario.json"
        path.write_text("[1, 2]")
        with pytest.raises(ScenarioError, match="JSON object"):
            load_attack_scenario(path)


class TestSweeps:
    """Test the delay and threshold sweeps."""

    def test_fdi_swing_strictly_increases(self):
        """Wider injected thresholds give strictly larger realized swings."""
        result = fdi_sweep()
        swings = [run.swing for run in result.runs]
        assert all(a < b for a, b in zip(swings, swings[1:], strict=False))
        assert swings[-1] == 100.0

    def test_ddos_sweep_outputs(self, tmp_path):
        """The delay sweep writes a wide SOC frame and a summary frame."""
        result = ddos_sweep()
        paths = result.write(tmp_path, "ddos")
        assert [p.name for p in paths] == ["ddos_soc.csv", "ddos_summary.csv"]
        header = paths[0].read_text().splitlines()[0].split(",")
        assert header == ["time", "soc_0", "soc_1", "soc_2", "soc_3", "soc_4", "soc_5"]
        assert len(result.summary_frame()) == 6

    def test_realized_swing_of_flat_trace(self):
        """A run that never leaves Idle before ``start`` has no swing before it."""
        trace, _ = run_simulation()
        assert realized_swing(trace, start=10_000.0) == 0.0
