"""Unit tests for the BES plant simulation."""

import numpy as np
import pytest

from app.evguard.schemas.attacks import DdosAttack, NoAttack
from app.evguard.schemas.errors import ConfigurationError
from app.evguard.schemas.plant import Mode, SimConfig, SocTrace, ThresholdPair
from app.evguard.services.plant_simulator import (
    build_sim_config,
    controller_decide,
    engagement_mode,
    extract_edges,
    plant_step,
    read_trace_csv,
    run_simulation,
    write_trace_csv,
)

pytestmark = pytest.mark.unit

BAND = ThresholdPair(low=35.0, high=80.0)
WINDOW = (50.0, 150.0)


class TestControllerDecide:
    """Test the hysteresis decision rule."""

    def test_discharges_above_high(self):
        """SOC above the high threshold inside the window commands Discharging."""
        assert controller_decide(85.0, BAND, 100.0, WINDOW, Mode.CHARGING) is Mode.DISCHARGING

    def test_charges_below_low(self):
        """SOC below the low threshold commands Charging."""
        assert controller_decide(30.0, BAND, 60.0, WINDOW, Mode.DISCHARGING) is Mode.CHARGING

    def test_holds_inside_band(self):
        """No command inside the hysteresis band."""
        assert controller_decide(50.0, BAND, 100.0, WINDOW, Mode.CHARGING) is None

    def test_silent_outside_window(self):
        """No command before the control window opens."""
        assert controller_decide(85.0, BAND, 20.0, WINDOW, Mode.CHARGING) is None

    def test_duplicate_command_suppressed(self):
        """Re-issuing the mode already commanded yields no command."""
        assert controller_decide(85.0, BAND, 100.0, WINDOW, Mode.DISCHARGING) is None

    def test_saturation_counts_as_crossing(self):
        """A full battery switches even when the high threshold is 100."""
        wide = ThresholdPair(low=0.0, high=100.0)
        assert controller_decide(100.0, wide, 100.0, WINDOW, Mode.CHARGING) is Mode.DISCHARGING


class TestPlantStep:
    """Test the linear SOC integrator."""

    def test_linear_charge(self):
        """Charging adds rate * dt."""
        cfg = SimConfig(charge_rate=2.5, dt=0.1)
        assert plant_step(50.0, Mode.CHARGING, cfg) == pytest.approx(50.25)

    def test_clamped_at_full(self):
        """Charging never exceeds 100 %."""
        cfg = SimConfig(charge_rate=2.5, dt=0.1)
        assert plant_step(99.9, Mode.CHARGING, cfg) == 100.0

    def test_idle_is_identity(self):
        """Idle leaves SOC unchanged."""
        assert plant_step(50.0, Mode.IDLE, SimConfig()) == 50.0

    def test_clamped_at_empty(self):
        """Discharging never goes below 0 %."""
        assert plant_step(0.05, Mode.DISCHARGING, SimConfig()) == 0.0


class TestRunSimulation:
    """Test whole simulation runs."""

    def test_deterministic(self, tmp_path):
        """Two attack-free runs serialize to identical bytes."""
        first, _ = run_simulation()
        second, _ = run_simulation()
        a = write_trace_csv(first, tmp_path / "a.csv")
        b = write_trace_csv(second, tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_zero_delay_is_identity(self):
        """DDoS with zero delay reproduces the attack-free trace exactly."""
        reference, ref_edges = run_simulation(None, NoAttack())
        attacked, att_edges = run_simulation(None, DdosAttack(delay_s=0.0))
        assert reference == attacked
        assert ref_edges == att_edges

    def test_grid_and_bounds(self):
        """Samples sit on k*dt and every SOC lies in [0, 100]."""
        cfg = SimConfig()
        trace, _ = run_simulation(cfg)
        assert len(trace) == 6001
        assert np.allclose(np.diff(trace.times), cfg.dt)
        assert trace.soc.min() >= 0.0
        assert trace.soc.max() <= 100.0

    def test_idle_before_window(self):
        """The BES idles until the control window opens."""
        trace, _ = run_simulation()
        before = trace.times < 50.0 - 1e-9
        assert all(m is Mode.IDLE for m, b in zip(trace.modes, before, strict=True) if b)
        assert np.all(trace.soc[before] == 78.0)

    def test_first_edge_near_high_threshold(self):
        """Defaults put the first edge at t ~ 52 s, SOC ~ 80 %."""
        _, edges = run_simulation()
        assert edges[0].time == pytest.approx(52.0, abs=0.11)
        assert edges[0].soc == pytest.approx(80.0, abs=0.11)
        assert edges[0].to_mode is Mode.DISCHARGING

    def test_edges_alternate_and_hug_thresholds(self):
        """Edges alternate direction and sit within one step of their threshold."""
        cfg = SimConfig()
        _, edges = run_simulation(cfg)
        assert 1 < len(edges) <= 5
        for previous, current in zip(edges, edges[1:], strict=False):
            assert previous.to_mode is current.from_mode
        for edge in edges:
            target = cfg.thresholds.high if edge.to_mode is Mode.DISCHARGING else cfg.thresholds.low
            assert abs(edge.soc - target) <= cfg.charge_rate * cfg.dt + 1e-9

    def test_high_start_engages_discharging_under_ddos(self):
        """A battery above the high band drains at the window instead of overcharging."""
        cfg = SimConfig(initial_soc=95.0)
        trace, edges = run_simulation(cfg, DdosAttack(delay_s=60.0))
        at_open = int(np.argmin(np.abs(trace.times - cfg.window_start)))
        assert trace.modes[at_open] is Mode.DISCHARGING
        assert trace.soc.max() == pytest.approx(95.0)
        assert edges[0].from_mode is Mode.DISCHARGING
        assert edges[0].to_mode is Mode.CHARGING
        assert edges[0].time > 160.0

    @pytest.mark.parametrize(
        ("soc", "expected"),
        [(95.0, Mode.DISCHARGING), (78.0, Mode.CHARGING), (10.0, Mode.CHARGING)],
    )
    def test_engagement_follows_band(self, soc, expected):
        """Engagement discharges above the high threshold and charges otherwise."""
        assert engagement_mode(soc, BAND) is expected

    def test_invalid_config_rejected(self):
        """An inverted control window is a configuration error."""
        with pytest.raises(ConfigurationError, match="window_end"):
            run_simulation({"window_start": 150.0, "window_end": 50.0})

    def test_build_sim_config_passthrough(self):
        """A SimConfig instance is returned as is."""
        cfg = SimConfig(dt=0.5)
        assert build_sim_config(cfg) is cfg


class TestExtractEdges:
    """Test edge extraction on hand-made traces."""

    @staticmethod
    def _trace(modes: list[Mode]) -> SocTrace:
        times = np.arange(len(modes), dtype=np.float64) * 10.0
        soc = np.linspace(40.0, 60.0, len(modes))
        return SocTrace(times=times, soc=soc, modes=tuple(modes))

    def test_constant_mode(self):
        """A trace without transitions has no edges."""
        trace = self._trace([Mode.CHARGING] * 5)
        assert extract_edges(trace, (0.0, 100.0)) == []

    def test_truncated_to_five(self):
        """Seven transitions yield the first five, in time order."""
        modes = [Mode.CHARGING, Mode.DISCHARGING] * 4
        edges = extract_edges(self._trace(modes), (0.0, 1000.0))
        assert len(edges) == 5
        assert [e.time for e in edges] == sorted(e.time for e in edges)
        assert edges[0].time == 10.0

    def test_edges_kept_after_window_closes(self):
        """Edges before the window are dropped; edges after it closes are kept."""
        modes = [Mode.CHARGING, Mode.DISCHARGING, Mode.CHARGING, Mode.DISCHARGING]
        edges = extract_edges(self._trace(modes), (15.0, 20.0))
        assert [e.time for e in edges] == [20.0, 30.0]

    def test_idle_engagement_is_not_an_edge(self):
        """Leaving Idle is not a threshold crossing."""
        trace = self._trace([Mode.IDLE, Mode.CHARGING, Mode.DISCHARGING])
        edges = extract_edges(trace, (0.0, 100.0))
        assert len(edges) == 1
        assert edges[0].from_mode is Mode.CHARGING


class TestTraceCsv:
    """Test trace CSV persistence."""

    def test_round_trip(self, tmp_path):
        """A written trace reads back identical."""
        trace, _ = run_simulation()
        path = write_trace_csv(trace, tmp_path / "trace.csv")
        assert read_trace_csv(path) == trace
        assert path.read_text().splitlines()[0] == "time,soc,mode"
