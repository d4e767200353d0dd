"""Ransomware-driven attack injection and impact quantification.

Two attack paths are modeled on top of the plant simulation:

- DDoS: every SCADA command travels through a ``DelayChannel`` that holds it
  for a fixed latency before the field switches act on it.
- FDI: the thresholds the controller compares SOC against are replaced.

``impact_report`` compares an attacked run against the attack-free reference.
"""

import json
import logging
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.evguard.schemas.attacks import (
    DdosAttack,
    FdiAttack,
    ImpactReport,
    NoAttack,
    ThresholdViolation,
    attack_scenario_adapter,
)
from app.evguard.schemas.errors import ConfigurationError, GridMismatchError, ScenarioError
from app.evguard.schemas.plant import Mode, SimConfig, SocTrace, ThresholdPair, TransitionEdge

logger = logging.getLogger(__name__)

# Sample times are k*dt; send_time + delay may land one ulp past the grid point.
TIME_EPS = 1e-9


@dataclass
class DelayChannel:
    """FIFO command path that delivers each command ``delay`` seconds after it was sent."""

    delay: float = 0.0
    queue: deque[tuple[float, Mode]] = field(default_factory=deque)

    def send(self, send_time: float, command: Mode) -> None:
        """Put a command in flight."""
        self.queue.append((send_time, command))

    def deliver(self, now: float) -> Mode | None:
        """Pop the oldest command whose delivery time has been reached.

        Args:
            now: Current simulation time; must not decrease across calls

        Returns:
            The delivered command, or None while everything is still in flight

        """
        if self.queue and self.queue[0][0] + self.delay <= now + TIME_EPS:
            return self.queue.popleft()[1]
        return None

    def in_flight(self) -> list[tuple[float, Mode]]:
        """Commands not yet delivered, oldest first."""
        return list(self.queue)

    def drain(self, horizon: float) -> list[tuple[float, Mode]]:
        """Drop every command that cannot be delivered by ``horizon``.

        Args:
            horizon: Last simulated time

        Returns:
            The dropped (send_time, command) pairs

        """
        dropped = [
            (sent, command)
            for sent, command in self.queue
            if sent + self.delay > horizon + TIME_EPS
        ]
        self.queue.clear()
        if dropped:
            msg = (
                f"Dropped {len(dropped)} command(s) undeliverable before "
                f"t={horizon:g}s (delay {self.delay:g}s)"
            )
            logger.warning(msg)
        return dropped


def apply_fdi(cfg: SimConfig, injected: ThresholdPair | tuple[float, float]) -> SimConfig:
    """Return ``cfg`` with its thresholds replaced by the injected pair.

    Args:
        cfg: Legitimate simulation configuration
        injected: Thresholds written by the attacker, as a pair or (low, high) tuple

    Returns:
        A new SimConfig; every other field is unchanged

    Raises:
        ConfigurationError: If the injected pair violates 0 <= low < high <= 100

    """
    if not isinstance(injected, ThresholdPair):
        try:
            low, high = injected
            injected = ThresholdPair(low=low, high=high)
        except (ValidationError, TypeError, ValueError) as e:
            msg = f"Invalid injected thresholds {injected!r}: {e}"
            raise ConfigurationError(msg) from e
    return cfg.model_copy(update={"thresholds": injected})


def _recharges(trace: SocTrace, start: float) -> bool:
    """Whether a Discharging->Charging switch takes effect at or after ``start``."""
    modes = trace.modes
    return any(
        modes[k - 1] is Mode.DISCHARGING
        and modes[k] is Mode.CHARGING
        and trace.times[k] >= start - TIME_EPS
        for k in range(1, len(modes))
    )


def _charging_after_window(trace: SocTrace, window_end: float, high: float) -> bool:
    """Whether Charging is in effect at any post-window sample with SOC below high."""
    return any(
        t >= window_end - TIME_EPS and mode is Mode.CHARGING and soc < high
        for t, soc, mode in zip(trace.times, trace.soc, trace.modes, strict=True)
    )


def _relative_pct(attacked: float, reference: float) -> float:
    if reference == 0.0:
        # A zero reference has no relative scale; fall back to points of full scale.
        return attacked - reference
    return 100.0 * (attacked - reference) / reference


def impact_report(
    reference: tuple[SocTrace, list[TransitionEdge]],
    attacked: tuple[SocTrace, list[TransitionEdge]],
    thresholds: ThresholdPair,
    window: tuple[float, float] = (50.0, 150.0),
) -> ImpactReport:
    """Quantify how far an attacked run departs from the reference run.

    Edges are paired by index. Threshold violations are samples inside the
    control window where SOC sits beyond a legitimate threshold while the mode
    in effect still pushes it outward, i.e. where the un-attacked controller
    would already have reversed.

    Args:
        reference: (trace, edges) of the attack-free run
        attacked: (trace, edges) of the attacked run
        thresholds: Legitimate controller thresholds
        window: Control window (start, end) of the runs

    Returns:
        ImpactReport with per-edge delay/overshoot percentages

    Raises:
        GridMismatchError: If the traces were not sampled on the same time grid

    """
    ref_trace, ref_edges = reference
    att_trace, att_edges = attacked
    if not np.array_equal(ref_trace.times, att_trace.times):
        msg = (
            f"Traces use different time grids ({len(ref_trace)} vs "
            f"{len(att_trace)} samples)"
        )
        raise GridMismatchError(msg)

    matched = min(len(ref_edges), len(att_edges))
    edge_delay_pct = [
        100.0 * (att_edges[i].time - ref_edges[i].time) / ref_edges[i].time
        for i in range(matched)
    ]
    soc_overshoot_pct = [
        _relative_pct(att_edges[i].soc, ref_edges[i].soc) for i in range(matched)
    ]

    start, end = window
    violations = []
    for t, soc, mode in zip(att_trace.times, att_trace.soc, att_trace.modes, strict=True):
        if not start - TIME_EPS <= t <= end + TIME_EPS:
            continue
        if soc > thresholds.high and mode is Mode.CHARGING:
            violations.append(ThresholdViolation(time=t, soc=soc, which_threshold="high"))
        elif soc < thresholds.low and mode is Mode.DISCHARGING:
            violations.append(ThresholdViolation(time=t, soc=soc, which_threshold="low"))

    starved = (
        not _charging_after_window(att_trace, end, thresholds.high)
        and not _recharges(att_trace, start)
        and _recharges(ref_trace, start)
    )

    report = ImpactReport(
        edge_delay_pct=edge_delay_pct,
        soc_overshoot_pct=soc_overshoot_pct,
        threshold_violations=violations,
        starved=starved,
    )
    msg = (
        f"Impact: {matched} matched edges, {len(violations)} threshold violations, "
        f"starved={starved}"
    )
    logger.info(msg)
    return report


def realized_swing(trace: SocTrace, start: float = 0.0) -> float:
    """Peak-to-trough SOC excursion over samples at or after ``start``."""
    mask = trace.times >= start - TIME_EPS
    if not mask.any():
        return 0.0
    window_soc = trace.soc[mask]
    return float(window_soc.max() - window_soc.min())


# ============================================================================
# Scenario documents
# ============================================================================


def parse_attack_scenario(document: Mapping[str, Any]) -> NoAttack | DdosAttack | FdiAttack:
    """Build an AttackScenario from a flat ``type/delay_s/low/high`` document.

    Raises:
        ScenarioError: If the document is malformed

    """
    kind = str(document.get("type", "none")).lower()
    payload: dict[str, Any] = {"type": kind}
    if kind == "ddos":
        payload["delay_s"] = document.get("delay_s", 0.0)
    elif kind == "fdi":
        payload["thresholds"] = {"low": document.get("low"), "high": document.get("high")}
    try:
        return attack_scenario_adapter.validate_python(payload)
    except ValidationError as e:
        msg = f"Invalid attack scenario {dict(document)!r}: {e.errors()[0]['msg']}"
        raise ScenarioError(msg) from e


def load_attack_scenario(path: str | Path) -> NoAttack | DdosAttack | FdiAttack:
    """Read a JSON scenario file."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        msg = f"Cannot read attack scenario {path}: {e}"
        raise ScenarioError(msg) from e
    if not isinstance(document, dict):
        msg = f"Attack scenario {path} must be a JSON object"
        raise ScenarioError(msg)
    return parse_attack_scenario(document)


def scenario_document(attack: NoAttack | DdosAttack | FdiAttack) -> dict[str, Any]:
    """Flat document form of a scenario (inverse of ``parse_attack_scenario``)."""
    document: dict[str, Any] = {"type": attack.type, "delay_s": None, "low": None, "high": None}
    if isinstance(attack, DdosAttack):
        document["delay_s"] = attack.delay_s
    elif isinstance(attack, FdiAttack):
        document["low"] = attack.low
        document["high"] = attack.high
    return document


def write_impact_csv(report: ImpactReport, path: str | Path) -> Path:
    """Write one row per matched edge plus a ``<name>_summary.json`` record.

    Returns:
        Path of the CSV file

    """
    path = Path(path)
    frame = pd.DataFrame(
        {
            "edge_index": range(report.matched_edges),
            "edge_delay_pct": report.edge_delay_pct,
            "soc_overshoot_pct": report.soc_overshoot_pct,
        }
    )
    frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    summary_path = path.with_name(f"{path.stem}_summary.json")
    summary_path.write_text(json.dumps(report.summary(), indent=2) + "\n", encoding="utf-8")
    return path
