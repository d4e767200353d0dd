"""Discrete-time simulation of the BES state of charge under SCADA hysteresis control.

The loop per sample ``t = k*dt``:

1. the controller reads SOC and may issue a command (only inside the window);
2. the command enters the (possibly delayed) command channel;
3. commands due at ``t`` take effect;
4. the sample is recorded and SOC is integrated under the mode in effect.
"""

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.evguard.schemas.attacks import DdosAttack, FdiAttack, NoAttack
from app.evguard.schemas.errors import ConfigurationError, DatasetFormatError
from app.evguard.schemas.plant import (
    SOC_MAX,
    SOC_MIN,
    Mode,
    SimConfig,
    SocTrace,
    ThresholdPair,
    TransitionEdge,
)
from app.evguard.services.attacks import TIME_EPS, DelayChannel, apply_fdi

logger = logging.getLogger(__name__)

MAX_RECORDED_EDGES = 5
TRACE_COLUMNS = ["time", "soc", "mode"]
EDGE_COLUMNS = ["time", "soc", "from", "to"]
FLOAT_FORMAT = "%.17g"


def controller_decide(
    soc: float,
    thresholds: ThresholdPair,
    t: float,
    window: tuple[float, float],
    current_mode: Mode,
) -> Mode | None:
    """Hysteresis decision of the SCADA controller.

    Discharge above the high threshold, charge below the low one, hold inside
    the band or outside the control window. A saturated battery (SOC at 100 or
    0) counts as crossing, so thresholds at the physical bounds still switch.

    Args:
        soc: Measured SOC (%)
        thresholds: Thresholds in force (possibly injected)
        t: Current time (s)
        window: Control window (start, end), inclusive
        current_mode: Mode the controller last commanded

    Returns:
        The command to send, or None when the controller holds

    """
    start, end = window
    if not start - TIME_EPS <= t <= end + TIME_EPS:
        return None
    if soc > thresholds.high or soc >= SOC_MAX:
        command = Mode.DISCHARGING
    elif soc < thresholds.low or soc <= SOC_MIN:
        command = Mode.CHARGING
    else:
        return None
    if command is current_mode:
        return None
    return command


def plant_step(soc: float, mode: Mode, cfg: SimConfig) -> float:
    """Integrate SOC over one timestep, clamped to [0, 100]."""
    if mode is Mode.CHARGING:
        soc += cfg.charge_rate * cfg.dt
    elif mode is Mode.DISCHARGING:
        soc -= cfg.discharge_rate * cfg.dt
    return min(SOC_MAX, max(SOC_MIN, soc))


def engagement_mode(soc: float, thresholds: ThresholdPair) -> Mode:
    """Mode the BES takes on its own when the control window opens."""
    if soc > thresholds.high:
        return Mode.DISCHARGING
    return Mode.CHARGING


def build_sim_config(values: SimConfig | Mapping[str, Any] | None = None) -> SimConfig:
    """Validate a SimConfig, signalling problems as ConfigurationError."""
    if isinstance(values, SimConfig):
        return values
    try:
        return SimConfig.model_validate(dict(values or {}))
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(loc) for loc in first["loc"]) or "config"
        msg = f"Invalid simulation config ({field}): {first['msg']}"
        raise ConfigurationError(msg) from e


def extract_edges(
    trace: SocTrace,
    window: tuple[float, float],
    limit: int = MAX_RECORDED_EDGES,
) -> list[TransitionEdge]:
    """Threshold-driven mode changes, in time order, truncated to ``limit``.

    An edge is recorded at the first sample where the new mode is in effect.
    Only switches between Charging and Discharging count; the BES engaging out
    of Idle is not a threshold crossing. Edges are kept from the window opening
    onward, so a command issued inside the window that a delayed channel lands
    after the window closes is still recorded.

    Args:
        trace: Simulated trace (non-empty)
        window: Control window (start, end)
        limit: Maximum number of edges returned

    Returns:
        List of TransitionEdge, possibly empty

    """
    start, _ = window
    edges: list[TransitionEdge] = []
    modes = trace.modes
    for k in range(1, len(modes)):
        previous, current = modes[k - 1], modes[k]
        if previous is current or Mode.IDLE in (previous, current):
            continue
        if trace.times[k] < start - TIME_EPS:
            continue
        edges.append(
            TransitionEdge(
                time=float(trace.times[k]),
                soc=float(trace.soc[k]),
                from_mode=previous,
                to_mode=current,
            )
        )
        if len(edges) >= limit:
            break
    return edges


def run_simulation(
    cfg: SimConfig | Mapping[str, Any] | None = None,
    attack: NoAttack | DdosAttack | FdiAttack | None = None,
) -> tuple[SocTrace, list[TransitionEdge]]:
    """Simulate the supervised BES, optionally under attack.

    The BES idles until the control window opens, then engages locally in the
    direction the hysteresis band gives its SOC: Discharging above the high
    threshold, Charging otherwise. The engagement is not a SCADA command and
    is never delayed. Outside the window the controller is silent and the plant holds
    the last mode in effect.

    Args:
        cfg: Simulation configuration
        attack: None, DDoS (command delay) or FDI (threshold override)

    Returns:
        (trace, first edges from the window opening, at most five)

    Raises:
        ConfigurationError: If the configuration is invalid

    """
    cfg = build_sim_config(cfg)
    attack = attack or NoAttack()
    if isinstance(attack, FdiAttack):
        cfg = apply_fdi(cfg, attack.thresholds)
    delay = attack.delay_s if isinstance(attack, DdosAttack) else 0.0

    channel = DelayChannel(delay=delay)
    times = cfg.time_grid()
    soc_samples = np.empty(len(times), dtype=np.float64)
    modes: list[Mode] = []

    soc = cfg.initial_soc
    in_effect = Mode.IDLE
    commanded: Mode | None = None
    for k, t in enumerate(times):
        if in_effect is Mode.IDLE and t >= cfg.window_start - TIME_EPS:
            in_effect = engagement_mode(soc, cfg.thresholds)
        command = controller_decide(
            soc, cfg.thresholds, t, cfg.window, commanded or in_effect
        )
        if command is not None:
            channel.send(t, command)
            commanded = command
            msg = f"t={t:.1f}s soc={soc:.2f}% command {command.value}"
            logger.debug(msg)
        while (delivered := channel.deliver(t)) is not None:
            in_effect = delivered
        soc_samples[k] = soc
        modes.append(in_effect)
        soc = plant_step(soc, in_effect, cfg)

    channel.drain(horizon=float(times[-1]))
    trace = SocTrace(times=times, soc=soc_samples, modes=tuple(modes))
    edges = extract_edges(trace, cfg.window)
    msg = (
        f"Simulated {len(trace)} samples under attack={attack.type}: "
        f"{len(edges)} edges recorded"
    )
    logger.info(msg)
    return trace, edges


# ============================================================================
# CSV serialization
# ============================================================================


def trace_frame(trace: SocTrace) -> pd.DataFrame:
    """Trace as a DataFrame with columns time, soc, mode."""
    return pd.DataFrame(
        {
            "time": trace.times,
            "soc": trace.soc,
            "mode": [m.value for m in trace.modes],
        },
        columns=TRACE_COLUMNS,
    )


def write_trace_csv(trace: SocTrace, path: str | Path) -> Path:
    """Write ``time,soc,mode`` CSV with round-trippable floats."""
    path = Path(path)
    trace_frame(trace).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def read_trace_csv(path: str | Path) -> SocTrace:
    """Read a trace written by ``write_trace_csv``."""
    frame = pd.read_csv(path, dtype={"mode": str})
    if list(frame.columns) != TRACE_COLUMNS:
        msg = f"Trace CSV header must be {','.join(TRACE_COLUMNS)}"
        raise DatasetFormatError(msg)
    try:
        modes = tuple(Mode(m) for m in frame["mode"])
    except ValueError as e:
        msg = f"Unknown mode in trace CSV: {e}"
        raise DatasetFormatError(msg, column="mode") from e
    return SocTrace(
        times=frame["time"].to_numpy(dtype=np.float64),
        soc=frame["soc"].to_numpy(dtype=np.float64),
        modes=modes,
    )


def write_edges_csv(edges: list[TransitionEdge], path: str | Path) -> Path:
    """Write ``time,soc,from,to`` CSV."""
    path = Path(path)
    frame = pd.DataFrame(
        [(e.time, e.soc, e.from_mode.value, e.to_mode.value) for e in edges],
        columns=EDGE_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
