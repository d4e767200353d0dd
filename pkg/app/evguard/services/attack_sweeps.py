"""Attack sweeps: delay penetration (SOC_0..SOC_5) and FDI threshold tuples.

Each sweep runs the attack-free reference once, one attacked run per setting,
and emits plot-ready wide CSVs (time vs. SOC per scenario).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from app.evguard.schemas.attacks import DdosAttack, FdiAttack, ImpactReport, NoAttack
from app.evguard.schemas.plant import SimConfig, SocTrace, ThresholdPair, TransitionEdge
from app.evguard.services.attacks import impact_report, realized_swing
from app.evguard.services.plant_simulator import run_simulation

logger = logging.getLogger(__name__)

DEFAULT_DELAYS_S: tuple[float, ...] = (0.0, 60.0, 120.0, 180.0, 240.0, 300.0)
DEFAULT_FDI_TUPLES: tuple[tuple[float, float], ...] = (
    (35.0, 80.0),
    (10.0, 90.0),
    (5.0, 95.0),
    (0.0, 100.0),
)


@dataclass(frozen=True)
class ScenarioRun:
    """One attacked run of a sweep and its comparison against the reference."""

    label: str
    attack: NoAttack | DdosAttack | FdiAttack
    trace: SocTrace
    edges: list[TransitionEdge]
    report: ImpactReport
    swing: float


@dataclass(frozen=True)
class SweepResult:
    """Reference run plus one ScenarioRun per sweep setting."""

    reference: tuple[SocTrace, list[TransitionEdge]]
    runs: list[ScenarioRun]

    def plot_frame(self) -> pd.DataFrame:
        """Wide frame: ``time`` then one SOC column per scenario label."""
        ref_trace, _ = self.reference
        columns = {"time": ref_trace.times}
        for run in self.runs:
            columns[run.label] = run.trace.soc
        return pd.DataFrame(columns)

    def summary_frame(self) -> pd.DataFrame:
        """One summary row per scenario."""
        rows = []
        for run in self.runs:
            row = {"scenario": run.label, "realized_swing": run.swing}
            row.update(run.report.summary())
            rows.append(row)
        return pd.DataFrame(rows)

    def write(self, out_dir: str | Path, prefix: str) -> list[Path]:
        """Write ``<prefix>_soc.csv`` and ``<prefix>_summary.csv`` into ``out_dir``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        soc_path = out_dir / f"{prefix}_soc.csv"
        summary_path = out_dir / f"{prefix}_summary.csv"
        self.plot_frame().to_csv(
            soc_path, index=False, float_format="%.12g", lineterminator="\n"
        )
        self.summary_frame().to_csv(
            summary_path, index=False, float_format="%.12g", lineterminator="\n"
        )
        return [soc_path, summary_path]


def _run_against_reference(
    cfg: SimConfig,
    reference: tuple[SocTrace, list[TransitionEdge]],
    label: str,
    attack: DdosAttack | FdiAttack,
) -> ScenarioRun:
    trace, edges = run_simulation(cfg, attack)
    report = impact_report(reference, (trace, edges), cfg.thresholds, cfg.window)
    return ScenarioRun(
        label=label,
        attack=attack,
        trace=trace,
        edges=edges,
        report=report,
        swing=realized_swing(trace, cfg.window_start),
    )


def ddos_sweep(
    cfg: SimConfig | None = None, delays_s: Sequence[float] = DEFAULT_DELAYS_S
) -> SweepResult:
    """Run the reference plus one DDoS run per delay; labels are ``soc_<minutes>``."""
    cfg = cfg or SimConfig()
    reference = run_simulation(cfg, NoAttack())
    runs = []
    for delay in delays_s:
        label = f"soc_{delay / 60.0:g}"
        runs.append(
            _run_against_reference(cfg, reference, label, DdosAttack(delay_s=delay))
        )
    msg = f"DDoS sweep finished over delays {list(delays_s)}"
    logger.info(msg)
    return SweepResult(reference=reference, runs=runs)


def fdi_sweep(
    cfg: SimConfig | None = None,
    tuples: Sequence[tuple[float, float]] = DEFAULT_FDI_TUPLES,
) -> SweepResult:
    """Run the reference plus one FDI run per injected (low, high) tuple."""
    cfg = cfg or SimConfig()
    reference = run_simulation(cfg, NoAttack())
    runs = []
    for index, (low, high) in enumerate(tuples):
        attack = FdiAttack(thresholds=ThresholdPair(low=low, high=high))
        runs.append(_run_against_reference(cfg, reference, f"soc_{index}", attack))
    msg = f"FDI sweep finished over tuples {list(tuples)}"
    logger.info(msg)
    return SweepResult(reference=reference, runs=runs)
