"""Mesh scenario files and sample resolution.

A scenario is line oriented, ``tick,node,ref``; ``#`` comments, blank lines and
an optional ``tick,node,ref`` header are ignored. ``ref`` is either ``row:N``
(row N of a scaled dataset) or the path of an instruction-trace file, relative
to the scenario file.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.evguard.schemas.errors import EvguardError, ScenarioError
from app.evguard.schemas.features import Dataset, FeatureLayout, ScalerParams
from app.evguard.schemas.mesh import NodeId, ScenarioRecord
from app.evguard.services.features.featurizer import featurize
from app.evguard.services.features.scaler import apply_scaler
from app.evguard.services.features.traces import read_trace_file

HEADER = ("tick", "node", "ref")
ROW_PREFIX = "row:"


def parse_scenario(text: str) -> list[ScenarioRecord]:
    """Parse scenario text into records ordered by tick (file order within a tick).

    Raises:
        ScenarioError: On a malformed line, naming its line number

    """
    records: list[ScenarioRecord] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [cell.strip() for cell in line.split(",", 2)]
        if tuple(cell.lower() for cell in cells) == HEADER:
            continue
        if len(cells) != len(HEADER):
            msg = f"scenario line {line_no}: expected 'tick,node,ref', got {line!r}"
            raise ScenarioError(msg)
        tick, node, ref = cells
        try:
            records.append(ScenarioRecord(tick=int(tick), node=NodeId.parse(node), ref=ref))
        except (ValueError, ValidationError) as e:
            msg = f"scenario line {line_no}: {e}"
            raise ScenarioError(msg) from e
    return sorted(records, key=lambda r: r.tick)


def load_scenario(path: str | Path) -> list[ScenarioRecord]:
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        msg = f"Cannot read scenario {path}: {e}"
        raise ScenarioError(msg) from e
    return parse_scenario(text)


@dataclass
class SampleResolver:
    """Turns scenario refs into scaled feature vectors."""

    layout: FeatureLayout
    scaler: ScalerParams | None = None
    dataset: Dataset | None = None
    base_dir: Path = Path()

    def check(self, ref: str) -> None:
        """Fail early on a ref that cannot be resolved.

        Raises:
            ScenarioError: If the row is out of range or the trace file is missing

        """
        if ref.startswith(ROW_PREFIX):
            self._row_index(ref)
        elif not (self.base_dir / ref).is_file():
            msg = f"trace file {ref!r} not found under {self.base_dir}"
            raise ScenarioError(msg)

    def _row_index(self, ref: str) -> int:
        try:
            row = int(ref[len(ROW_PREFIX) :])
        except ValueError as e:
            msg = f"bad row reference {ref!r}"
            raise ScenarioError(msg) from e
        if self.dataset is None or not 0 <= row < len(self.dataset):
            size = 0 if self.dataset is None else len(self.dataset)
            msg = f"row reference {ref!r} outside a dataset of {size} rows"
            raise ScenarioError(msg)
        return row

    def resolve(self, ref: str) -> np.ndarray:
        """Scaled vector for a ref (dataset rows are taken as already scaled)."""
        if ref.startswith(ROW_PREFIX):
            return self.dataset.features[self._row_index(ref)]
        try:
            raw = featurize(read_trace_file(self.base_dir / ref), self.layout).values
        except (OSError, EvguardError) as e:
            msg = f"cannot featurize {ref!r}: {e}"
            raise ScenarioError(msg) from e
        return raw if self.scaler is None else apply_scaler(self.scaler, raw)
