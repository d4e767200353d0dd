"""Opcode-frequency featurization of instruction traces."""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from app.evguard.schemas.errors import DatasetFormatError
from app.evguard.schemas.features import (
    NORMAL_LABEL,
    RANSOMWARE_LABEL,
    Dataset,
    FeatureLayout,
    FeatureVector,
    InstructionTrace,
)
from app.evguard.services.features.traces import read_trace_file

logger = logging.getLogger(__name__)

# Sub-directory name -> label for labelled trace corpora
CLASS_DIRECTORIES = {"ransomware": RANSOMWARE_LABEL, "normal": NORMAL_LABEL}
TRACE_SUFFIXES = (".trace", ".txt", ".log")


def count_vector(mnemonics: Counter[str], layout: FeatureLayout) -> np.ndarray:
    """Raw-count vector from a mnemonic histogram."""
    values = np.zeros(layout.dim, dtype=np.float64)
    slots = layout.slot_index()
    groups = layout.group_index()
    for mnemonic, count in mnemonics.items():
        slot = slots.get(mnemonic)
        if slot is not None:
            values[slot] += count
        values[groups[layout.group_for(mnemonic)]] += count
    return values


def featurize(trace: InstructionTrace, layout: FeatureLayout) -> FeatureVector:
    """Count slotted mnemonics and instruction groups of a trace.

    Mnemonics without an individual slot only increment their group; mnemonics
    the layout does not know at all increment the catch-all group.

    Args:
        trace: Parsed instruction trace
        layout: Slot layout

    Returns:
        Unlabelled FeatureVector of raw counts

    """
    return FeatureVector(values=count_vector(Counter(trace.mnemonics), layout))


def _trace_files(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix in TRACE_SUFFIXES
    )


def featurize_directory(
    root: str | Path, layout: FeatureLayout, jobs: int = 1
) -> tuple[Dataset, list[Path]]:
    """Featurize a labelled corpus laid out as ``root/ransomware`` and ``root/normal``.

    Files are processed in sorted order within each class directory, ransomware
    first, so the row order is reproducible.

    Args:
        root: Corpus directory
        layout: Slot layout
        jobs: Worker threads for parsing

    Returns:
        (Dataset of raw counts, source file of each row)

    Raises:
        DatasetFormatError: If no class directory or no trace file is found

    """
    root = Path(root)
    sources: list[tuple[Path, int]] = []
    for name, label in CLASS_DIRECTORIES.items():
        directory = root / name
        if directory.is_dir():
            sources.extend((path, label) for path in _trace_files(directory))
    if not sources:
        msg = f"No trace files under {root}/ransomware or {root}/normal"
        raise DatasetFormatError(msg)

    def _one(path: Path) -> np.ndarray:
        return featurize(read_trace_file(path), layout).values

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(_one, [path for path, _ in sources]))

    dataset = Dataset(
        features=np.vstack(rows),
        labels=np.array([label for _, label in sources], dtype=np.int64),
        layout=layout,
    )
    msg = f"Featurized {len(dataset)} traces from {root}: {dataset.class_counts}"
    logger.info(msg)
    return dataset, [path for path, _ in sources]
