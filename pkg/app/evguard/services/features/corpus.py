"""Synthetic labelled corpus standing in for collected ransomware/benign traces.

Each sample draws a trace length, a group-level instruction profile and a
split of every group count over the group's mnemonics. Ransomware-like
profiles lean on logical and shift instructions, normal-like ones on data
transfer and control flow. ``separation`` blends each class profile with a
shared random profile: 1 keeps the class profiles (disjoint supports on the
logical group), 0 leaves only the shared profile (identical classes).
"""

import logging
from pathlib import Path

import numpy as np

from app.evguard.schemas.errors import ConfigurationError, DatasetFormatError
from app.evguard.schemas.features import (
    NORMAL_LABEL,
    RANSOMWARE_LABEL,
    Dataset,
    FeatureLayout,
)
from app.evguard.services.features.layout import load_layout

logger = logging.getLogger(__name__)

DEFAULT_N_RANSOMWARE = 561
DEFAULT_N_NORMAL = 447
DEFAULT_SEPARATION = 0.9

MIN_TRACE_LENGTH = 2000
MAX_TRACE_LENGTH = 4000
PROFILE_CONCENTRATION = 50.0
GROUP_JITTER = 0.15
UNLISTED_GROUP_WEIGHT = 0.02
UNKNOWN_MNEMONIC = "ud2"

# Group-level instruction mix (fractions of the trace length)
SHARED_PROFILE = {
    "data_transfer": 0.34,
    "arithmetic": 0.18,
    "logical": 0.08,
    "shift": 0.03,
    "control_transfer": 0.22,
    "string": 0.03,
    "stack": 0.10,
    "misc": 0.02,
}
RANSOMWARE_PROFILE = {
    "data_transfer": 0.20,
    "arithmetic": 0.17,
    "logical": 0.28,
    "shift": 0.12,
    "control_transfer": 0.12,
    "string": 0.04,
    "stack": 0.05,
    "misc": 0.02,
}
NORMAL_PROFILE = {
    "data_transfer": 0.40,
    "arithmetic": 0.15,
    "logical": 0.04,
    "shift": 0.02,
    "control_transfer": 0.24,
    "string": 0.03,
    "stack": 0.10,
    "misc": 0.02,
}


def _profile_vector(profile: dict[str, float], layout: FeatureLayout) -> np.ndarray:
    weights = np.array(
        [profile.get(group, UNLISTED_GROUP_WEIGHT) for group in layout.group_slots]
    )
    return weights / weights.sum()


def _unknown_mnemonic(layout: FeatureLayout) -> str:
    token = UNKNOWN_MNEMONIC
    while token in layout.group_of:
        token += "x"
    return token


def _group_members(layout: FeatureLayout, group: str) -> tuple[list[str], np.ndarray]:
    """Emittable mnemonics of a group with Zipf-like weights, slotted ones first."""
    slotted, group_only = layout.members(group)
    members = slotted + group_only
    if group == layout.catch_all:
        members.append(_unknown_mnemonic(layout))
    weights = 1.0 / np.arange(1, len(members) + 1)
    return members, weights / weights.sum()


def _draw_class(
    rng: np.random.Generator,
    n: int,
    class_profile: np.ndarray,
    shared: np.ndarray,
    separation: float,
    layout: FeatureLayout,
) -> np.ndarray:
    lengths = rng.integers(MIN_TRACE_LENGTH, MAX_TRACE_LENGTH + 1, size=n)
    mixed = rng.dirichlet(PROFILE_CONCENTRATION * shared, size=n)
    profiles = separation * class_profile + (1.0 - separation) * mixed
    jitter = rng.uniform(1.0 - GROUP_JITTER, 1.0 + GROUP_JITTER, size=profiles.shape)
    group_counts = np.rint(lengths[:, None] * profiles * jitter).astype(np.int64)

    features = np.zeros((n, layout.dim), dtype=np.float64)
    slots = layout.slot_index()
    group_index = layout.group_index()
    for g, group in enumerate(layout.group_slots):
        members, weights = _group_members(layout, group)
        split = rng.multinomial(group_counts[:, g], weights)
        for m, mnemonic in enumerate(members):
            slot = slots.get(mnemonic)
            if slot is not None:
                features[:, slot] = split[:, m]
        features[:, group_index[group]] = group_counts[:, g]
    return features


def synth_corpus(
    n_ransomware: int = DEFAULT_N_RANSOMWARE,
    n_normal: int = DEFAULT_N_NORMAL,
    layout: FeatureLayout | None = None,
    separation: float = DEFAULT_SEPARATION,
    seed: int = 7,
) -> Dataset:
    """Generate a raw-count dataset from two class-conditional distributions.

    Args:
        n_ransomware: Rows labelled 0
        n_normal: Rows labelled 1
        layout: Slot layout (defaults to the packaged manifest)
        separation: 0 (identical classes) .. 1 (disjoint supports)
        seed: Generator seed; equal seeds give equal datasets

    Returns:
        Dataset with rows shuffled across classes

    Raises:
        ConfigurationError: If a count is not positive or separation is outside [0, 1]

    """
    if n_ransomware <= 0 or n_normal <= 0:
        msg = f"Class sizes must be positive, got {n_ransomware}/{n_normal}"
        raise ConfigurationError(msg)
    if not 0.0 <= separation <= 1.0:
        msg = f"separation must lie in [0, 1], got {separation}"
        raise ConfigurationError(msg)
    if layout is None:
        layout = load_layout()

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    shared = _profile_vector(SHARED_PROFILE, layout)
    ransomware = _draw_class(
        rng, n_ransomware, _profile_vector(RANSOMWARE_PROFILE, layout), shared, separation, layout
    )
    normal = _draw_class(
        rng, n_normal, _profile_vector(NORMAL_PROFILE, layout), shared, separation, layout
    )
    features = np.vstack([ransomware, normal])
    labels = np.concatenate(
        [
            np.full(n_ransomware, RANSOMWARE_LABEL, dtype=np.int64),
            np.full(n_normal, NORMAL_LABEL, dtype=np.int64),
        ]
    )
    order = rng.permutation(len(labels))
    dataset = Dataset(features=features[order], labels=labels[order], layout=layout)
    msg = (
        f"Synthesized corpus: {n_ransomware} ransomware + {n_normal} normal rows "
        f"(separation={separation:g}, seed={seed})"
    )
    logger.info(msg)
    return dataset


def synth_traces(
    dataset: Dataset, out_dir: str | Path, seed: int = 7
) -> list[Path]:
    """Expand raw-count rows into trace files that featurize back to the same counts.

    Files go to ``out_dir/ransomware`` and ``out_dir/normal`` as
    ``sample_<row>.trace``; instruction order is a seeded shuffle.

    Args:
        dataset: Raw-count dataset (non-negative integers)
        out_dir: Corpus directory
        seed: Shuffle seed

    Returns:
        Written paths in row order

    Raises:
        DatasetFormatError: If a row is not a consistent raw-count vector

    """
    layout = dataset.layout
    features = dataset.features
    if (features < 0).any() or not np.array_equal(features, np.rint(features)):
        msg = "Trace synthesis needs raw non-negative integer counts"
        raise DatasetFormatError(msg)

    out_dir = Path(out_dir)
    class_dirs = {RANSOMWARE_LABEL: out_dir / "ransomware", NORMAL_LABEL: out_dir / "normal"}
    for directory in class_dirs.values():
        directory.mkdir(parents=True, exist_ok=True)

    slot_groups = [layout.group_of[m] for m in layout.mnemonic_slots]
    group_index = layout.group_index()
    fillers = {}
    for group in layout.group_slots:
        _, group_only = layout.members(group)
        if group == layout.catch_all:
            group_only = [*group_only, _unknown_mnemonic(layout)]
        fillers[group] = group_only

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    width = len(str(max(len(dataset) - 1, 0)))
    paths = []
    for row, (values, label) in enumerate(zip(features, dataset.labels, strict=True)):
        mnemonics: list[str] = []
        residual = {group: int(values[group_index[group]]) for group in layout.group_slots}
        for slot, mnemonic in enumerate(layout.mnemonic_slots):
            count = int(values[slot])
            mnemonics.extend([mnemonic] * count)
            residual[slot_groups[slot]] -= count
        for group, remaining in residual.items():
            if remaining < 0 or (remaining > 0 and not fillers[group]):
                msg = f"Group {group!r} count cannot be expressed as a trace"
                raise DatasetFormatError(msg, row=row + 1, column=f"f{group_index[group]}")
            members = fillers[group]
            for i in range(remaining):
                mnemonics.append(members[i % len(members)])
        order = rng.permutation(len(mnemonics))
        lines = [f"# synthetic trace, row {row}, label {int(label)}"]
        lines.extend(mnemonics[i] for i in order)
        path = class_dirs[int(label)] / f"sample_{row:0{width}d}.trace"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)

    msg = f"Wrote {len(paths)} synthetic trace files under {out_dir}"
    logger.info(msg)
    return paths
