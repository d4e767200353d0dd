"""Layout manifest loading.

Manifest format (``#`` starts a comment)::

    [groups]
    data_transfer
    misc *            <- catch-all group
    [slots]
    mov,data_transfer
    [group-only]
    aesenc,logical
"""

from functools import lru_cache
from pathlib import Path

from pydantic import ValidationError

from app.evguard.core.config import settings
from app.evguard.schemas.errors import DatasetFormatError, ErrorCode
from app.evguard.schemas.features import FeatureLayout

SECTIONS = ("groups", "slots", "group-only")
CATCH_ALL_MARKER = "*"


def parse_layout(text: str, source: str = "<manifest>") -> FeatureLayout:
    """Parse manifest text into a FeatureLayout.

    Args:
        text: Manifest contents
        source: Name used in error messages

    Returns:
        Validated FeatureLayout

    Raises:
        DatasetFormatError: On unknown sections, malformed lines or an invalid layout

    """
    section: str | None = None
    groups: list[str] = []
    catch_all: str | None = None
    slots: list[str] = []
    group_of: dict[str, str] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                msg = f"{source}: unknown section [{section}]"
                raise DatasetFormatError(msg, row=line_no)
            continue
        if section is None:
            msg = f"{source}: entry outside any section"
            raise DatasetFormatError(msg, row=line_no)
        if section == "groups":
            name, _, marker = line.partition(" ")
            groups.append(name.strip())
            if marker.strip() == CATCH_ALL_MARKER:
                catch_all = name.strip()
            continue
        mnemonic, sep, group = line.partition(",")
        if not sep or not mnemonic.strip() or not group.strip():
            msg = f"{source}: expected 'mnemonic,group', got {line!r}"
            raise DatasetFormatError(msg, row=line_no)
        mnemonic = mnemonic.strip().lower()
        if mnemonic in group_of:
            msg = f"{source}: mnemonic {mnemonic!r} listed twice"
            raise DatasetFormatError(msg, row=line_no)
        group_of[mnemonic] = group.strip()
        if section == "slots":
            slots.append(mnemonic)

    try:
        return FeatureLayout(
            mnemonic_slots=tuple(slots),
            group_slots=tuple(groups),
            group_of=group_of,
            catch_all=catch_all or (groups[-1] if groups else "misc"),
        )
    except ValidationError as e:
        msg = f"{source}: invalid layout: {e.errors()[0]['msg']}"
        raise DatasetFormatError(msg, error_code=ErrorCode.LAYOUT_MISMATCH) from e


def load_layout(path: str | Path | None = None) -> FeatureLayout:
    """Load a layout manifest (defaults to the packaged one)."""
    path = Path(path) if path is not None else Path(settings.layout_path)
    return _load_layout_cached(path.resolve())


@lru_cache(maxsize=8)
def _load_layout_cached(path: Path) -> FeatureLayout:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        msg = f"Cannot read layout manifest {path}: {e}"
        raise DatasetFormatError(msg) from e
    return parse_layout(text, source=str(path))
