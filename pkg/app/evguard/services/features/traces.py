"""Instruction-trace parsing.

Traces are line oriented; the first whitespace-delimited token of a line is
the mnemonic. Blank lines and ``#`` comments are ignored.
"""

import logging
import re
from collections.abc import Iterable
from pathlib import Path

from app.evguard.schemas.features import InstructionTrace

logger = logging.getLogger(__name__)

MNEMONIC_PATTERN = re.compile(r"^[a-z][a-z0-9_.]*$")


def parse_trace(text: str | Iterable[str]) -> InstructionTrace:
    """Parse trace text into lower-cased mnemonics.

    Args:
        text: Whole trace as a string, or any iterable of lines (e.g. an open file)

    Returns:
        InstructionTrace; lines whose first token is not a mnemonic are skipped
        and counted in ``skipped_lines``

    """
    lines = text.splitlines() if isinstance(text, str) else text
    mnemonics: list[str] = []
    skipped = 0
    append = mnemonics.append
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        token = stripped.split(None, 1)[0].lower()
        if MNEMONIC_PATTERN.match(token):
            append(token)
        else:
            skipped += 1
    if skipped:
        msg = f"Skipped {skipped} unparseable trace line(s)"
        logger.warning(msg)
    return InstructionTrace(mnemonics=mnemonics, skipped_lines=skipped)


def read_trace_file(path: str | Path) -> InstructionTrace:
    """Parse a trace file, streaming it line by line."""
    with Path(path).open(encoding="utf-8", errors="replace") as handle:
        return parse_trace(handle)
