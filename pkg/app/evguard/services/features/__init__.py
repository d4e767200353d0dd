"""Opcode-frequency feature pipeline.

Trace parsing, the 140-slot layout manifest, featurization, scaling, the
synthetic corpus and dataset CSV I/O.
"""

from app.evguard.services.features.corpus import synth_corpus, synth_traces
from app.evguard.services.features.dataset_io import read_csv, write_csv
from app.evguard.services.features.featurizer import featurize, featurize_directory
from app.evguard.services.features.layout import load_layout, parse_layout
from app.evguard.services.features.scaler import apply_scaler, fit_scaler
from app.evguard.services.features.traces import parse_trace, read_trace_file

__all__ = [
    "apply_scaler",
    "featurize",
    "featurize_directory",
    "fit_scaler",
    "load_layout",
    "parse_layout",
    "parse_trace",
    "read_csv",
    "read_trace_file",
    "synth_corpus",
    "synth_traces",
    "write_csv",
]
