"""Layered detection mesh: nodes, unreliable bus and scenario runner."""

from app.evguard.services.mesh.node import (
    handle_alert,
    ingest_sample,
    raise_alert,
    ransomware_score,
    severity_for,
)
from app.evguard.services.mesh.scenario import SampleResolver, load_scenario, parse_scenario
from app.evguard.services.mesh.simulator import (
    Mesh,
    broadcast,
    build_mesh,
    run_mesh_sim,
    transcript_frame,
    write_transcript_csv,
)

__all__ = [
    "Mesh",
    "SampleResolver",
    "broadcast",
    "build_mesh",
    "handle_alert",
    "ingest_sample",
    "load_scenario",
    "parse_scenario",
    "raise_alert",
    "ransomware_score",
    "run_mesh_sim",
    "severity_for",
    "transcript_frame",
    "write_transcript_csv",
]
