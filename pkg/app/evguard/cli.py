"""Command-line entry point of the testbed.

Usage:
    evguard simulate --attack ddos --delay 300 --out runs/ddos300
    evguard gen-data --out runs/corpus --traces
    evguard cv --model all --folds 10 --data runs/corpus/corpus.csv --out runs/cv

Every command writes its outputs plus a ``manifest.json`` under ``--out``.
Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.
"""

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app.evguard import __version__
from app.evguard.core.config import settings
from app.evguard.schemas.attacks import DdosAttack, FdiAttack, NoAttack
from app.evguard.schemas.errors import ConfigurationError, EvguardError
from app.evguard.schemas.features import Dataset, ScalerParams
from app.evguard.schemas.mesh import BusConfig, MeshConfig, Mitigation
from app.evguard.schemas.neuralnet import MODEL_KINDS, default_spec
from app.evguard.schemas.plant import SimConfig
from app.evguard.services.attack_sweeps import ddos_sweep, fdi_sweep
from app.evguard.services.attacks import (
    impact_report,
    load_attack_scenario,
    scenario_document,
    write_impact_csv,
)
from app.evguard.services.evaluation import (
    cross_validate,
    run_single_experiment,
    write_cv_outputs,
    write_split_outputs,
)
from app.evguard.services.features import (
    apply_scaler,
    featurize_directory,
    fit_scaler,
    load_layout,
    read_csv,
    synth_corpus,
    synth_traces,
    write_csv,
)
from app.evguard.services.features.corpus import (
    DEFAULT_N_NORMAL,
    DEFAULT_N_RANSOMWARE,
    DEFAULT_SEPARATION,
)
from app.evguard.services.mesh import (
    SampleResolver,
    build_mesh,
    load_scenario,
    run_mesh_sim,
    write_transcript_csv,
)
from app.evguard.services.neuralnet import (
    build_train_config,
    load_model,
    save_model,
    train,
    write_history_csv,
)
from app.evguard.services.neuralnet.serialization import load_sidecar
from app.evguard.services.plant_simulator import (
    run_simulation,
    write_edges_csv,
    write_trace_csv,
)

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
MODEL_FILE = "model.evgm"
SCALER_FILE = "scaler.json"
CORPUS_FILE = "corpus.csv"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ============================================================================
# Shared helpers
# ============================================================================


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args: argparse.Namespace, name: str) -> Any:
    value = getattr(args, name)
    if value is None:
        msg = f"{args.command} requires --{name.replace('_', '-')}"
        raise ConfigurationError(msg)
    return value


def _load_scaled(args: argparse.Namespace) -> tuple[Dataset, ScalerParams]:
    """Read ``--data`` and scale it with a scaler fit on all of its rows."""
    dataset = read_csv(_require(args, "data"), load_layout(args.layout))
    scaler = fit_scaler(dataset)
    return apply_scaler(scaler, dataset), scaler


def _train_options(args: argparse.Namespace) -> dict[str, Any]:
    options: dict[str, Any] = {"seed": args.seed}
    if args.epochs is not None:
        options["epochs"] = args.epochs
    if args.batch is not None:
        options["batch_size"] = args.batch
    return options


def _write_json(path: Path, document: Any) -> Path:
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return path


def _write_manifest(
    args: argparse.Namespace, argv: Sequence[str], outputs: list[Path]
) -> Path:
    options = {
        key: str(value) if isinstance(value, Path) else value
        for key, value in sorted(vars(args).items())
        if key != "handler"
    }
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "options": options,
        "seed": args.seed,
        "package_version": __version__,
        "layout": str(args.layout or settings.layout_path),
        "scaling": settings.scaling,
        "outputs": sorted(str(p) for p in outputs),
    }
    return _write_json(Path(args.out) / MANIFEST_FILE, manifest)


# ============================================================================
# Commands
# ============================================================================


def _attack_from_args(args: argparse.Namespace) -> NoAttack | DdosAttack | FdiAttack:
    if args.scenario is not None:
        return load_attack_scenario(args.scenario)
    if args.attack == "ddos":
        return DdosAttack(delay_s=args.delay)
    if args.attack == "fdi":
        if args.low is None or args.high is None:
            msg = "fdi attack requires --low and --high"
            raise ConfigurationError(msg)
        return FdiAttack(thresholds={"low": args.low, "high": args.high})
    return NoAttack()


def cmd_simulate(args: argparse.Namespace) -> list[Path]:
    """Run one (possibly attacked) simulation: trace.csv, edges.csv, impact.csv."""
    out = _out_dir(args)
    attack = _attack_from_args(args)
    reference = run_simulation(None, NoAttack())
    trace, edges = run_simulation(None, attack)
    report = impact_report(reference, (trace, edges), SimConfig().thresholds)
    return [
        write_trace_csv(trace, out / "trace.csv"),
        write_edges_csv(edges, out / "edges.csv"),
        write_impact_csv(report, out / "impact.csv"),
        _write_json(out / "scenario.json", scenario_document(attack)),
    ]


def cmd_attack_impact(args: argparse.Namespace) -> list[Path]:
    """Sweep delays (ddos) or injected threshold tuples (fdi)."""
    out = _out_dir(args)
    if args.attack == "fdi":
        result = fdi_sweep()
    elif args.attack == "ddos":
        result = ddos_sweep()
    else:
        msg = "attack-impact sweeps --attack ddos or --attack fdi"
        raise ConfigurationError(msg)
    return result.write(out, args.attack)


def cmd_gen_data(args: argparse.Namespace) -> list[Path]:
    """Generate the synthetic raw-count corpus, optionally as trace files."""
    out = _out_dir(args)
    layout = load_layout(args.layout)
    dataset = synth_corpus(
        args.ransomware, args.normal, layout, separation=args.separation, seed=args.seed
    )
    outputs = [write_csv(dataset, out / CORPUS_FILE)]
    if args.traces:
        outputs.extend(synth_traces(dataset, out / "traces", seed=args.seed))
    return outputs


def cmd_featurize(args: argparse.Namespace) -> list[Path]:
    """Featurize ``--data DIR`` (ransomware/ and normal/ trace files) into a CSV."""
    out = _out_dir(args)
    dataset, _ = featurize_directory(
        _require(args, "data"), load_layout(args.layout), jobs=args.jobs or 1
    )
    return [write_csv(dataset, out / "dataset.csv")]


def cmd_train(args: argparse.Namespace) -> list[Path]:
    """Train one architecture on every row of ``--data`` and save it."""
    out = _out_dir(args)
    spec = default_spec(args.model)
    cfg = build_train_config(_train_options(args))
    dataset, scaler = _load_scaled(args)
    params, history = train(spec, dataset, None, cfg)
    metadata = {
        "train_config": cfg.model_dump(mode="json"),
        "scaler": scaler.model_dump(mode="json"),
        "rows": len(dataset),
        "final_train_acc": history.records[-1].train_acc,
        "wall_time": history.wall_time,
    }
    model_path = save_model(params, out / MODEL_FILE, metadata)
    return [
        model_path,
        model_path.with_suffix(".json"),
        write_history_csv(history, out / "history.csv"),
        _write_json(out / SCALER_FILE, scaler.model_dump(mode="json")),
    ]


def cmd_evaluate(args: argparse.Namespace) -> list[Path]:
    """Single 40/30/30 experiment: history.csv and test_report.json."""
    out = _out_dir(args)
    dataset, _ = _load_scaled(args)
    _, report = run_single_experiment(
        default_spec(args.model), dataset, build_train_config(_train_options(args))
    )
    return write_split_outputs(report, out)


def cmd_cv(args: argparse.Namespace) -> list[Path]:
    """Stratified k-fold CV of one or all architectures."""
    out = _out_dir(args)
    cfg = build_train_config(_train_options(args))
    dataset, _ = _load_scaled(args)
    kinds = MODEL_KINDS if args.model == "all" else (args.model,)
    reports = [
        cross_validate(default_spec(kind), dataset, args.folds, cfg, jobs=args.jobs)
        for kind in kinds
    ]
    return write_cv_outputs(reports, out)


def cmd_mesh(args: argparse.Namespace) -> list[Path]:
    """Run a mesh scenario with a saved model at every node."""
    out = _out_dir(args)
    params_path = _require(args, "params")
    scenario_path = Path(_require(args, "scenario"))
    model = load_model(params_path)
    scaler_doc = load_sidecar(params_path).get("metadata", {}).get("scaler")
    scaler = ScalerParams.model_validate(scaler_doc) if scaler_doc else None
    layout = load_layout(args.layout)

    dataset = None
    if args.data is not None:
        dataset = read_csv(args.data, layout)
        if scaler is not None:
            dataset = apply_scaler(scaler, dataset)
    resolver = SampleResolver(
        layout=layout, scaler=scaler, dataset=dataset, base_dir=scenario_path.parent
    )
    mesh = build_mesh(
        MeshConfig(propagation=args.propagation or settings.mesh_propagation),
        model,
        scaler,
    )
    bus = BusConfig(drop_probability=args.drop, max_retries=args.retries, seed=args.seed)
    transcript = run_mesh_sim(load_scenario(scenario_path), mesh, bus, samples=resolver)
    final_state = {
        node: mitigation.value for node, mitigation in transcript.final_mitigation.items()
    }
    escalated = [node for node, level in final_state.items() if level != Mitigation.NORMAL.value]
    msg = f"{len(escalated)}/{len(final_state)} nodes escalated"
    logger.info(msg)
    return [
        write_transcript_csv(transcript, out / "transcript.csv"),
        _write_json(out / "final_state.json", final_state),
    ]


# ============================================================================
# Parser
# ============================================================================


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--out", type=Path, default=Path(settings.output_dir), help="Output directory"
    )
    common.add_argument("--seed", type=int, default=settings.default_seed, help="Seed")
    common.add_argument("--layout", type=Path, help="Layout manifest (default: packaged)")
    common.add_argument(
        "--log-level", default=settings.log_level, help="Logging level (default: INFO)"
    )
    return common


def _training_parser() -> argparse.ArgumentParser:
    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--data", type=Path, help="Dataset CSV")
    training.add_argument("--epochs", type=int, help="Training epochs (default: 70)")
    training.add_argument("--batch", type=int, help="Batch size (default: 100)")
    return training


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subcommand per pipeline stage."""
    parser = argparse.ArgumentParser(
        prog="evguard",
        description="EV charging ransomware testbed: attacks, detectors and mesh",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # DDoS with a five minute command delay
  evguard simulate --attack ddos --delay 300 --out runs/ddos300

  # Synthetic corpus, then 10-fold CV of every architecture
  evguard gen-data --out runs/corpus
  evguard cv --model all --folds 10 --data runs/corpus/corpus.csv --out runs/cv
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_parser()
    training = _training_parser()
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="One plant run")
    simulate.add_argument("--attack", choices=["none", "ddos", "fdi"], default="none")
    simulate.add_argument("--delay", type=float, default=0.0, help="DDoS delay (s)")
    simulate.add_argument("--low", type=float, help="Injected low threshold (%%)")
    simulate.add_argument("--high", type=float, help="Injected high threshold (%%)")
    simulate.add_argument("--scenario", type=Path, help="JSON attack scenario")
    simulate.set_defaults(handler=cmd_simulate)

    sweep = commands.add_parser(
        "attack-impact", parents=[common], help="Delay or threshold sweep"
    )
    sweep.add_argument("--attack", choices=["ddos", "fdi"], default="ddos")
    sweep.set_defaults(handler=cmd_attack_impact)

    gen = commands.add_parser("gen-data", parents=[common], help="Synthetic corpus")
    gen.add_argument("--ransomware", type=int, default=DEFAULT_N_RANSOMWARE)
    gen.add_argument("--normal", type=int, default=DEFAULT_N_NORMAL)
    gen.add_argument("--separation", type=float, default=DEFAULT_SEPARATION)
    gen.add_argument("--traces", action="store_true", help="Also write trace files")
    gen.set_defaults(handler=cmd_gen_data)

    feat = commands.add_parser("featurize", parents=[common], help="Traces to CSV")
    feat.add_argument("--data", type=Path, help="Corpus directory")
    feat.add_argument("--jobs", type=int, default=1)
    feat.set_defaults(handler=cmd_featurize)

    for name, handler, help_text in (
        ("train", cmd_train, "Train and save a model"),
        ("evaluate", cmd_evaluate, "40/30/30 experiment"),
    ):
        sub = commands.add_parser(name, parents=[common, training], help=help_text)
        sub.add_argument("--model", choices=MODEL_KINDS, default="dnn")
        sub.set_defaults(handler=handler)

    cv = commands.add_parser("cv", parents=[common, training], help="k-fold CV")
    cv.add_argument("--model", choices=[*MODEL_KINDS, "all"], default="dnn")
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--jobs", type=int, default=settings.cv_jobs)
    cv.set_defaults(handler=cmd_cv)

    mesh = commands.add_parser("mesh", parents=[common], help="Run a mesh scenario")
    mesh.add_argument("--params", type=Path, help="Model container from `train`")
    mesh.add_argument("--scenario", type=Path, help="tick,node,ref scenario file")
    mesh.add_argument("--data", type=Path, help="Dataset CSV for row:N references")
    mesh.add_argument("--drop", type=float, default=0.0, help="Drop probability")
    mesh.add_argument("--retries", type=int, default=3, help="Max retransmissions")
    mesh.add_argument("--propagation", choices=["global", "downstream"])
    mesh.set_defaults(handler=cmd_mesh)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )
    handler: Callable[[argparse.Namespace], list[Path]] = args.handler
    try:
        outputs = handler(args)
        _write_manifest(args, argv, outputs)
    except (EvguardError, ValidationError) as e:
        msg = f"{args.command} failed: {e}"
        logger.error(msg)  # noqa: TRY400
        return 1
    msg = f"{args.command} wrote {len(outputs)} file(s) to {args.out}"
    logger.info(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
