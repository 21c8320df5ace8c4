"""
Command-line interface: ingest, fit-hstar, predict, simulate, diagnose and bench.
"""
import argparse
import hashlib
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src import __version__
from src.app.logging_config import get_logger, setup_logging
from src.errors import DataError, UnseenError, UsageError
from src.models.estimator import AlphaEstimate, MethodSpec
from src.models.profile import FrequencyProfile, Horizon, LinearWeights, MethodTag, profile_from_counts
from src.models.sim import ModelKind
from src.processor import DEFAULT_METHODS, BenchProcessor, default_fractions
from src.services import estimators, sim_checks, simulator, uncertainty
from src.services.corpus_service import corpus_service, load_incidence, load_tokens
from src.services.hstar_service import HStarService
from src.services.predictor import predict
from src.services.report_writer import ReportFormat, emit
from src.services.stream_codec import read_stream, write_stream
from src.settings import settings

logger = get_logger(__name__)

BUILD_ID = f"unseen-species-forecaster {__version__}"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def parse_fractions(spec: str) -> List[float]:
    """``"0.05..0.5x10"`` (evenly spaced, inclusive) or a comma-separated list."""
    try:
        if ".." in spec:
            bounds, _, count = spec.partition("x")
            lo, _, hi = bounds.partition("..")
            values = np.linspace(float(lo), float(hi), int(count) if count else settings.BENCH_FRACTIONS)
            return [float(v) for v in values]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"Invalid fraction grid '{spec}'") from e


def parse_pair(spec: str) -> tuple:
    try:
        m, n = (int(v) for v in spec.split(","))
    except ValueError as e:
        raise UsageError(f"Expected 'm,n', got '{spec}'") from e
    return m, n


def parse_phi(payload: str) -> FrequencyProfile:
    """``{"1": 2, "2": 1}`` or a full profile document with ``counts``/``n_events``."""
    try:
        document = json.loads(payload)
    except json.JSONDecodeError as e:
        raise DataError(f"Profile is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise DataError("Profile must be a JSON object")
    n_events = None
    if "counts" in document:
        n_events = document.get("n_events")
        document = document["counts"]
    try:
        pairs = [(int(k), int(v)) for k, v in document.items()]
    except (TypeError, ValueError) as e:
        raise DataError(f"Profile keys and values must be integers: {e}") from e
    return profile_from_counts(pairs, n_events)


def load_weights(location: str) -> LinearWeights:
    try:
        document = json.loads(corpus_service.read_text(location))
    except json.JSONDecodeError as e:
        raise DataError(f"Weights file {location} is not valid JSON: {e}") from e
    if isinstance(document, dict):
        document = document.get("weights")
    if not isinstance(document, list):
        raise DataError(f"Weights file {location} must hold a JSON array [H1, H2, ...]")
    return LinearWeights.from_array(document)


def load_config(location: Optional[str]) -> Dict[str, Any]:
    if location is None:
        return {}
    path = Path(location)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise UsageError(f"Cannot read config {location}: {e.strerror or e}") from e
    try:
        if path.suffix == ".toml":
            return tomllib.loads(raw.decode("utf-8"))
        return json.loads(raw)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise UsageError(f"Invalid config file {location}: {e}") from e


def merge_config(args: argparse.Namespace, config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Fill unset flags from the config file. Top-level keys apply to every command and
    a table named after the command overrides them; explicit flags always win.
    """
    command = args.command
    values = {k: v for k, v in config.items() if not isinstance(v, dict)}
    values.update(config.get(command, {}))
    applied = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            logger.warning("Unknown config key ignored", extra={"key": key, "command": command})
            continue
        if getattr(args, dest) is None:
            setattr(args, dest, value)
            applied[dest] = value
    return applied


def _digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def write_manifest(out: str, args: argparse.Namespace, argv: Sequence[str], extra: Dict[str, Any]) -> Path:
    """Everything needed to reproduce ``out``, stored as ``<out>.manifest.json``."""
    out_path = Path(out)
    outputs = {}
    for path in [out_path] + [Path(p) for p in extra.pop("companions", [])]:
        if path.exists():
            outputs[str(path)] = _digest(path.read_bytes())
    manifest = {
        "build": BUILD_ID,
        "argv": list(argv),
        "config": {k: v for k, v in vars(args).items() if k != "handler"},
        "settings": settings.model_dump(),
        "outputs": outputs,
        **extra,
    }
    target = out_path.with_name(out_path.name + ".manifest.json")
    target.write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")
    logger.info("Manifest written", extra={"path": str(target)})
    return target


def _print(payload: Any) -> None:
    print(json.dumps(payload, indent=2, default=str))


def _horizon(args: argparse.Namespace, default_t: Optional[float] = None) -> Horizon:
    t = args.t if args.t is not None else default_t
    if args.r is None or t is None:
        raise UsageError("both --r and --t are required")
    return Horizon.of(t=float(t), r=float(args.r))


def _hstar_service(args: argparse.Namespace) -> HStarService:
    return HStarService(
        depth=getattr(args, "depth", None),
        grid=getattr(args, "grid", None),
        budget=getattr(args, "budget", None),
        cert_grid=getattr(args, "cert_grid", None),
        use_cache=getattr(args, "cache", None),
    )


def cmd_ingest(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.kind == "tokens":
        stream = load_tokens(args.input)
    elif args.kind == "sets":
        stream = load_incidence(args.input, args.max_id, args.keep_every or 1)
    else:
        if args.events is None:
            raise UsageError("--events is required with --kind model")
        model = simulator.load_model(args.input)
        stream = simulator.sample_stream(model, int(args.events), int(args.seed or 0))
    if args.subsample and args.subsample > 1:
        stream = stream.subsequence(range(0, len(stream), int(args.subsample)))

    write_stream(stream, args.out)
    write_manifest(args.out, args, argv, {"seed": args.seed})
    _print({
        "out": args.out,
        "events": len(stream),
        "species": stream.n_species,
        "arity": stream.arity,
        "profile": stream.profile().counts,
    })
    return 0


def cmd_fit_hstar(args: argparse.Namespace, argv: Sequence[str]) -> int:
    h = _horizon(args)
    service = _hstar_service(args)
    weights, certificate = service.fit(h, p0=args.p0)
    payload = {"weights": weights.to_list(), "certificate": certificate.model_dump(mode="json")}
    if args.out:
        out = Path(args.out)
        cert_path = out.with_name(out.name + ".certificate.json")
        out.write_text(json.dumps(weights.to_list()), encoding="utf-8")
        cert_path.write_text(certificate.model_dump_json(indent=2), encoding="utf-8")
        write_manifest(args.out, args, argv, {
            "companions": [str(cert_path)],
            "weights_sha256": _digest(json.dumps(weights.to_list()).encode("utf-8")),
            "grid": service.grid,
            "cert_grid": certificate.cert_grid,
            "depth": service.depth,
            "budget": service.budget,
        })
    _print(payload)
    return 0


def _profile_from_args(args: argparse.Namespace) -> FrequencyProfile:
    sources = [s for s in (args.phi, args.profile, args.input) if s is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one of --phi, --profile or --input")
    if args.phi is not None:
        return parse_phi(args.phi)
    if args.profile is not None:
        return parse_phi(corpus_service.read_text(args.profile))
    return read_stream(args.input).profile()


def cmd_predict(args: argparse.Namespace, argv: Sequence[str]) -> int:
    profile = _profile_from_args(args)
    h = _horizon(args, default_t=profile.n_events or None)
    tag = MethodTag(args.method)
    if tag == MethodTag.LINEAR and not args.weights:
        raise UsageError("--method linear needs --weights")

    kwargs: Dict[str, Any] = {}
    if args.weights:
        kwargs["weights"] = load_weights(args.weights)
    if tag == MethodTag.SGT and args.smoothing:
        kwargs["smoothing"] = estimators.default_smoothing(h, args.smoothing)
    if args.pade_order:
        kwargs["pade_order"] = parse_pair(args.pade_order)
    if args.alpha is not None:
        kwargs["alpha"] = AlphaEstimate.fixed(args.alpha)
    method = MethodSpec(tag=tag, **kwargs)

    service = _hstar_service(args)
    report = predict(profile, h, method, level=args.level, arity_bound=args.arity_bound, hstar=service.weights)
    if args.out:
        Path(args.out).write_text(report.model_dump_json(indent=2), encoding="utf-8")
        write_manifest(args.out, args, argv, {})
    _print(report.model_dump(mode="json"))
    return 0


def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    check = args.check or "mse"
    seed = int(args.seed or 0)
    payload: Dict[str, Any]

    if check == "alpha":
        if args.alpha is None:
            raise UsageError("--alpha is required for the alpha check")
        t_grid = parse_fractions(args.t_grid or "100,1000,10000")
        report = sim_checks.alpha_rate_check(
            args.alpha, args.c, t_grid, args.reps, seed, args.species, threads=args.threads
        )
        payload = report.model_dump(mode="json")
    else:
        if args.model is None:
            raise UsageError("--model is required")
        model = simulator.load_model(args.model)
        if check == "laplace":
            if args.t is None:
                raise UsageError("--t is required")
            payload = {"checks": [c.model_dump() for c in sim_checks.laplace_identity_check(model, args.t)]}
        else:
            h = _horizon(args)
            if check == "mse":
                method = MethodSpec(tag=MethodTag(args.method or "gt"))
                if method.tag == MethodTag.HSTAR:
                    method = method.model_copy(update={"weights": _hstar_service(args).weights(h)})
                estimate = simulator.mc_mse(model, h, method, args.reps, seed, args.threads)
                payload = {"method": method.tag.value, **estimate.model_dump()}
                payload["expected_s_tT"] = simulator.expected_s_tT(model, h)
                if method.tag == MethodTag.GT and model.kind == ModelKind.CLASSICAL:
                    payload["closed_form_mse"] = simulator.gt_mse_closed_form(model, h)
            elif check == "decomp":
                payload = sim_checks.error_decomposition_check(model, h, args.reps, seed).model_dump()
            else:
                report = sim_checks.concentration_check(
                    model, h, args.i or 1, args.reps, seed, arity_bound=args.arity_bound, threads=args.threads
                )
                payload = report.model_dump()

    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, default=str), encoding="utf-8")
        write_manifest(args.out, args, argv, {"seed": seed, "reps": args.reps or settings.SIM_REPS})
    _print(payload)
    return 0


def cmd_diagnose(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.input.endswith(".bin"):
        stream = read_stream(args.input)
    else:
        stream = load_incidence(args.input)
    h = Horizon.of(t=float(args.t or len(stream)), r=float(args.r))
    report = uncertainty.dependence_report(stream, h)
    if args.out:
        Path(args.out).write_text(report.model_dump_json(indent=2), encoding="utf-8")
        write_manifest(args.out, args, argv, {})
    _print(report.model_dump(mode="json"))
    return 0


def cmd_bench(args: argparse.Namespace, argv: Sequence[str]) -> int:
    stream = read_stream(args.input)
    methods = [m.strip() for m in (args.methods or ",".join(DEFAULT_METHODS)).split(",") if m.strip()]
    fractions = parse_fractions(args.fracs) if args.fracs else default_fractions()
    processor = BenchProcessor(
        methods,
        hstar_service=_hstar_service(args),
        threads=args.threads,
        with_l_alpha=bool(args.l_alpha),
        sgt_preset=args.smoothing,
    )
    result = processor.run(
        stream,
        fractions,
        n_perms=args.perms,
        seed=args.seed,
        subsample_every=int(args.subsample or 1),
        dataset=stream.source_label or args.input,
    )
    fmt = args.format or _format_from_suffix(args.out)
    emit(result, fmt, args.out)
    write_manifest(args.out, args, argv, {
        "seed": args.seed,
        "fractions": fractions,
        "methods": methods,
        "n_perms": result.rows[0].n_perms if result.rows else 0,
        "row_params": {f"{row.fraction_seen}:{row.method}": row.params for row in result.rows},
    })
    _print({"out": args.out, "rows": len(result.rows), "gaps": sum(r.is_gap for r in result.rows)})
    return 0


def _format_from_suffix(out: str) -> ReportFormat:
    suffix = Path(out).suffix.lower()
    if suffix == ".json":
        return ReportFormat.JSON
    if suffix == ".tex":
        return ReportFormat.LATEX
    return ReportFormat.CSV


def _add_horizon(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--r", type=float, help="Future-to-past ratio")
    parser.add_argument("--t", type=float, help="Past duration (events)")


def _add_hstar(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--depth", type=int, help="Number of weights")
    parser.add_argument("--grid", type=int, help="Optimization grid size")
    parser.add_argument("--budget", type=int, help="Subgradient iterations per start")
    parser.add_argument("--cert-grid", type=int, help="Certification grid size")
    parser.add_argument(
        "--cache", action=argparse.BooleanOptionalAction, default=None, help="Use the H* fit cache"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unseen", description="Predict the number of unseen species.")
    parser.add_argument("--version", action="version", version=BUILD_ID)
    parser.add_argument("--config", help="TOML or JSON file with default flag values")
    parser.add_argument("--threads", type=int, default=None, help="Cap on worker threads")
    parser.add_argument("--log-level", default=None, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="Load a corpus into a binary stream file")
    p.add_argument("--kind", choices=["tokens", "sets", "model"], required=True)
    p.add_argument("--input", required=True, help="Local path or s3://bucket/key")
    p.add_argument("--subsample", type=int, help="Keep every k-th event")
    p.add_argument("--max-id", type=int, help="Drop numeric ids >= this value (sets)")
    p.add_argument("--keep-every", type=int, help="Keep every k-th line (sets)")
    p.add_argument("--events", type=int, help="Sample size (model)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("fit-hstar", help="Fit worst-case-optimal linear weights")
    _add_horizon(p)
    _add_hstar(p)
    p.add_argument("--p0", type=float, help="Restrict the worst case to species masses >= p0")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_fit_hstar)

    p = sub.add_parser("predict", help="Predict new species for one profile")
    p.add_argument("--method", required=True, choices=[m.value for m in MethodTag])
    p.add_argument("--phi", help='Profile as JSON, e.g. {"1": 2, "2": 1}')
    p.add_argument("--profile", help="Profile JSON file")
    p.add_argument("--input", help="Stream file")
    _add_horizon(p)
    p.add_argument("--level", type=float, help="Interval coverage in (0, 1)")
    p.add_argument("--arity-bound", type=int, help="Set-size bound B for ratio-alpha intervals")
    p.add_argument("--weights", help="JSON array [H1, H2, ...] for linear weights")
    p.add_argument("--smoothing", help="SGT preset")
    p.add_argument("--pade-order", help="Padé degrees 'm,n'")
    p.add_argument("--alpha", type=float, help="Fixed alpha for ratio-alpha")
    _add_hstar(p)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("simulate", help="Monte-Carlo checks on a species model")
    p.add_argument("--model", help="Model JSON file")
    _add_horizon(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--check", choices=["mse", "decomp", "conc", "laplace", "alpha"])
    p.add_argument("--method", choices=[m.value for m in MethodTag if m != MethodTag.LINEAR])
    p.add_argument("--i", type=int, help="Multiplicity for the concentration check")
    p.add_argument("--arity-bound", type=int)
    p.add_argument("--alpha", type=float, help="Power-law index for the alpha check")
    p.add_argument("--c", type=float, help="Power-law scale for the alpha check")
    p.add_argument("--t-grid", help="Comma-separated t values for the alpha check")
    p.add_argument("--species", type=int, help="Support size for the alpha check")
    _add_hstar(p)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("diagnose", help="Dependence diagnostics of an incidence stream")
    p.add_argument("--input", required=True, help="Incidence text file or stream file (.bin)")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--t", type=float, help="Defaults to the number of events")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("bench", help="MAPE tables over seen fractions")
    p.add_argument("--input", required=True, help="Stream file")
    p.add_argument("--methods", help="Comma-separated method tags")
    p.add_argument("--fracs", help="'lo..hixN' or comma-separated fractions")
    p.add_argument("--perms", type=int)
    p.add_argument("--seed", type=int, help="Without a seed the stream order is kept")
    p.add_argument("--subsample", type=int)
    p.add_argument("--smoothing", help="SGT preset")
    p.add_argument("--l-alpha", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--format", choices=[f.value for f in ReportFormat])
    _add_hstar(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on usage errors, 2 on data errors, 3 on numeric-guard rejections
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        applied = merge_config(args, config)
        setup_logging(level=args.log_level)
        logger.info(
            "Running command",
            extra={"command": args.command, "build": BUILD_ID, "config_keys": sorted(applied)},
        )
        return args.handler(args, argv)
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    except UnseenError as e:
        logger.error("Command failed", extra={"error": str(e), "exit_code": e.exit_code})
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        logger.error("Invalid input", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return DataError.exit_code
