"""Command-line front end.

Subcommands: ``classify``, ``bounds``, ``synthesize``, ``verify``,
``simulate`` and ``maxflow``.  Each reads one network-description file and
writes one report.  JSON output is sorted and indented so that the same
inputs and seed always give the same bytes.

Exit status is 0 on success, 1 when an analysis fails (a scheme does not
verify, a routing check fails, no scheme applies) and 2 for input errors.

When ``--out`` is not given and ``MHXDOF_OUTPUT_DIR`` is set, reports are
written to ``$MHXDOF_OUTPUT_DIR/<network>.<subcommand>.<ext>`` instead of
standard output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import upper_bound
from .classify import DofValue, classify_general, match_fig5
from .flow import max_flow_routing, verify_routing
from .network import NetworkFormatError, canonicalize, parse_network, pattern_word
from .sim import estimate_dof, parse_snr_grid, simulate_rate, validate_grid
from .synth import BUILDERS, RANK_TOL, RESIDUAL_TOL, SchemeError, best_kind, synthesize, verify_scheme

__all__ = ["RunConfig", "run", "main", "build_parser", "OUTPUT_DIR_ENV", "DEFAULT_SEED"]

OUTPUT_DIR_ENV = "MHXDOF_OUTPUT_DIR"
DEFAULT_SEED = 0
DEFAULT_TRIALS = 50
DEFAULT_GRID = "40:80:10"

EXIT_OK, EXIT_ANALYSIS, EXIT_INPUT = 0, 1, 2

SUBCOMMANDS = ("classify", "bounds", "synthesize", "verify", "simulate", "maxflow")


class InputError(Exception):
    pass


class AnalysisError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on.  ``seed`` defaults to 0."""

    subcommand: str
    input_path: str
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    snr_grid: str = DEFAULT_GRID
    rank_tol: float = RANK_TOL
    residual_tol: float = RESIDUAL_TOL
    output_format: str = "json"
    scheme: str = "auto"
    verify: bool = False
    workers: int = 1
    out: str | None = None
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _word_of(net):
    if not net.is_two_relay():
        return None
    try:
        return canonicalize(pattern_word(net)).word
    except ValueError:
        return None


def _do_classify(net, cfg):
    result = classify_general(net, seed=cfg.seed)
    record = {"network": net.name, "word": _word_of(net), **result.to_dict()}
    if isinstance(result, DofValue):
        record["word"] = result.word if result.word is not None else record["word"]
    return record, EXIT_OK


def _do_bounds(net, cfg):
    report = upper_bound(net)
    return {"network": net.name, **report.to_dict()}, EXIT_OK


def _pick_kind(net, cfg):
    if cfg.scheme != "auto":
        if cfg.scheme not in BUILDERS:
            raise InputError(f"unknown scheme {cfg.scheme!r}; choose from auto, {', '.join(sorted(BUILDERS))}")
        return cfg.scheme
    if match_fig5(net) is not None:
        return "5/3"
    kind, _, _ = best_kind(net, np.random.default_rng(cfg.seed))
    if kind is None:
        raise AnalysisError("no scheme applies to this network")
    return kind


def _do_synthesize(net, cfg):
    kind = _pick_kind(net, cfg)
    rng = np.random.default_rng(cfg.seed)
    try:
        scheme, channels, _ = synthesize(net, kind, rng)
    except SchemeError as exc:
        raise AnalysisError(str(exc)) from exc
    record = {
        "network": net.name,
        "seed": cfg.seed,
        "scheme_kind": kind,
        "redraws": scheme.metadata.get("redraws", 0),
        "scheme": scheme.to_dict(net),
    }
    status = EXIT_OK
    if cfg.verify:
        report = verify_scheme(net, channels, scheme, cfg.rank_tol, cfg.residual_tol)
        record["verification"] = report.to_dict()
        status = EXIT_OK if report.passed else EXIT_ANALYSIS
    return record, status


def _do_simulate(net, cfg):
    kind = _pick_kind(net, cfg)
    try:
        grid = parse_snr_grid(cfg.snr_grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if cfg.trials < 1:
        raise InputError("--trials must be positive")
    try:
        validate_grid(grid)
        slope_ok = True
    except ValueError:
        slope_ok = False
    try:
        if slope_ok:
            est = estimate_dof(net, kind, grid, cfg.trials, cfg.seed, cfg.workers)
            points, slope = est.points, est
        else:
            points = [simulate_rate(net, kind, s, cfg.trials, cfg.seed, cfg.workers) for s in grid]
            slope = None
    except SchemeError as exc:
        raise AnalysisError(str(exc)) from exc
    record = {
        "network": net.name,
        "scheme_kind": kind,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "points": [p.to_dict() for p in points],
        "slope": None
        if slope is None
        else {"dof_hat": slope.dof_hat, "window": list(slope.window), "residual": slope.residual},
    }
    return record, EXIT_OK


def _do_maxflow(net, cfg):
    if net.mode != "wired":
        raise InputError("maxflow needs a network with 'mode: wired'")
    solution = max_flow_routing(net)
    report = verify_routing(net, solution)
    record = {"network": net.name, **solution.to_dict(), "verification": report.to_dict()}
    return record, EXIT_OK if report.passed else EXIT_ANALYSIS


_HANDLERS = {
    "classify": _do_classify,
    "bounds": _do_bounds,
    "synthesize": _do_synthesize,
    "verify": _do_synthesize,
    "simulate": _do_simulate,
    "maxflow": _do_maxflow,
}


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _json(record) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def _csv(subcommand, record) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if subcommand == "simulate":
        w.writerow(["snr_db", "sum_rate", "W11", "W12", "W21", "W22", "trials", "seed"])
        for p in record["points"]:
            pm = p["per_message"]
            w.writerow([repr(p["snr_db"]), repr(p["sum_rate"]), *(repr(pm[k]) for k in ("W11", "W12", "W21", "W22")), p["trials"], p["seed"]])
    elif subcommand == "bounds":
        w.writerow(["rule", "d11", "d12", "d21", "d22", "rhs", "witness"])
        for q in record["inequalities"]:
            w.writerow([q["rule"], *q["coeffs"], q["rhs"], q["witness"]])
    elif subcommand == "maxflow":
        w.writerow(["message", "rate", "path"])
        for p in record["paths"]:
            w.writerow([p["message"], p["rate"], " ".join(p["nodes"])])
    elif subcommand == "classify":
        keys = ["network", "word", "kind", "value", "lower", "upper", "provenance"]
        w.writerow(keys)
        w.writerow(["" if record.get(k) is None else record.get(k) for k in keys])
    else:
        raise InputError(f"csv output is not available for {subcommand}")
    return buf.getvalue()


def _human(subcommand, record) -> str:
    lines = [f"network: {record.get('network') or '(unnamed)'}"]
    if subcommand == "classify":
        if record["kind"] == "value":
            word = f" word {record['word']}" if record.get("word") else ""
            lines.append(f"sum DoF = {record['value']} ({record['provenance']}){word}")
        else:
            lines.append(f"{record['lower']} <= sum DoF <= {record['upper']}")
            lines.append(f"lower: {record['lower_witness']}")
    elif subcommand == "bounds":
        lines.append(f"LP optimum: {record['optimum']}")
        lines.append("binding inequalities (multiplier):")
        for q in record["certificate"]:
            lines.append(f"  {q['multiplier']:>4}  {q['text']}   [{q['rule']}]")
        c = record["combined"]
        if c:
            lines.append(f"combined: {' + '.join(f'{x}d{k}' for x, k in zip(c['coeffs'], ('11', '12', '21', '22')))} <= {c['rhs']}")
    elif subcommand in ("synthesize", "verify"):
        s = record["scheme"]
        lines.append(f"scheme {record['scheme_kind']}: {len(s['streams'])} streams over T={s['T']}")
        if "verification" in record:
            v = record["verification"]
            lines.append(f"verification: {'pass' if v['passed'] else 'FAIL'}, sum DoF {v['sum_dof']}")
            lines.extend(f"  {f}" for f in v["failures"])
    elif subcommand == "simulate":
        lines.append(f"scheme {record['scheme_kind']}, {record['trials']} trials, seed {record['seed']}")
        for p in record["points"]:
            lines.append(f"  {p['snr_db']:6.1f} dB  sum rate {p['sum_rate']:.4f}")
        if record["slope"]:
            lines.append(f"dof_hat = {record['slope']['dof_hat']:.4f}")
    elif subcommand == "maxflow":
        lines.append(f"sum rate: {record['sum_rate']}")
        for p in record["paths"]:
            lines.append(f"  {p['message']} rate {p['rate']}: {' -> '.join(p['nodes'])}")
        lines.append(f"verification: {'pass' if record['verification']['pass'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def render(subcommand, record, fmt) -> str:
    if fmt == "json":
        return _json(record)
    if fmt == "csv":
        return _csv(subcommand, record)
    return _human(subcommand, record)


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def _load(path) -> "LayeredNetwork":  # noqa: F821
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            net = parse_network(text)
        except NetworkFormatError as exc:
            raise InputError(f"{path}: {exc}") from exc
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not net.name:
        net = type(net)(net.layers, net.edges, net.mode, net.coefficients, net.pruned, Path(path).stem)
    return net


def _destination(cfg, net) -> Path | None:
    if cfg.out:
        return Path(cfg.out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return None
    ext = {"json": "json", "csv": "csv", "human": "txt"}[cfg.output_format]
    return Path(base) / f"{net.name}.{cfg.subcommand}.{ext}"


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute one configured run; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.subcommand not in _HANDLERS:
        print(f"error: unknown subcommand {cfg.subcommand!r}", file=stderr)
        return EXIT_INPUT
    if cfg.subcommand == "verify":
        cfg.verify = True
    try:
        net = _load(cfg.input_path)
        record, status = _HANDLERS[cfg.subcommand](net, cfg)
        text = render(cfg.subcommand, record, cfg.output_format)
    except InputError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT
    except AnalysisError as exc:
        print(f"analysis failed: {exc}", file=stderr)
        return EXIT_ANALYSIS
    dest = _destination(cfg, net)
    if dest is None:
        stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
        print(f"wrote {dest}", file=stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("network", help="network-description file")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default %(default)s)")
    common.add_argument("--format", dest="output_format", choices=("json", "csv", "human"), default="json")
    common.add_argument("--out", help=f"output file (default: stdout, or ${OUTPUT_DIR_ENV} if set)")
    common.add_argument(
        "--tolerance",
        type=float,
        default=RESIDUAL_TOL,
        help="interference residual tolerance relative to path gain (default %(default)g)",
    )
    common.add_argument("--rank-tol", type=float, default=RANK_TOL, help="rank tolerance (default %(default)g)")

    parser = argparse.ArgumentParser(prog="mhxdof", description="DoF analysis of 2-source 2-sink layered networks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("classify", parents=[common], help="sum DoF value or bracket")
    sub.add_parser("bounds", parents=[common], help="outer-bound inequalities and LP optimum")
    schemes = ("auto", *sorted(BUILDERS))
    for name, helptext in (("synthesize", "build a linear scheme"), ("verify", "build and verify a linear scheme")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--scheme", default="auto", choices=schemes)
        if name == "synthesize":
            p.add_argument("--verify", action="store_true", help="also print the verification report")
    p = sub.add_parser("simulate", parents=[common], help="finite-SNR rates and DoF slope")
    p.add_argument("--scheme", default="auto", choices=schemes)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--snr-grid", default=DEFAULT_GRID, help="lo:hi:step in dB (default %(default)s)")
    p.add_argument("--workers", type=int, default=1)
    sub.add_parser("maxflow", parents=[common], help="max-flow routing of a wired network")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    cfg = RunConfig(
        subcommand=args.subcommand,
        input_path=args.network,
        seed=args.seed,
        trials=getattr(args, "trials", DEFAULT_TRIALS),
        snr_grid=getattr(args, "snr_grid", DEFAULT_GRID),
        rank_tol=args.rank_tol,
        residual_tol=args.tolerance,
        output_format=args.output_format,
        scheme=getattr(args, "scheme", "auto"),
        verify=getattr(args, "verify", False),
        workers=getattr(args, "workers", 1),
        out=args.out,
    )
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
