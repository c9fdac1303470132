"""trace-contam command line interface.

Subcommands: analyze, batch, perturb, gen, validate.

Exit codes:
    0  success
    2  usage error (bad flags/arguments)
    3  input error (missing files, malformed traces or artifacts)
    4  analysis/operator error (task mismatch, unknown or inapplicable
       operator, invalid values, validation findings)
    5  batch completed with some pairs failing
"""

from __future__ import annotations

import argparse
import json
import sys

from .artifacts import InvalidArtifact, read_document, read_table, write_document, write_table
from .config import AnalysisConfig
from .divergence import SequenceTooLong
from .events import TraceError, parse_trace, validate_trace
from .perturb import PerturbationError, apply_document, apply_tabular, catalog, catalog_entry
from .records import MODALITY_DOCUMENT, MODALITY_TABULAR
from .report import analyze_files, run_batch, write_atomic
from .simulator import InvalidSpec, generate_corpus, write_corpus
from .taxonomy import DomainError, TaskMismatch

EX_OK = 0
EX_USAGE = 2
EX_PARSE = 3
EX_ANALYSIS = 4
EX_PARTIAL = 5

_INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, TraceError, InvalidArtifact)
_ANALYSIS_ERRORS = (TaskMismatch, SequenceTooLong, DomainError, PerturbationError,
                    InvalidSpec, ValueError)


def _load_config(args: argparse.Namespace) -> AnalysisConfig:
    base: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    for flag in ("epsilon", "comparator", "t_star_denominator"):
        value = getattr(args, flag, None)
        if value is not None:
            base[flag] = value
    return AnalysisConfig.from_dict(base)


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = _load_config(args)
    record = analyze_files(args.clean, args.perturbed, config)
    text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EX_OK


def _cmd_batch(args: argparse.Namespace) -> int:
    config = _load_config(args)
    result = run_batch(args.corpus, args.out, config)
    sys.stdout.write(
        f"analyzed {result.aggregate['n_pairs']} pairs, "
        f"{result.aggregate['n_failed']} failed; reports in {args.out}\n"
    )
    return EX_PARTIAL if result.errors else EX_OK


def _parse_params(pairs: list[str], op_name: str) -> dict:
    entry = catalog_entry(op_name)
    params: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--param expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        spec = entry.param_schema.get(key)
        if spec is None:
            raise ValueError(f"operator {op_name!r} has no parameter {key!r}")
        if spec["type"] == "int":
            params[key] = int(raw)
        elif spec["type"] == "float":
            params[key] = float(raw)
        else:
            params[key] = raw
    return params


def _detect_modality(text: str, flag: str) -> str:
    if flag != "auto":
        return flag
    for line in text.split("\n"):
        if line.strip():
            return MODALITY_DOCUMENT if line.startswith("#section") else MODALITY_TABULAR
    return MODALITY_TABULAR


def _cmd_perturb(args: argparse.Namespace) -> int:
    with open(args.artifact, encoding="utf-8") as fh:
        text = fh.read()
    modality = _detect_modality(text, args.modality)
    params = _parse_params(args.param or [], args.op)
    if modality == MODALITY_TABULAR:
        artifact = read_table(text)
        perturbed, record = apply_tabular(artifact, args.op, params, args.seed)
        out_text = write_table(perturbed)
    else:
        artifact = read_document(text)
        perturbed, record = apply_document(artifact, args.op, params, args.seed)
        out_text = write_document(perturbed)
    out_path = args.out or args.artifact + ".perturbed"
    write_atomic(out_path, out_text)
    write_atomic(out_path + ".record.json",
                 json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"wrote {out_path} and {out_path}.record.json\n")
    return EX_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    corpus = generate_corpus(args.count, args.seed)
    write_corpus(corpus, args.out)
    sys.stdout.write(f"wrote {len(corpus)} pairs under {args.out}\n")
    return EX_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    with open(args.trace, encoding="utf-8") as fh:
        trace = parse_trace(fh)
    violations = validate_trace(trace)
    for violation in violations:
        where = "trace" if violation.event_index is None else f"event {violation.event_index}"
        sys.stdout.write(f"{where}: {violation.rule}: {violation.message}\n")
    if violations:
        return EX_ANALYSIS
    sys.stdout.write(f"ok: {len(trace.events)} events\n")
    return EX_OK


def _cmd_catalog(_: argparse.Namespace) -> int:
    for entry in catalog():
        params = ", ".join(
            f"{name}={spec['default']}" for name, spec in entry.param_schema.items()
        ) or "-"
        sys.stdout.write(f"{entry.op_name:<24} {entry.modality:<9} params: {params}\n")
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trace-contam",
        description="Quantify and classify contamination cascades in paired workflow traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with AnalysisConfig fields")
        p.add_argument("--epsilon", type=float, help="structural-divergence threshold")
        p.add_argument("--comparator", choices=("exact", "normalized", "numeric"),
                       help="answer comparison policy")
        p.add_argument("--t-star-denominator", dest="t_star_denominator",
                       choices=("clean", "max"), help="normalization base for t*")

    p_analyze = sub.add_parser("analyze", help="analyze one clean/perturbed pair")
    p_analyze.add_argument("--clean", required=True)
    p_analyze.add_argument("--perturbed", required=True)
    p_analyze.add_argument("--out", help="write the record here instead of stdout")
    add_config_flags(p_analyze)
    p_analyze.set_defaults(func=_cmd_analyze)

    p_batch = sub.add_parser("batch", help="analyze a corpus directory")
    p_batch.add_argument("--corpus", required=True)
    p_batch.add_argument("--out", required=True)
    add_config_flags(p_batch)
    p_batch.set_defaults(func=_cmd_batch)

    p_perturb = sub.add_parser("perturb", help="apply a perturbation operator to an artifact")
    p_perturb.add_argument("--artifact", required=True)
    p_perturb.add_argument("--op", required=True)
    p_perturb.add_argument("--seed", type=int, default=0)
    p_perturb.add_argument("--param", action="append", metavar="KEY=VALUE")
    p_perturb.add_argument("--modality", choices=("auto", MODALITY_TABULAR, MODALITY_DOCUMENT),
                           default="auto")
    p_perturb.add_argument("--out")
    p_perturb.set_defaults(func=_cmd_perturb)

    p_gen = sub.add_parser("gen", help="generate a labeled simulator corpus")
    p_gen.add_argument("--count", type=int, required=True, help="pairs per scenario")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_validate = sub.add_parser("validate", help="check a trace file against all invariants")
    p_validate.add_argument("--trace", required=True)
    p_validate.set_defaults(func=_cmd_validate)

    p_catalog = sub.add_parser("catalog", help="list perturbation operators")
    p_catalog.set_defaults(func=_cmd_catalog)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EX_PARSE
    except _ANALYSIS_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EX_ANALYSIS


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
