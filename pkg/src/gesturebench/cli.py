"""Command-line entry point wiring all modules into reproducible commands.

Commands compose via files: `synth` writes a dataset + simulated rating
log, `aggregate` turns a rating log into an aggregates CSV, `train`
cross-validates the scorer, `eval` scores a manifest with a checkpoint,
`serve` runs the rating service, and `report` renders the analytics
tables.  Each command reads an optional JSON config file; flags and
dotted `--set key=value` pairs override it; the effective config is
echoed next to the outputs.

Exit codes: 0 success, 1 usage, 2 validation/config, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .core import (
    ConfigError,
    ContractError,
    EmotionLabel,
    FormatError,
    SourceMethod,
    ValidationError,
    load_manifest,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


# -- config plumbing ---------------------------------------------------------


def _parse_override(pair: str) -> tuple[str, object]:
    if "=" not in pair:
        raise ConfigError(f"override {pair!r} must look like key=value")
    key, raw = pair.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _apply_override(doc: dict, dotted: str, value: object) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted!r}: {k!r} is not a section")
    node[keys[-1]] = value


def load_config_doc(args: argparse.Namespace) -> dict:
    doc: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: config must be a JSON object")
    for pair in getattr(args, "overrides", None) or []:
        key, value = _parse_override(pair)
        _apply_override(doc, key, value)
    return doc


def _check_keys(doc: dict, cls, where: str) -> None:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown config keys {unknown}; known keys: {sorted(known)}")


def build_synth_config(doc: dict):
    from .synth import SynthConfig

    doc = dict(doc)
    _check_keys(doc, SynthConfig, "synth config")
    if "methods" in doc:
        doc["methods"] = tuple(SourceMethod(m) for m in doc["methods"])
    for key in ("quality_gap", "consistency_gap"):
        if key in doc:
            doc[key] = {SourceMethod(m): float(v) for m, v in doc[key].items()}
    if "congruence_rates" in doc:
        doc["congruence_rates"] = {
            (SourceMethod(m), EmotionLabel(e)): float(rate)
            for m, per_emotion in doc["congruence_rates"].items()
            for e, rate in per_emotion.items()
        }
    config = SynthConfig(**doc)
    config.validate()
    return config


def build_encoder_config(doc: dict):
    from .features import EncoderConfig

    doc = dict(doc)
    _check_keys(doc, EncoderConfig, "encoder config")
    for key in ("vision_window", "audio_patch"):
        if key in doc:
            doc[key] = tuple(doc[key])
    config = EncoderConfig(**doc)
    config.validate()
    return config


def build_train_config(doc: dict):
    from .training import TrainConfig

    doc = dict(doc)
    _check_keys(doc, TrainConfig, "train config")
    if "encoder" in doc:
        doc["encoder"] = build_encoder_config(doc["encoder"])
    config = TrainConfig(**doc)
    config.validate()
    return config


def _echo_config(doc: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, default=str) + "\n")


def _load_aggregates(args: argparse.Namespace):
    from .subjective import aggregate_ratings, read_aggregates_csv, read_ratings_log

    if getattr(args, "aggregates", None):
        return read_aggregates_csv(args.aggregates)
    records = read_ratings_log(args.ratings)
    if not records:
        raise ValidationError(f"empty ratings log: {args.ratings}")
    return aggregate_ratings(records).aggregates


# -- commands -------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    from .subjective import append_ratings
    from .synth import generate_dataset, generate_ratings, planted_truth

    doc = load_config_doc(args)
    for key, value in (
        ("n_audio", args.n_audio),
        ("seed", args.seed),
        ("raters", args.raters),
        ("rater_noise", args.rater_noise),
    ):
        if value is not None:
            doc[key] = value
    if args.adversary:
        doc["adversary"] = True
    config = build_synth_config(doc)

    out = Path(args.out)
    manifest = generate_dataset(config, out, write_media=not args.no_media)
    records = generate_ratings(manifest, config)
    append_ratings(records, out / "ratings.jsonl")
    truth_doc = {
        sid: dataclasses.asdict(t) for sid, t in sorted(planted_truth(config).items())
    }
    (out / "truth.json").write_text(json.dumps(truth_doc, indent=1) + "\n")
    _echo_config(doc, out / "synth_config.json")
    print(
        f"wrote {len(manifest.samples)} samples ({config.n_audio} audio x "
        f"{len(config.methods)} methods), {len(records)} ratings -> {out}"
    )
    return EXIT_OK


def cmd_aggregate(args: argparse.Namespace) -> int:
    from .subjective import aggregate_ratings, read_ratings_log, write_aggregates_csv

    records = read_ratings_log(getattr(args, "in"))
    if not records:
        raise ValidationError(f"empty ratings log: {getattr(args, 'in')}")
    result = aggregate_ratings(records)
    out = Path(args.out) if args.out else Path(getattr(args, "in")).parent / "aggregates.csv"
    write_aggregates_csv(result.aggregates, out)
    for dim, excluded in result.excluded_by_dim.items():
        if excluded:
            print(f"excluded raters ({dim}): {', '.join(excluded)}")
    print(f"wrote {len(result.aggregates)} aggregates -> {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from .training import cross_validate

    doc = load_config_doc(args)
    for key, value in (
        ("k_folds", args.folds),
        ("epochs", args.epochs),
        ("seed", args.seed),
        ("batch_size", args.batch_size),
    ):
        if value is not None:
            doc[key] = value
    config = build_train_config(doc)

    manifest = load_manifest(args.manifest)
    aggregates = _load_aggregates(args)
    root = Path(args.root) if args.root else Path(args.manifest).parent
    result = cross_validate(config, manifest, aggregates, root, out_dir=args.out)
    for dim, metrics in result.summary.items():
        line = " ".join(f"{m}={v['mean']:.4f}+/-{v['std']:.4f}" for m, v in metrics.items())
        print(f"{dim}: {line}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .metrics import evaluate
    from .training import TensorCache, load_scorer, predict_scores

    doc = load_config_doc(args)
    config = build_train_config(doc)
    manifest = load_manifest(args.manifest)
    aggregates = _load_aggregates(args)
    root = Path(args.root) if args.root else Path(args.manifest).parent
    model = load_scorer(config.encoder, args.checkpoint)
    cache = TensorCache(manifest, root, config.encoder)
    if args.ids:
        sample_ids = [l.strip() for l in Path(args.ids).read_text().splitlines() if l.strip()]
    else:
        sample_ids = [s.sample_id for s in manifest.samples]
    predictions = predict_scores(model, cache, sample_ids, config.batch_size)
    wanted = set(sample_ids)
    report = evaluate(predictions, [a for a in aggregates if a.sample_id in wanted])
    out = Path(args.out) if args.out else Path(args.checkpoint).parent / "eval_metrics.json"
    report.save(out)
    for dim, metrics in report.per_dimension.items():
        line = " ".join(f"{m}={v:.4f}" for m, v in metrics.items())
        print(f"{dim}: {line}")
    print(f"wrote metrics -> {out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    raters = [r.strip() for r in args.raters.split(",") if r.strip()]
    if not raters:
        raise ConfigError("serve requires at least one rater id (--raters r1,r2,...)")
    root = Path(args.root) if args.root else Path(args.manifest).parent
    app = create_app(
        manifest=args.manifest, root=root, log_path=args.log, raters=raters, seed=args.seed
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .subjective import (
        emotion_congruence_accuracy,
        read_aggregates_csv,
        score_range_report,
    )

    manifest = load_manifest(args.manifest)
    aggregates = read_aggregates_csv(args.aggregates)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ranges = score_range_report(aggregates, manifest)
    with open(out / "score_ranges.csv", "w") as f:
        f.write("method,dimension,min,mean,max\n")
        for method, by_dim in ranges.items():
            for dim, r in by_dim.items():
                f.write(f"{method.value},{dim},{r.minimum:.4f},{r.mean:.4f},{r.maximum:.4f}\n")

    table = emotion_congruence_accuracy(aggregates, manifest)
    with open(out / "congruence.csv", "w") as f:
        f.write("method,emotion,accuracy,support\n")
        for (method, emotion), acc in sorted(
            table.accuracy.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
        ):
            support = table.support[(method, emotion)]
            f.write(f"{method.value},{emotion.value},{acc:.4f},{support}\n")

    lines = ["# Rating analytics", "", "## Score ranges (MOS)", ""]
    lines += ["| method | dimension | min | mean | max |", "| --- | --- | --- | --- | --- |"]
    for method, by_dim in ranges.items():
        for dim, r in by_dim.items():
            lines.append(
                f"| {method.value} | {dim} | {r.minimum:.2f} | {r.mean:.2f} | {r.maximum:.2f} |"
            )
    lines += ["", "## Emotion congruence accuracy", ""]
    lines += ["| method | emotion | accuracy | support |", "| --- | --- | --- | --- |"]
    for (method, emotion), acc in sorted(
        table.accuracy.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
    ):
        lines.append(
            f"| {method.value} | {emotion.value} | {acc:.3f} | {table.support[(method, emotion)]} |"
        )
    (out / "report.md").write_text("\n".join(lines) + "\n")
    print(f"wrote score_ranges.csv, congruence.csv, report.md -> {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="gesturebench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument(
            "--set", dest="overrides", action="append", metavar="KEY=VALUE",
            help="dotted config override, repeatable",
        )

    p = sub.add_parser("synth", help="generate a synthetic dataset and rating log")
    p.add_argument("--out", required=True)
    p.add_argument("--n-audio", type=int, dest="n_audio")
    p.add_argument("--seed", type=int)
    p.add_argument("--raters", type=int)
    p.add_argument("--rater-noise", type=float, dest="rater_noise")
    p.add_argument("--adversary", action="store_true", help="inject a reversed-scale rater")
    p.add_argument("--no-media", action="store_true", help="manifest and ratings only")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("aggregate", help="ratings log -> aggregates CSV")
    p.add_argument("--in", required=True, help="ratings JSONL log")
    p.add_argument("--out", help="output CSV (default: aggregates.csv next to the log)")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train", help="cross-validate the scorer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings", help="raw ratings JSONL (aggregated on the fly)")
    p.add_argument("--aggregates", help="pre-computed aggregates CSV")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--root", help="media root (default: manifest directory)")
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratings")
    p.add_argument("--aggregates")
    p.add_argument("--root")
    p.add_argument("--ids", help="file with one sample id per line (default: all)")
    p.add_argument("--out", help="metrics JSON path")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the rating service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root")
    p.add_argument("--log", required=True, help="ratings JSONL log path")
    p.add_argument("--raters", required=True, help="comma-separated rater ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="score-range and congruence tables")
    p.add_argument("--aggregates", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, FormatError, ConfigError, ContractError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # pragma: no cover - defensive perimeter
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
