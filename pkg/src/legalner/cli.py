"""Command-line surface wiring the modules into reproducible pipelines.

Subcommands: ingest, partition, evaluate, robustness, losses, export-conll.
One master --seed drives every randomized stage through tagged sub-seeds,
so identical inputs, flags and seed give byte-identical outputs (no
timestamps are ever written).

Exit codes: 0 success, 2 bad parameters or usage, 3 malformed input
(parse), 4 invariant violations (validation), 5 one or more failed
cross-validation folds.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from .corpus import (
    SCRIPT_CYRILLIC,
    parse_annotations,
    filter_spanless,
    serialize_annotations,
    corpus_to_text,
    type_counts,
)
from .crossval import (
    TaggerSpec,
    confusion_csv,
    cross_validate,
    metrics_table_csv,
    report_to_dict,
)
from .electra import ElectraBatch, combined_loss, discriminator_loss, generator_loss
from .errors import AdapterError, ParseError, ValidationError
from .partition import Partition, balance_csv, balance_report, stratified_partition
from .robustness import NoiseSpec, OPERATIONS, robustness_csv, robustness_eval
from .schemes import TagScheme, corpus_to_conll, label_inventory
from .seeds import derive_seed
from .taggers import train_dictionary, train_linear, OracleTagger, ExternalTagger
from .translit import transliterate_corpus

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_FOLD_FAILURE = 5

_DEFAULTS = {
    "scheme": "BIO",
    "k": 5,
    "p": 1,
    "seed": 0,
    "jobs": 1,
    "epochs": 5,
    "out_dir": ".",
    "tagger": "dictionary",
    "noise_ops": ",".join(OPERATIONS),
    "noise_seed": 0,
}


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset options from --config, then from the hard defaults.

    Flags win over the config file, the config file wins over defaults.
    """
    config = {}
    if getattr(args, "config", None):
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise ValueError("config file must hold a JSON object")
    for key, value in config.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)
    for key, value in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_corpus(path: str):
    return parse_annotations(Path(path).read_bytes())


def _tagger_spec(args: argparse.Namespace) -> TaggerSpec:
    options: dict = {}
    if args.tagger == "linear":
        options["epochs"] = int(args.epochs)
    if args.tagger == "external":
        if not getattr(args, "adapter_cmd", None):
            raise ValueError("--adapter-cmd is required for the external tagger")
        options["command"] = shlex.split(args.adapter_cmd)
    return TaggerSpec(args.tagger, options)


def _train_full(args: argparse.Namespace, corpus, scheme: TagScheme):
    sentences = [s for _, _, s in corpus.sentences()]
    if args.tagger == "dictionary":
        return train_dictionary(sentences, scheme)
    if args.tagger == "linear":
        return train_linear(sentences, scheme, epochs=int(args.epochs),
                            seed=derive_seed(int(args.seed), "train-full"))
    if args.tagger == "oracle":
        return OracleTagger(scheme)
    if args.tagger == "external":
        return ExternalTagger(shlex.split(args.adapter_cmd), scheme)
    raise ValueError(f"unknown tagger kind {args.tagger!r}")


def _noise_grid(args: argparse.Namespace) -> list[NoiseSpec]:
    rates = [float(r) for r in str(args.rates).split(",") if r != ""]
    ops = tuple(op for op in str(args.noise_ops).split(",") if op)
    return [
        NoiseSpec(ops, rate, seed=derive_seed(int(args.noise_seed), f"noise-rate-{rate}"),
                  protect_entities=bool(getattr(args, "protect_entities", False)))
        for rate in rates
    ]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = parse_annotations(Path(args.input).read_bytes())
    if not corpus.documents:
        raise ValidationError("no documents in input")
    if corpus.script == SCRIPT_CYRILLIC:
        corpus = transliterate_corpus(corpus)
    corpus = filter_spanless(corpus)
    if not corpus.documents:
        raise ValidationError("no annotated sentences survive filtering")
    out = _out_dir(args)
    (out / "corpus.json").write_text(serialize_annotations(corpus), encoding="utf-8")
    (out / "corpus.txt").write_text(corpus_to_text(corpus) + "\n", encoding="utf-8")
    scheme = TagScheme(args.scheme)
    stats = {
        "documents": len(corpus.documents),
        "sentences": sum(len(d.sentences) for d in corpus.documents),
        "type_counts": {e.value: c for e, c in type_counts(corpus).items()},
        "label_inventory_size": len(label_inventory(corpus, scheme)),
        "scheme": scheme.value,
        "script": corpus.script,
    }
    (out / "stats.json").write_text(json.dumps(stats, ensure_ascii=False, indent=2),
                                    encoding="utf-8")
    print(json.dumps(stats, ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_partition(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus)
    part = stratified_partition(corpus, k=int(args.k), p=int(args.p), seed=int(args.seed))
    out = _out_dir(args)
    (out / "partition.json").write_text(part.to_json() + "\n", encoding="utf-8")
    (out / "balance.csv").write_text(balance_csv(balance_report(part, corpus)),
                                     encoding="utf-8")
    print(f"wrote partition.json and balance.csv to {out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus)
    part = Partition.from_json(Path(args.partition).read_text(encoding="utf-8"))
    scheme = TagScheme(args.scheme)
    report = cross_validate(corpus, part, _tagger_spec(args), seed=int(args.seed),
                            scheme=scheme, jobs=int(args.jobs))
    out = _out_dir(args)
    (out / "report.json").write_text(
        json.dumps(report_to_dict(report), ensure_ascii=False, indent=2), encoding="utf-8"
    )
    (out / "table.csv").write_text(
        metrics_table_csv(report.pooled_per_class, report.pooled_macro), encoding="utf-8"
    )
    (out / "confusion.csv").write_text(confusion_csv(report.pooled_confusion),
                                       encoding="utf-8")
    if getattr(args, "rates", None):
        tagger = _train_full(args, corpus, scheme)
        rows = robustness_eval(tagger, corpus, _noise_grid(args))
        (out / "robustness.csv").write_text(robustness_csv(rows), encoding="utf-8")
    for fold in report.folds:
        if fold.failed:
            print(f"fold {fold.fold} FAILED: {fold.error}", file=sys.stderr)
    print(f"pooled macro F1 {report.pooled_macro.f1:.4f}, "
          f"entity F1 {report.pooled_entity.overall.f1:.4f}")
    return EXIT_FOLD_FAILURE if report.failed_folds else EXIT_OK


def cmd_robustness(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus)
    scheme = TagScheme(args.scheme)
    tagger = _train_full(args, corpus, scheme)
    rows = robustness_eval(tagger, corpus, _noise_grid(args))
    out = _out_dir(args)
    (out / "robustness.csv").write_text(robustness_csv(rows), encoding="utf-8")
    print(robustness_csv(rows), end="")
    return EXIT_OK


def cmd_aggregate(args: argparse.Namespace) -> int:
    """Re-aggregate a per-class metrics CSV into its macro Average row.

    Reads the table.csv layout (Class,Recall,Precision,Accuracy,F1), skips
    any existing Average row, recomputes per-class F1 from the printed
    precision/recall pair, and macro-averages every column.
    """
    import csv as _csv

    with open(args.table, encoding="utf-8", newline="") as handle:
        rows = [row for row in _csv.DictReader(handle) if row["Class"] != "Average"]
    if not rows:
        raise ValidationError("no per-class rows in table")
    recalls = [float(r["Recall"]) for r in rows]
    precisions = [float(r["Precision"]) for r in rows]
    accuracies = [float(r["Accuracy"]) for r in rows]
    f1_from_pr = [
        (2 * p * r / (p + r)) if p + r else 0.0 for p, r in zip(precisions, recalls)
    ]
    n = len(rows)
    result = {
        "classes": n,
        "recall": sum(recalls) / n,
        "precision": sum(precisions) / n,
        "accuracy": sum(accuracies) / n,
        "f1": sum(f1_from_pr) / n,
        "f1_from_column": sum(float(r["F1"]) for r in rows) / n,
    }
    print(json.dumps(result, indent=2))
    print(
        f"Average,{result['recall']:.2f},{result['precision']:.2f},"
        f"{result['accuracy']:.2f},{result['f1']:.2f}"
    )
    return EXIT_OK


def cmd_losses(args: argparse.Namespace) -> int:
    batch = ElectraBatch.from_json(Path(args.batch).read_text(encoding="utf-8"))
    result = {
        "generator_loss": generator_loss(batch),
        "discriminator_loss": discriminator_loss(batch),
        "combined_loss": combined_loss(batch),
    }
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_export_conll(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus)
    out = _out_dir(args)
    (out / "corpus.conll").write_text(corpus_to_conll(corpus, TagScheme(args.scheme)),
                                      encoding="utf-8")
    print(f"wrote corpus.conll to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; explicit flags win on conflict")
    sub.add_argument("--out-dir", "-o", help="output directory (default: current)")
    sub.add_argument("--seed", type=int, help="master seed (default 0)")
    sub.add_argument("--scheme", choices=[s.value for s in TagScheme],
                     help="tagging scheme (default BIO)")


def _add_tagger_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tagger", choices=["dictionary", "linear", "oracle", "external"],
                     help="tagger kind (default dictionary)")
    sub.add_argument("--epochs", type=int, help="perceptron epochs (default 5)")
    sub.add_argument("--adapter-cmd", help="external tagger command line")


def _add_noise_options(sub: argparse.ArgumentParser, required: bool) -> None:
    sub.add_argument("--rates", required=required,
                     help="comma-separated per-character noise rates, e.g. 0.02,0.05")
    sub.add_argument("--noise-ops", help=f"comma-separated subset of {','.join(OPERATIONS)}")
    sub.add_argument("--noise-seed", type=int, help="noise seed (default 0)")
    sub.add_argument("--protect-entities", action="store_true",
                     help="never perturb characters inside entity spans")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="legalner",
        description="Corpus engineering and evaluation for legal-document NER.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate, transliterate and filter an annotation file")
    p.add_argument("input", help="native-format annotation JSON")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("partition", help="stratified document partition plus balance table")
    p.add_argument("corpus", help="corpus JSON (ingest output)")
    p.add_argument("--k", type=int, help="number of subsets (default 5)")
    p.add_argument("--p", type=int, choices=[1, 2], help="distance exponent (default 1)")
    _add_common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("evaluate", help="cross-validate a tagger over a partition")
    p.add_argument("corpus")
    p.add_argument("partition")
    p.add_argument("--jobs", type=int, help="max concurrent folds (default 1)")
    _add_tagger_options(p)
    _add_noise_options(p, required=False)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", help="clean-vs-noisy degradation table")
    p.add_argument("corpus")
    _add_tagger_options(p)
    _add_noise_options(p, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("aggregate", help="macro-average a per-class metrics CSV")
    p.add_argument("table", help="CSV in the table.csv layout")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("losses", help="evaluate pre-training losses on a JSON batch")
    p.add_argument("batch", help="JSON batch file")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("export-conll", help="token/offset/label TSV export")
    p.add_argument("corpus")
    _add_common(p)
    p.set_defaults(func=cmd_export_conll)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return EXIT_FOLD_FAILURE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
