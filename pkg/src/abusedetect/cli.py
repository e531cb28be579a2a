"""Command-line front end: ``ingest``, ``train``, ``evaluate``, ``predict``, ``report``.

Exit codes: 0 success, 2 input/usage error, 3 artifact error, 4 runtime failure.
Set ``ABUSEDETECT_CACHE`` to choose where transformer encoders are cached.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import AbuseDetectError, ArtifactError, ContractViolation, CorpusLoadError

EXIT_OK, EXIT_USAGE, EXIT_ARTIFACT, EXIT_RUNTIME = 0, 2, 3, 4
MODEL_CHOICES = ["nb", "lr", "svm", "cnn", "lstm", "contextual", "hybrid"]
FEATURE_CHOICES = ["tfidf", "w2v", "contextual"]

log = logging.getLogger("abusedetect")


class UsageError(Exception):
    pass


def _existing(path: str | None, flag: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{flag}: no such file: {path}")
    return p


def _load_config(args):
    from .models.config import ModelConfig

    config = ModelConfig.from_file(_existing(args.config, "--config")) if args.config else ModelConfig()
    sections: dict[str, dict] = {}
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        section, dot, name = key.partition(".")
        if not (sep and dot):
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        sections.setdefault(section, {})[name] = value
    if getattr(args, "encoder", None):
        sections.setdefault("features", {})["encoder"] = args.encoder
    if getattr(args, "epochs", None):
        sections.setdefault("hybrid", {})["epochs"] = args.epochs
    try:
        return config.override(**sections)
    except TypeError as exc:
        raise UsageError(f"bad --set key: {exc}") from exc


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_ingest(args) -> int:
    from .corpus import load_darkweb, load_pan12, load_roman_urdu, merge_corpora, save_corpus

    sources = [
        ("--darkweb", args.darkweb, lambda p: load_darkweb(p)),
        ("--pan12", args.pan12, lambda p: load_pan12(p, _existing(args.pan12_predators, "--pan12-predators"))),
        ("--roman-urdu", args.roman_urdu,
         lambda p: load_roman_urdu(p, _existing(args.roman_urdu_labels, "--roman-urdu-labels"))),
    ]
    chosen = [(flag, _existing(path, flag), fn) for flag, path, fn in sources if path]
    if not chosen:
        raise UsageError("ingest needs at least one of --darkweb, --pan12, --roman-urdu")
    parts = []
    for flag, path, fn in chosen:
        result = fn(path)
        for err in result.errors:
            print(f"{flag} {path}: {err}", file=sys.stderr)
        for w in result.warnings:
            print(f"{flag} {path}: warning: {w}", file=sys.stderr)
        parts.append(result.samples)
    corpus = merge_corpora(parts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    stats = corpus.stats.to_dict()
    stats_path = Path(args.stats) if args.stats else out.with_suffix(".stats.json")
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    _print_json(stats)
    return EXIT_OK


def _read_corpus(path):
    from .corpus import load_corpus

    return load_corpus(_existing(path, "--corpus"))


def cmd_evaluate(args) -> int:
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    from .corpus import stratified_kfold
    from .eval import cross_validate
    from .features import make_encoder
    from .models import set_reproducible
    from .report import plot_confusion, plot_roc, summary_line

    config = _load_config(args)
    corpus = _read_corpus(args.corpus)
    if args.reproducible:
        set_reproducible(True)
    folds = stratified_kfold(corpus, k=args.k, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    encoder = None
    reports = []
    for kind in args.model:
        features = args.features
        if encoder is None and (kind in ("hybrid", "contextual") or features == "contextual"):
            encoder = make_encoder(config.features.encoder, seed=args.seed)
        report = cross_validate(corpus, folds, kind, config, seed=args.seed, feature_kind=features,
                                encoder=encoder)
        d = out / report.label
        d.mkdir(exist_ok=True)
        report.save(d / "report.json")
        report.roc.to_csv(d / "roc.csv")
        plot_roc([report], d / "roc")
        plot_confusion(report, d / "confusion")
        reports.append(report)
    for r in sorted(reports, key=lambda r: -r.average.f1):
        print(summary_line(r))
    return EXIT_OK


def cmd_train(args) -> int:
    from .features import make_encoder
    from .models import save_model, set_reproducible, train

    config = _load_config(args)
    corpus = _read_corpus(args.corpus)
    if args.reproducible:
        set_reproducible(True)
    encoder = None
    if args.model in ("hybrid", "contextual") or args.features == "contextual":
        encoder = make_encoder(config.features.encoder, seed=args.seed)
    model = train(args.model, config, corpus.texts, corpus.labels, seed=args.seed,
                  feature_kind=args.features, encoder=encoder)
    save_model(model, args.out)
    print(f"saved {model.kind.value}/{model.feature_kind.value} model to {args.out} "
          f"(train {model.training_metadata['train_seconds']:.2f}s)")
    return EXIT_OK


def model_version(artifact_dir) -> str:
    from .models.persistence import MANIFEST, read_manifest

    manifest = read_manifest(artifact_dir)
    digest = hashlib.sha256((Path(artifact_dir) / MANIFEST).read_bytes()).hexdigest()[:12]
    return f"{manifest['kind']}-{manifest['feature_kind']}-{digest}"


def cmd_predict(args) -> int:
    from .models import load_model, predict

    if not Path(args.artifact).exists():
        raise ArtifactError(f"--artifact: no such model directory: {args.artifact}")
    model = load_model(args.artifact)
    version = model_version(args.artifact)
    src = open(_existing(args.input, "--input"), encoding="utf-8") if args.input else sys.stdin
    with src:
        texts = [ln.rstrip("\n") for ln in src if ln.strip()]
    pred = predict(model, texts)
    for label, p in zip(pred.labels, pred.abusive_scores):
        print(json.dumps({"label": label.value, "abusive_probability": round(float(p), 6),
                          "model_version": version}, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    from .eval import CvReport
    from .report import checksum_warning, format_table, plot_roc, table_csv, table_order

    reports = []
    for path in args.reports:
        try:
            reports.append(CvReport.load(_existing(path, "report")))
        except (KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"{path}: not a CvReport ({exc})") from exc
    reports = table_order(reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    warning = checksum_warning(reports)
    text = format_table(reports)
    if warning:
        text = warning + "\n\n" + text
    (out / "table.txt").write_text(text + "\n")
    (out / "table.csv").write_text(table_csv(reports))
    plot_roc(reports, out / "roc")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abusedetect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp, multiple=False):
        sp.add_argument("--corpus", required=True, help="unified corpus (JSON Lines)")
        if multiple:
            sp.add_argument("--model", choices=MODEL_CHOICES, action="append", required=True,
                            help="model kind; repeat to evaluate several")
        else:
            sp.add_argument("--model", choices=MODEL_CHOICES, required=True)
        sp.add_argument("--features", choices=FEATURE_CHOICES, help="default depends on the model kind")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
        sp.add_argument("--reproducible", action="store_true", help="deterministic single-threaded kernels")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--encoder", help="'random:<dim>' or a Hugging Face model name[@revision]")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")

    sp = sub.add_parser("ingest", help="merge source datasets into one corpus")
    sp.add_argument("--darkweb")
    sp.add_argument("--pan12")
    sp.add_argument("--pan12-predators")
    sp.add_argument("--roman-urdu")
    sp.add_argument("--roman-urdu-labels")
    sp.add_argument("--out", required=True)
    sp.add_argument("--stats", help="stats JSON path (default: <out>.stats.json)")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("evaluate", help="k-fold cross-validation")
    model_flags(sp, multiple=True)
    sp.add_argument("--k", type=int, default=5)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("train", help="train one model on the whole corpus")
    model_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="label texts, one per input line")
    sp.add_argument("--artifact", required=True, help="trained model directory")
    sp.add_argument("--input", help="text file (default: stdin)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("report", help="compare CvReport files")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusLoadError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except AbuseDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
