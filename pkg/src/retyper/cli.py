"""Command-line pipeline: composable stages communicating through files.

Every stage writes a run manifest next to its outputs; outputs are
deterministic for fixed seeds and inputs (rerunning reproduces them byte for
byte, timestamps living only inside the manifests).

Exit codes: 0 success, 1 invalid input or flags, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, corpus as corpus_mod, evalreport, predictors
from .dwarf.index import SIDECAR_SUFFIX, DwarfIndex, binary_id_of, index_binary
from .errors import NoDebugInfoError, RetyperError, ValidationError
from .ingest import read_export_file
from .manifest import RunManifest, hash_file, hash_obj
from .model import (
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    new_model,
    save_checkpoint,
    train_model,
)
from .typelib import TypeLexicon, build_type_lexicon

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.rtyp"


class _Parser(argparse.ArgumentParser):
    """argparse, but flag mistakes are user errors (exit 1, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _cache_dir(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("RETYPER_CACHE_DIR")
    return Path(env) if env else Path("dwarf-cache")


def _index_one(args: tuple[str, str, int]) -> tuple[str, str, str]:
    path, out_dir, pointer_size = args
    binary_id = binary_id_of(path)
    sidecar = Path(out_dir) / f"{binary_id}{SIDECAR_SUFFIX}"
    if sidecar.exists():
        return binary_id, str(sidecar), "cached"
    index = index_binary(path, pointer_size)
    index.save(Path(out_dir))
    return binary_id, str(sidecar), "indexed"


def _run_indexing(paths: list[Path], out_dir: Path, jobs: int) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    work = [(str(p), str(out_dir), 8) for p in sorted(paths)]
    results = {}
    skipped = []
    if jobs <= 1:
        for w in work:
            try:
                binary_id, sidecar, state = _index_one(w)
            except NoDebugInfoError:
                skipped.append(w[0])
                continue
            results[binary_id] = Path(sidecar)
            log.info("%s %s -> %s", state, w[0], sidecar)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for w, outcome in zip(work, pool.map(_index_one_safe, work)):
                if outcome is None:
                    skipped.append(w[0])
                    continue
                binary_id, sidecar, state = outcome
                results[binary_id] = Path(sidecar)
                log.info("%s %s -> %s", state, w[0], sidecar)
    for path in skipped:
        log.info("skipped %s: no debug info", path)
    return results


def _index_one_safe(args):
    try:
        return _index_one(args)
    except NoDebugInfoError:
        return None


def _load_indices(directory: Path) -> dict[str, DwarfIndex]:
    indices = {}
    for sidecar in sorted(Path(directory).glob(f"*{SIDECAR_SUFFIX}")):
        index = DwarfIndex.load(sidecar)
        indices[index.binary_id] = index
    return indices


def _export_paths(spec: list[str]) -> list[Path]:
    paths: list[Path] = []
    for item in spec:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.jsonl")))
        elif p.exists():
            paths.append(p)
        else:
            raise ValidationError(f"export path does not exist: {p}")
    if not paths:
        raise ValidationError(f"no export files found in {', '.join(spec)}")
    return paths


def _read_exports(paths: list[Path]):
    for p in paths:
        yield from read_export_file(p)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"--ratios wants three comma-separated numbers: {text!r}")
    try:
        a, b, c = (float(x) for x in parts)
    except ValueError as e:
        raise ValidationError(f"--ratios: {e}") from e
    return (a, b, c)


def _require_file(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise ValidationError(f"{what} not found: {path}")
    return Path(path)


# -- subcommand implementations ---------------------------------------------


def cmd_index_dwarf(args) -> int:
    out = _cache_dir(args.out)
    results = _run_indexing([Path(p) for p in args.binaries], out, args.jobs)
    for binary_id, sidecar in sorted(results.items()):
        print(f"{binary_id}  {sidecar}")
    print(f"indexed {len(results)} of {len(args.binaries)} binaries")
    return 0


def cmd_ingest(args) -> int:
    total = 0
    for path in _export_paths(args.exports):
        n = sum(1 for _ in read_export_file(path))
        print(f"{path}: {n} records ok")
        total += n
    print(f"validated {total} records")
    return 0


def _build_corpus(
    exports: list[Path],
    indices_dir: Path,
    out_dir: Path,
    *,
    mode: str,
    ratios: tuple[float, float, float],
    seed: int,
):
    indices = _load_indices(indices_dir)
    if not indices:
        raise ValidationError(f"no DWARF indices in {indices_dir}")
    examples, rejections = corpus_mod.build_labeled_examples(
        _read_exports(exports), indices, mode
    )
    train, valid, test = corpus_mod.split_corpus(examples, ratios, seed)
    test = corpus_mod.mark_in_train(test, train)
    manifest = corpus_mod.save_corpus(
        out_dir,
        (train, valid, test),
        seed=seed,
        ratios=ratios,
        mode=mode,
        rejections=rejections,
    )
    return (train, valid, test), manifest, rejections


def cmd_build_corpus(args) -> int:
    exports = _export_paths(args.exports)
    out_dir = Path(args.out)
    splits, manifest, rejections = _build_corpus(
        exports,
        Path(args.indices),
        out_dir,
        mode=args.mode,
        ratios=_parse_ratios(args.ratios),
        seed=args.seed,
    )
    run = RunManifest(
        "build-corpus",
        {str(p): hash_file(p) for p in exports},
        args.seed,
        {"mode": args.mode, "ratios": args.ratios},
    )
    run.write(out_dir / "run-manifest.json")
    for split in splits:
        print(
            f"{split.name}: {len(split.examples)} examples, "
            f"{len(split.binary_ids)} binaries"
        )
    if rejections:
        print("rejected:", dict(sorted(rejections.items())))
    return 0


def _load_corpus_dir(path) -> tuple:
    directory = Path(path)
    _require_file(directory / "manifest.json", "corpus manifest")
    return corpus_mod.load_corpus(directory)


def cmd_stats(args) -> int:
    splits = _load_corpus_dir(args.corpus)
    rows = [(s.name, corpus_mod.compute_stats(s)) for s in splits]
    text = corpus_mod.render_stats_text(rows)
    print(text, end="")
    if args.csv:
        Path(args.csv).write_text(corpus_mod.render_stats_csv(rows))
    return 0


def cmd_fit_baselines(args) -> int:
    train, _valid, _test = _load_corpus_dir(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lexicon = build_type_lexicon(
        (t for ex in train.examples for t in ex.gold_types.values()),
        min_count=args.min_type_count,
    )
    (out / "lexicon.json").write_text(
        json.dumps(lexicon.to_obj(), sort_keys=True, indent=1) + "\n"
    )
    table = predictors.fit_size_table(train)
    (out / "size_table.json").write_text(
        json.dumps(table.to_obj(), sort_keys=True, indent=1) + "\n"
    )
    print(f"lexicon: {len(lexicon)} types; size table: {len(table.table)} keys")
    return 0


def cmd_train(args) -> int:
    train, valid, _test = _load_corpus_dir(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = ModelConfig(
        d_model=args.d_model,
        n_heads=args.heads,
        n_layers=args.layers,
        d_ff=args.d_ff,
        vocab_size=args.vocab_size,
        max_seq_len=args.max_seq_len,
        mask_penalty=args.mask_penalty,
        seed=args.seed,
    )
    model = new_model(config, train, min_type_count=args.min_type_count)
    tcfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        clip_norm=args.clip_norm,
        batch_size=args.batch_size,
    )
    train_log = train_model(model, train, valid, tcfg)
    run = RunManifest(
        "train",
        {"corpus": hash_obj(corpus_mod.load_manifest(args.corpus))},
        args.seed,
        {**model.config.to_obj(), "epochs": tcfg.epochs, "lr": tcfg.learning_rate},
    )
    manifest_hash = run.write(out / "train-manifest.json")
    save_checkpoint(model, out / CHECKPOINT_NAME, manifest_hash)
    train_log.write_csv(out / "training_log.csv")
    last = train_log.rows[-1]
    print(
        f"trained {tcfg.epochs} epochs: loss {last.loss:.4f}, "
        f"train {last.train_accuracy:.3f}, "
        f"best valid {train_log.best_valid_accuracy:.3f} "
        f"(epoch {train_log.best_epoch})"
    )
    print(f"checkpoint: {out / CHECKPOINT_NAME}")
    return 0


def _predict_split(args, split) -> list:
    if args.predictor == "retyper":
        model = load_checkpoint(
            _require_file(args.checkpoint, "checkpoint")
        )
        return [model.predict(ex) for ex in split.examples]
    if args.predictor == "identity":
        return [predictors.predict_identity(ex) for ex in split.examples]
    baselines = Path(args.baselines or ".")
    if args.predictor == "most-frequent":
        lex_path = _require_file(baselines / "lexicon.json", "lexicon")
        lexicon = TypeLexicon.from_obj(json.loads(lex_path.read_text()))
        return [
            predictors.predict_most_frequent(ex, lexicon) for ex in split.examples
        ]
    if args.predictor == "size-conditioned":
        table_path = _require_file(baselines / "size_table.json", "size table")
        table = predictors.SizeTable.from_obj(json.loads(table_path.read_text()))
        return [
            predictors.predict_size_conditioned(ex, table) for ex in split.examples
        ]
    raise ValidationError(f"unknown predictor {args.predictor!r}")


def cmd_predict(args) -> int:
    splits = _load_corpus_dir(args.corpus)
    split = {s.name: s for s in splits}[args.split]
    preds = _predict_split(args, split)
    n = predictors.write_predictions(Path(args.out), preds)
    print(f"{args.predictor}: {n} variable predictions -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    _train, _valid, test = _load_corpus_dir(args.corpus)
    pred_path = _require_file(Path(args.predictions), "predictions file")
    manifest = corpus_mod.load_manifest(args.corpus)
    report = evalreport.aggregate(
        test,
        predictors.read_predictions(pred_path),
        mode=manifest.get("mode", ""),
        manifest_hash=hash_obj(manifest),
    )
    paths = evalreport.save_report(report, Path(args.out))
    print(evalreport.render_report(report), end="")
    print("wrote", ", ".join(str(p) for p in paths))
    return 0


def cmd_report(args) -> int:
    path = _require_file(Path(args.summary), "report summary")
    report = evalreport.AccuracyReport.from_obj(json.loads(path.read_text()))
    print(evalreport.render_report(report), end="")
    if args.out:
        evalreport.save_report(report, Path(args.out))
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    binaries_dir = Path(args.binaries)
    if not binaries_dir.is_dir():
        raise ValidationError(f"--binaries is not a directory: {binaries_dir}")
    binaries = [
        p
        for p in sorted(binaries_dir.iterdir())
        if p.is_file() and p.read_bytes()[:4] == b"\x7fELF"
    ]
    if not binaries:
        raise ValidationError(f"no ELF files under {binaries_dir}")

    cache = _cache_dir(args.cache) if args.cache or os.environ.get(
        "RETYPER_CACHE_DIR"
    ) else out / "dwarf-cache"
    _run_indexing(binaries, cache, args.jobs)

    exports = _export_paths(args.exports)
    corpus_dir = out / "corpus"
    ratios = _parse_ratios(args.ratios)
    (train, valid, test), corpus_manifest, rejections = _build_corpus(
        exports, cache, corpus_dir, mode=args.mode, ratios=ratios, seed=args.seed
    )
    print(
        f"corpus: train {len(train.examples)} / valid {len(valid.examples)} / "
        f"test {len(test.examples)} examples; rejected {dict(sorted(rejections.items()))}"
    )

    rows = [(s.name, corpus_mod.compute_stats(s)) for s in (train, valid, test)]
    (out / "stats.txt").write_text(corpus_mod.render_stats_text(rows))
    (out / "stats.csv").write_text(corpus_mod.render_stats_csv(rows))

    baselines_dir = out / "baselines"
    baselines_dir.mkdir(exist_ok=True)
    lexicon = build_type_lexicon(
        (t for ex in train.examples for t in ex.gold_types.values()),
        min_count=args.min_type_count,
    )
    (baselines_dir / "lexicon.json").write_text(
        json.dumps(lexicon.to_obj(), sort_keys=True, indent=1) + "\n"
    )
    size_table = predictors.fit_size_table(train)
    (baselines_dir / "size_table.json").write_text(
        json.dumps(size_table.to_obj(), sort_keys=True, indent=1) + "\n"
    )

    config = ModelConfig(
        d_model=args.d_model,
        n_heads=args.heads,
        n_layers=args.layers,
        d_ff=args.d_ff,
        vocab_size=args.vocab_size,
        max_seq_len=args.max_seq_len,
        mask_penalty=args.mask_penalty,
        seed=args.seed,
    )
    model = new_model(config, train, min_type_count=args.min_type_count)
    tcfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        clip_norm=args.clip_norm,
        batch_size=args.batch_size,
    )
    train_log = train_model(model, train, valid, tcfg)
    run = RunManifest(
        "pipeline",
        {
            **{str(p): hash_file(p) for p in exports},
            **{str(p): hash_file(p) for p in binaries},
        },
        args.seed,
        {
            **model.config.to_obj(),
            "epochs": tcfg.epochs,
            "lr": tcfg.learning_rate,
            "mode": args.mode,
            "ratios": args.ratios,
        },
    )
    manifest_hash = run.write(out / "run-manifest.json")
    save_checkpoint(model, out / CHECKPOINT_NAME, manifest_hash)
    train_log.write_csv(out / "training_log.csv")
    print(
        f"trained: best valid accuracy {train_log.best_valid_accuracy:.3f} "
        f"at epoch {train_log.best_epoch}"
    )

    preds_dir = out / "predictions"
    reports_dir = out / "reports"
    preds_dir.mkdir(exist_ok=True)
    reports_dir.mkdir(exist_ok=True)
    runs = {
        "identity": lambda ex: predictors.predict_identity(ex),
        "most-frequent": lambda ex: predictors.predict_most_frequent(ex, lexicon),
        "size-conditioned": lambda ex: predictors.predict_size_conditioned(
            ex, size_table
        ),
        "retyper": model.predict,
    }
    corpus_hash = hash_obj(corpus_manifest)
    for name, fn in runs.items():
        preds = [fn(ex) for ex in test.examples]
        predictors.write_predictions(preds_dir / f"{name}.jsonl", preds)
        report = evalreport.aggregate(
            test, preds, mode=args.mode, manifest_hash=corpus_hash
        )
        evalreport.save_report(report, reports_dir / name)
        overall = report.percentage("overall", "overall")
        print(f"{name}: overall accuracy {overall or '-'}%")
    print(f"pipeline outputs in {out}")
    return 0


# -- argument wiring ---------------------------------------------------------


def _add_model_flags(p: _Parser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-type-count", type=int, default=1)
    p.add_argument("--mask-penalty", type=float, default=4.0)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=128)
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--max-seq-len", type=int, default=256)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="retyper", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index-dwarf", help="extract ground-truth indices")
    p.add_argument("binaries", nargs="+")
    p.add_argument("--out", help="index directory (default: $RETYPER_CACHE_DIR)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(fn=cmd_index_dwarf)

    p = sub.add_parser("ingest", help="validate decompiler export files")
    p.add_argument("exports", nargs="+")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("build-corpus", help="label, filter, and split exports")
    p.add_argument("--exports", nargs="+", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=corpus_mod.MODES, default="debug-direct")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_build_corpus)

    p = sub.add_parser("stats", help="corpus statistics table")
    p.add_argument("corpus")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("fit-baselines", help="fit lexicon and size table")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--min-type-count", type=int, default=1)
    p.set_defaults(fn=cmd_fit_baselines)

    p = sub.add_parser("train", help="train the retyping model")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="write per-variable predictions")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument(
        "--predictor",
        choices=("retyper", "identity", "most-frequent", "size-conditioned"),
        default="retyper",
    )
    p.add_argument("--checkpoint")
    p.add_argument("--baselines")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions into the grid")
    p.add_argument("corpus")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True, help="report path prefix")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="render a saved report summary")
    p.add_argument("summary")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--binaries", required=True)
    p.add_argument("--exports", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", help="DWARF index cache (default: $RETYPER_CACHE_DIR)")
    p.add_argument("--mode", choices=corpus_mod.MODES, default="debug-direct")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except RetyperError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 — internal errors get a traceback + exit 2
        import traceback

        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
