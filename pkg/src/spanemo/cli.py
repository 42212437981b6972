"""Command-line entry point.

Subcommands: validate-data, train, eval, predict, analyze-words,
analyze-heatmap, analyze-correlations, sweep-alpha. Machine-readable
outputs go under ``--out``; the effective configuration of every run is
echoed there as config.json. Exit codes: 0 success, 2 usage error,
1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from spanemo import analysis
from spanemo.data import (
    Dataset,
    compute_stats,
    dump_jsonl,
    load_ec_tsv,
    normalize,
    write_ec_tsv,
)
from spanemo.errors import SpanEmoError, UsageError
from spanemo.labels import LabelSpace, default_semeval_space
from spanemo.metrics import evaluate, stratified_eval
from spanemo.trainer import (
    TrainConfig,
    load_checkpoint,
    predict_dataset,
    train,
)

LANGUAGES = ("english", "arabic", "spanish")

# TrainConfig fields settable from the command line or a config file.
_CONFIG_FLAGS = (
    ("batch_size", int),
    ("epochs", int),
    ("early_stop_patience", int),
    ("lr_encoder", float),
    ("lr_head", float),
    ("dropout", float),
    ("alpha", float),
    ("seed", int),
    ("ablation", str),
    ("selection_metric", str),
    ("threshold", float),
    ("max_seq_len", int),
    ("toy_hidden_width", int),
    ("toy_window", int),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spanemo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--language", choices=LANGUAGES, default="english",
                       help="selects default label surface tokens and encoder id")
        p.add_argument("--surfaces", help="JSON file with per-class label surface tokens")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("validate-data", help="check TSV files and print dataset statistics")
    p.add_argument("--tsv", nargs="+", required=True, help="one or more E-c TSV files")
    p.add_argument("--split", choices=("train", "valid", "test"),
                   help="force the split name (single file only)")
    p.add_argument("--dump", action="store_true",
                   help="also write a canonical JSON-lines dump per file under --out")
    add_common(p, out_required=False)

    p = sub.add_parser("train", help="fine-tune a model")
    p.add_argument("--train", required=True, dest="train_tsv")
    p.add_argument("--valid", required=True, dest="valid_tsv")
    p.add_argument("--config", help="flat JSON config file; flags win on conflict")
    p.add_argument("--encoder", choices=("toy", "pretrained"), default="toy")
    p.add_argument("--model-id", help="registry id or local path for the pretrained encoder")
    for name, typ in _CONFIG_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, dest=name, default=None)
    add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a TSV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tsv", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--strata", default="",
                   help="comma-separated minimum gold-label counts, e.g. 1,2,3")
    add_common(p)

    p = sub.add_parser("predict", help="write predictions in the official TSV layout")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tsv", required=True)
    p.add_argument("--threshold", type=float, default=None)
    add_common(p)

    p = sub.add_parser("analyze-words", help="top-k associated words per emotion")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tsv", required=True)
    p.add_argument("--top-k", type=int, default=10, dest="top_k")
    add_common(p)

    p = sub.add_parser("analyze-heatmap", help="label-word similarity heatmap for one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", help="raw sentence to analyze")
    p.add_argument("--tsv", help="take the sentence from this file instead")
    p.add_argument("--id", dest="row_id", help="row id within --tsv")
    add_common(p)

    p = sub.add_parser("analyze-correlations", help="pairwise label correlation matrix")
    p.add_argument("--tsv", required=True)
    p.add_argument("--source", choices=("gold", "predicted"), default="gold")
    p.add_argument("--checkpoint", help="required when --source predicted")
    p.add_argument("--threshold", type=float, default=None)
    add_common(p)

    p = sub.add_parser("sweep-alpha", help="train once per alpha value and plot the metrics")
    p.add_argument("--train", required=True, dest="train_tsv")
    p.add_argument("--valid", required=True, dest="valid_tsv")
    p.add_argument("--config", help="flat JSON config file; flags win on conflict")
    p.add_argument("--grid", default="", help="comma-separated alpha values (default 0,0.1,...,1)")
    for name, typ in _CONFIG_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, dest=name, default=None)
    add_common(p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpanEmoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _check_input_paths(args) -> None:
    """Referenced paths must exist at command start (spec'd as a usage error)."""
    candidates = []
    for attr in ("tsv", "train_tsv", "valid_tsv", "checkpoint", "config", "surfaces"):
        value = getattr(args, attr, None)
        if value is None:
            continue
        candidates.extend(value if isinstance(value, list) else [value])
    for path in candidates:
        if not os.path.exists(path):
            raise UsageError(f"path does not exist: {path}")


def _dispatch(args) -> int:
    _check_input_paths(args)
    handler = {
        "validate-data": _cmd_validate_data,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "predict": _cmd_predict,
        "analyze-words": _cmd_analyze_words,
        "analyze-heatmap": _cmd_analyze_heatmap,
        "analyze-correlations": _cmd_analyze_correlations,
        "sweep-alpha": _cmd_sweep_alpha,
    }[args.command]
    return handler(args)


def _space_for(args) -> LabelSpace:
    space = default_semeval_space(args.language)
    if args.surfaces:
        with open(args.surfaces, encoding="utf-8") as fh:
            surfaces = json.load(fh)
        space = space.with_surfaces(surfaces)
    return space


def _ensure_out(args) -> str | None:
    out = getattr(args, "out", None)
    if out:
        os.makedirs(out, exist_ok=True)
    return out


def _echo_config(out: str, payload: dict) -> None:
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _merged_config(args) -> TrainConfig:
    data = TrainConfig().to_dict()
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(data)
        if unknown:
            raise UsageError(f"unknown keys in {config_path}: {sorted(unknown)}")
        data.update(file_cfg)
    for name, _ in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return TrainConfig.from_dict(data)


def _load(args, path: str, space: LabelSpace, split: str | None = None) -> Dataset:
    return load_ec_tsv(path, space, split=split)


def _cmd_validate_data(args) -> int:
    if args.split and len(args.tsv) > 1:
        raise UsageError("--split only applies to a single --tsv file")
    if args.dump and not args.out:
        raise UsageError("--dump requires --out")
    space = _space_for(args)
    datasets = [_load(args, path, space, split=args.split) for path in args.tsv]
    stats = compute_stats(datasets)
    print(stats.format_table())
    out = _ensure_out(args)
    if out:
        with open(os.path.join(out, "stats.json"), "w", encoding="utf-8") as fh:
            json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if args.dump:
            for path, dataset in zip(args.tsv, datasets):
                stem = os.path.splitext(os.path.basename(path))[0]
                dump_jsonl(dataset, os.path.join(out, f"{stem}.jsonl"))
    return 0


def _build_model(args, cfg: TrainConfig, space: LabelSpace):
    if args.encoder == "toy":
        return None  # trainer builds it from cfg
    from spanemo.model import PooledHead, SpanEmoModel, SpanHead
    from spanemo.pretrained import DEFAULT_MODEL_IDS, PretrainedTransformerEncoder

    model_id = args.model_id or DEFAULT_MODEL_IDS[args.language]
    encoder = PretrainedTransformerEncoder(model_id, seed=cfg.seed)
    if cfg.sentence_only:
        head = PooledHead(encoder.hidden_width, len(space), dropout=cfg.dropout, seed=cfg.seed + 1)
    else:
        head = SpanHead(encoder.hidden_width, dropout=cfg.dropout, seed=cfg.seed + 1)
    return SpanEmoModel(space, encoder.tokenizer, encoder, head,
                        sentence_only=cfg.sentence_only, max_seq_len=cfg.max_seq_len)


def _cmd_train(args) -> int:
    cfg = _merged_config(args)
    space = _space_for(args)
    train_set = _load(args, args.train_tsv, space, split="train")
    valid_set = _load(args, args.valid_tsv, space, split="valid")
    out = _ensure_out(args)
    _echo_config(out, {
        "command": "train",
        "train": args.train_tsv,
        "valid": args.valid_tsv,
        "encoder": args.encoder,
        "language": args.language,
        **cfg.to_dict(),
    })
    model = _build_model(args, cfg, space)
    result = train(cfg, train_set, valid_set, out, model=model)
    print(f"best epoch {result.best_epoch}: {cfg.selection_metric}={result.best_score:.4f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return 0


def _cmd_eval(args) -> int:
    space = _space_for(args)
    dataset = _load(args, args.tsv, space)
    model, meta = load_checkpoint(args.checkpoint)
    if model.space.names != dataset.space.names:
        raise UsageError("checkpoint label space does not match the dataset's")
    threshold = args.threshold if args.threshold is not None else meta.get("threshold", 0.5)
    gold = [ex.labels for ex in dataset]
    _, preds = predict_dataset(model, dataset, threshold)
    report = evaluate(gold, preds)
    blocks = {"overall": report.to_dict()}
    print("overall")
    print(report.format_table(space.names))
    for part in filter(None, args.strata.split(",")):
        min_k = int(part)
        stratum = stratified_eval(gold, preds, min_k)
        blocks[f"min_{min_k}"] = stratum.to_dict()
        print(f"\n>= {min_k} co-existing")
        print(stratum.format_table(space.names))
    out = _ensure_out(args)
    _echo_config(out, {"command": "eval", "checkpoint": args.checkpoint, "tsv": args.tsv,
                       "threshold": threshold, "strata": args.strata})
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(blocks, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        for name, block in blocks.items():
            fh.write(f"[{name}]\n")
            for key in ("miF1", "maF1", "jacS", "n_examples"):
                fh.write(f"{key} {block[key]}\n")
            fh.write("\n")
    return 0


def _cmd_predict(args) -> int:
    space = _space_for(args)
    dataset = _load(args, args.tsv, space)
    model, meta = load_checkpoint(args.checkpoint)
    if model.space.names != space.names:
        raise UsageError("checkpoint label space does not match the requested language")
    threshold = args.threshold if args.threshold is not None else meta.get("threshold", 0.5)
    _, preds = predict_dataset(model, dataset, threshold)
    out = _ensure_out(args)
    _echo_config(out, {"command": "predict", "checkpoint": args.checkpoint,
                       "tsv": args.tsv, "threshold": threshold})
    path = os.path.join(out, "predictions.tsv")
    write_ec_tsv(path, space, [(ex.id, ex.raw_text, bits) for ex, bits in zip(dataset, preds)])
    print(f"wrote {path} ({len(dataset)} rows)")
    return 0


def _cmd_analyze_words(args) -> int:
    space = _space_for(args)
    dataset = _load(args, args.tsv, space)
    model, _ = load_checkpoint(args.checkpoint)
    table = analysis.word_associations(model, dataset, k=args.top_k)
    out = _ensure_out(args)
    _echo_config(out, {"command": "analyze-words", "checkpoint": args.checkpoint,
                       "tsv": args.tsv, "top_k": args.top_k})
    table.to_csv(os.path.join(out, "associations.csv"))
    with open(os.path.join(out, "associations.json"), "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    for emotion in table.emotions:
        words = " ".join(w for w, _ in table.entries[emotion])
        print(f"{emotion:>12}: {words}")
    return 0


def _cmd_analyze_heatmap(args) -> int:
    if bool(args.text) == bool(args.tsv):
        raise UsageError("pass exactly one of --text or --tsv")
    model, _ = load_checkpoint(args.checkpoint)
    if args.text:
        tokens = normalize(args.text)
    else:
        space = _space_for(args)
        dataset = _load(args, args.tsv, space)
        if args.row_id is None:
            raise UsageError("--id is required with --tsv")
        matches = [ex for ex in dataset if ex.id == args.row_id]
        if not matches:
            raise UsageError(f"id {args.row_id!r} not found in {args.tsv}")
        tokens = matches[0].tokens
    matrix = analysis.sentence_heatmap(model, tokens)
    out = _ensure_out(args)
    _echo_config(out, {"command": "analyze-heatmap", "checkpoint": args.checkpoint,
                       "text": args.text, "tsv": args.tsv, "id": args.row_id})
    matrix.to_csv(os.path.join(out, "heatmap.csv"))
    paths = analysis.render_heatmap(matrix, os.path.join(out, "heatmap"))
    print("wrote " + ", ".join([os.path.join(out, "heatmap.csv")] + paths))
    return 0


def _cmd_analyze_correlations(args) -> int:
    space = _space_for(args)
    dataset = _load(args, args.tsv, space)
    if args.source == "gold":
        vectors = dataset.label_matrix()
    else:
        if not args.checkpoint:
            raise UsageError("--source predicted requires --checkpoint")
        model, meta = load_checkpoint(args.checkpoint)
        threshold = args.threshold if args.threshold is not None else meta.get("threshold", 0.5)
        _, preds = predict_dataset(model, dataset, threshold)
        vectors = preds
    matrix = analysis.label_correlations(vectors, source=args.source, names=space.names)
    out = _ensure_out(args)
    _echo_config(out, {"command": "analyze-correlations", "tsv": args.tsv,
                       "source": args.source, "checkpoint": args.checkpoint})
    base = os.path.join(out, f"correlations_{args.source}")
    matrix.to_csv(base + ".csv")
    paths = analysis.render_correlations(matrix, base)
    print("wrote " + ", ".join([base + ".csv"] + paths))
    return 0


def _cmd_sweep_alpha(args) -> int:
    cfg = _merged_config(args)
    space = _space_for(args)
    train_set = _load(args, args.train_tsv, space, split="train")
    valid_set = _load(args, args.valid_tsv, space, split="valid")
    if args.grid:
        grid = [float(part) for part in args.grid.split(",")]
    else:
        grid = list(analysis.DEFAULT_ALPHA_GRID)
    out = _ensure_out(args)
    _echo_config(out, {
        "command": "sweep-alpha",
        "train": args.train_tsv,
        "valid": args.valid_tsv,
        "grid": grid,
        **cfg.to_dict(),
    })
    report = analysis.alpha_sweep(cfg, grid, train_set, valid_set, out)
    report.to_csv(os.path.join(out, "sweep.csv"))
    paths = analysis.render_sweep(report, os.path.join(out, "sweep"))
    for row in report.rows:
        if "error" in row:
            print(f"alpha={row['alpha']:g}: failed ({row['error']})")
        else:
            print(f"alpha={row['alpha']:g}: miF1={row['miF1']:.4f} "
                  f"maF1={row['maF1']:.4f} jacS={row['jacS']:.4f}")
    print("wrote " + ", ".join([os.path.join(out, "sweep.csv")] + paths))
    return 0


if __name__ == "__main__":
    sys.exit(main())
