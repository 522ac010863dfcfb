"""Command-line pipeline: ingest, split, encode, train, score, eval, ablate, synth.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Machine-readable
data goes to files or stdout; all diagnostics (including each run's fully
resolved configuration) go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus, evaluation, imgcode, pipeline, pngio, synth
from .cbigan.checkpoint import load_checkpoint, save_checkpoint
from .cbigan.losses import ScoreConfig, anomaly_scores
from .train import (
    TrainConfig,
    score_split,
    train,
    write_timings,
    write_train_log,
)

log = logging.getLogger("byteplotgan")

_LAYOUTS = {"hilbert": imgcode.HILBERT, "rowmajor": imgcode.ROW_MAJOR}
_COLORINGS = {"rgb": imgcode.PALETTE_RGB, "greyscale": imgcode.GREYSCALE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _log_resolved_config(command: str, resolved: dict) -> None:
    log.info("resolved config [%s]: %s", command, json.dumps(resolved, sort_keys=True))


def _sha256_path(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_TRAIN_FLAGS = {
    "--batch-size": "batch_size",
    "--steps": "total_steps",
    "--critic-steps": "critic_steps_per_eg_step",
    "--lr-critic": "lr_critic",
    "--lr-eg": "lr_eg",
    "--ema-decay": "ema_decay",
    "--eval-every": "eval_every",
    "--seed": "seed",
    "--lambda-c": "consistency_weight",
    "--lambda": "score_lambda",
    "--resolution": "resolution",
    "--latent-dim": "latent_dim",
    "--backbone": "backbone_id",
    "--width": "width",
}

_CONFIG_DEFAULTS = TrainConfig()


def _add_train_flags(sp: argparse.ArgumentParser) -> None:
    for flag, key in _TRAIN_FLAGS.items():
        sp.add_argument(flag, type=type(getattr(_CONFIG_DEFAULTS, key)), default=None, dest=key)


def build_parser() -> _Parser:
    p = _Parser(prog="byteplotgan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("ingest", help="hash a file tree into a manifest")
    sp.add_argument("--root", required=True)
    sp.add_argument("--label", required=True, choices=[corpus.BENIGN, corpus.MALICIOUS])
    sp.add_argument("--family", default=None)
    sp.add_argument("--min-size", type=int, default=0, help="bytes, inclusive")
    sp.add_argument("--max-size", type=int, default=None, help="bytes, inclusive")
    sp.add_argument("--workers", type=int, default=4)
    sp.add_argument("--out", required=True, help="manifest path to write")

    sp = sub.add_parser("split", help="assign train/test/validation splits")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--ratios", default="0.6,0.2,0.2")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("encode", help="write archival byteplot PNGs for a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--layout", choices=sorted(_LAYOUTS), default="hilbert")
    sp.add_argument("--coloring", choices=sorted(_COLORINGS), default="rgb")
    sp.add_argument("--rowmajor-width", type=int, default=256)
    sp.add_argument("--compress-level", type=int, default=1)
    sp.add_argument("--workers", type=int, default=2)
    sp.add_argument("--out", default=None, help="updated manifest path (default: <out-dir>/manifest.jsonl)")

    sp = sub.add_parser("train", help="train the one-class model on a split manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--config", default=None, help="flat JSON config file")
    sp.add_argument("--layout", choices=sorted(_LAYOUTS), default="hilbert")
    sp.add_argument("--coloring", choices=sorted(_COLORINGS), default="rgb")
    sp.add_argument("--rowmajor-width", type=int, default=256)
    for flag, key in _TRAIN_FLAGS.items():
        kind = type(getattr(TrainConfig(), key))
        sp.add_argument(flag, type=kind, default=None, dest=key.replace("-", "_"))

    sp = sub.add_parser("score", help="score one input or a manifest split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", default=None, help="raw file (default) or PNG with --image")
    sp.add_argument("--image", action="store_true", help="input is a pre-encoded byteplot PNG")
    sp.add_argument("--manifest", default=None, help="batch mode: score a manifest split")
    sp.add_argument("--split", default="test")
    sp.add_argument("--out", default=None, help="batch mode: scores JSONL path (default stdout)")
    sp.add_argument("--lambda", dest="score_lambda", type=float, default=None)

    sp = sub.add_parser("eval", help="compute AUC / balanced accuracy from scores")
    sp.add_argument("--scores", required=True, help="JSONL of scored samples")

    sp = sub.add_parser("ablate", help="compare encodings on one corpus")
    sp.add_argument("--manifest", required=True, help="split manifest of the corpus")
    sp.add_argument(
        "--encodings",
        default="hilbert:rgb,hilbert:greyscale,rowmajor:greyscale",
        help="comma list of layout:coloring pairs",
    )
    sp.add_argument("--config", default=None, help="flat JSON config file")
    sp.add_argument("--rowmajor-width", type=int, default=256)
    sp.add_argument("--out-dir", required=True)
    for flag, key in _TRAIN_FLAGS.items():
        kind = type(getattr(TrainConfig(), key))
        sp.add_argument(flag, type=kind, default=None, dest=key.replace("-", "_"))

    sp = sub.add_parser("synth", help="generate the synthetic benign/anomalous corpus")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n-benign", type=int, default=400)
    sp.add_argument("--n-anomalous", type=int, default=400)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--min-kb", type=int, default=8)
    sp.add_argument("--max-kb", type=int, default=32)
    sp.add_argument("--out", default=None, help="manifest path (default: <out-dir>/manifest.jsonl)")
    return p


_TRAIN_FLAGS = {
    "--batch-size": "batch_size",
    "--steps": "total_steps",
    "--critic-steps": "critic_steps_per_eg_step",
    "--lr-critic": "lr_critic",
    "--lr-eg": "lr_eg",
    "--ema-decay": "ema_decay",
    "--eval-every": "eval_every",
    "--seed": "seed",
    "--lambda-c": "consistency_weight",
    "--lambda": "score_lambda",
    "--resolution": "resolution",
    "--latent-dim": "latent_dim",
    "--backbone": "backbone_id",
    "--width": "width",
}


def _resolve_train_config(args) -> TrainConfig:
    values = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            values.update(json.load(f))
    for key in _TRAIN_FLAGS.values():
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return TrainConfig.from_mapping(values)


def _cmd_ingest(args) -> int:
    entries = corpus.ingest_dir(
        args.root,
        args.label,
        min_size=args.min_size,
        max_size=args.max_size,
        family=args.family,
        workers=args.workers,
    )
    corpus.write_manifest(args.out, entries)
    log.info("ingested %d entries -> %s", len(entries), args.out)
    return 0


def _cmd_split(args) -> int:
    parts = [float(v) for v in args.ratios.split(",")]
    if len(parts) != 3:
        raise UsageError("--ratios needs three comma-separated fractions")
    entries = corpus.read_manifest(args.manifest)
    assignments = corpus.split_manifest(entries, tuple(parts), seed=args.seed)
    corpus.apply_split(entries, assignments)
    corpus.write_manifest(args.out, entries)
    log.info("split %d entries -> %s", len(entries), args.out)
    return 0


def _encode_one(entry, out_dir: Path, layout: str, coloring: str, args):
    img = pipeline.encode_file(
        entry.path, layout, coloring, rowmajor_width=args.rowmajor_width
    )
    name = imgcode.archival_name(entry.sha256, layout, coloring)
    final = out_dir / name
    tmp = out_dir / (name + ".tmp")
    imgcode.write_archival_png(img, str(tmp), compress_level=args.compress_level)
    os.replace(tmp, final)
    entry.extra.update(
        {
            "image": str(final),
            "payload_len": img.payload_len,
            "layout": layout,
            "coloring": coloring,
        }
    )
    if layout == imgcode.HILBERT:
        entry.extra["order"] = img.side.bit_length() - 1
    else:
        entry.extra["width"] = img.width


def _cmd_encode(args) -> int:
    layout = _LAYOUTS[args.layout]
    coloring = _COLORINGS[args.coloring]
    entries = corpus.read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        list(pool.map(lambda e: _encode_one(e, out_dir, layout, coloring, args), entries))
    out = args.out or str(out_dir / "manifest.jsonl")
    corpus.write_manifest(out, entries)
    log.info("encoded %d byteplots -> %s", len(entries), out_dir)
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_train_config(args)
    layout = _LAYOUTS[args.layout]
    coloring = _COLORINGS[args.coloring]
    entries = corpus.read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    resolved = dataclasses.asdict(cfg)
    resolved.update(
        {"layout": layout, "coloring": coloring, "rowmajor_width": args.rowmajor_width}
    )
    _log_resolved_config("train", resolved)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n"
    )

    train_inputs, test_inputs = pipeline.load_split_inputs(
        entries, layout, coloring, cfg.resolution, rowmajor_width=args.rowmajor_width
    )
    if not train_inputs:
        raise ValueError("manifest has no train entries; run `split` first")
    result = train(cfg, train_inputs, test_inputs)

    best, final = str(out_dir / "best.ckpt"), str(out_dir / "final.ckpt")
    from .cbigan.checkpoint import save_checkpoint  # noqa: PLC0415

    save_checkpoint(
        best,
        result.model,
        ema_shadow=result.best_shadow,
        step=result.best_step,
        train_config=resolved,
    )
    save_checkpoint(
        final,
        result.model,
        ema_shadow=result.ema.snapshot(),
        step=cfg.total_steps,
        train_config=resolved,
    )
    write_train_log(str(out_dir / "train_log.jsonl"), result.log)
    write_timings(str(out_dir / "timings.jsonl"), result.log)
    print(
        json.dumps(
            {
                "best_auc": result.best_auc,
                "best_balacc": result.best_balacc,
                "best_step": result.best_step,
                "best_checkpoint": best,
                "final_checkpoint": final,
            }
        )
    )
    return 0


def _input_from_image(path: Path, resolution: int):
    pixels, palette = __import__("byteplotgan.pngio", fromlist=["read_png"]).read_png(str(path))
    if palette is not None:
        pal = palette[:16]
        img = imgcode.ByteplotImage(
            data=pixels,
            layout=imgcode.HILBERT if pixels.shape[0] == pixels.shape[1] else imgcode.ROW_MAJOR,
            coloring=imgcode.PALETTE_RGB,
            payload_len=pixels.size,
            palette=imgcode.Palette(colors=pal),
        )
    else:
        img = imgcode.ByteplotImage(
            data=pixels,
            layout=imgcode.HILBERT if pixels.shape[0] == pixels.shape[1] else imgcode.ROW_MAJOR,
            coloring=imgcode.GREYSCALE,
            payload_len=pixels.size,
        )
    return imgcode.resize_normalize(img, resolution).values


def _cmd_score(args) -> int:
    import torch

    ckpt = load_checkpoint(args.checkpoint)
    model = ckpt.build_model(use_ema=True)
    tc = ckpt.train_config or {}
    lam = args.score_lambda if args.score_lambda is not None else tc.get("score_lambda", 0.5)
    score_cfg = ScoreConfig(score_lambda=lam)
    resolution = ckpt.model_config.resolution
    layout = tc.get("layout", imgcode.HILBERT)
    coloring = tc.get("coloring", imgcode.PALETTE_RGB)
    width = tc.get("rowmajor_width", 256)

    if args.manifest:
        entries = corpus.read_manifest(args.manifest)
        samples = pipeline.load_inputs(
            entries, args.split, layout, coloring, resolution, rowmajor_width=width
        )
        scored = score_split(model, samples, score_cfg, batch_size=tc.get("batch_size", 32))
        if args.out:
            evaluation.write_scores(args.out, scored)
            log.info("scored %d samples -> %s", len(scored), args.out)
        else:
            for s in scored:
                print(f"{s.sample_id}\t{s.score:.10g}")
        return 0

    if not args.input:
        raise UsageError("score needs --input or --manifest")
    path = Path(args.input)
    if args.image:
        values = _input_from_image(path, resolution)
    else:
        values = pipeline.encode_file_to_input(
            path, layout, coloring, resolution, rowmajor_width=width
        )
    x = torch.from_numpy(values).unsqueeze(0)
    score = float(anomaly_scores(model, x, score_cfg)[0])
    print(f"{_sha256_path(path)}\t{score:.10g}")
    return 0


def _cmd_eval(args) -> int:
    scored = evaluation.read_scores(args.scores)
    curve = evaluation.roc_curve(scored)
    threshold, balacc = evaluation.best_balanced_accuracy(scored)
    print(
        json.dumps(
            {
                "auc": evaluation.auc(curve),
                "best_balacc": balacc,
                "best_threshold": threshold,
                "n_samples": len(scored),
            }
        )
    )
    return 0


def _cmd_ablate(args) -> int:
    cfg = _resolve_train_config(args)
    entries = corpus.read_manifest(args.manifest)
    encodings = []
    for token in args.encodings.split(","):
        try:
            layout_name, coloring_name = token.strip().split(":")
            encodings.append((_LAYOUTS[layout_name], _COLORINGS[coloring_name]))
        except (ValueError, KeyError):
            raise UsageError(f"bad encoding {token!r}; expected layout:coloring")
    _log_resolved_config(
        "ablate", {**dataclasses.asdict(cfg), "encodings": args.encodings}
    )
    rows = evaluation.run_ablation(entries, encodings, cfg, rowmajor_width=args.rowmajor_width)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = evaluation.format_ablation_table(rows)
    (out_dir / "ablation.txt").write_text(table + "\n")
    with open(out_dir / "ablation.jsonl", "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r.to_record()) + "\n")
    print(table)
    if any(r.failed for r in rows):
        log.error("one or more ablation rows failed")
        return 2
    return 0


def _cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        n_benign=args.n_benign,
        n_anomalous=args.n_anomalous,
        seed=args.seed,
        min_kb=args.min_kb,
        max_kb=args.max_kb,
    )
    _log_resolved_config("synth", dataclasses.asdict(spec))
    entries = synth.generate_corpus(spec, args.out_dir)
    out = args.out or str(Path(args.out_dir) / "manifest.jsonl")
    corpus.write_manifest(out, entries)
    log.info("generated %d files -> %s", len(entries), args.out_dir)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "split": _cmd_split,
    "encode": _cmd_encode,
    "train": _cmd_train,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "synth": _cmd_synth,
}


def run(argv: list[str]) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
