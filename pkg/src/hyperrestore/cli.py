"""Operator-facing command line.

Flags take raw task units (noise sigma, JPEG quality, SR scale); conversion
to the conditioning scalar happens internally. Exit codes: 0 success,
1 runtime failure, 2 usage error (including missing input files).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .datasets import load_corpus, load_image, save_image
from .degrade import apply_degradation, stable_seed
from .estimator import EstimatorNet, estimate_level
from .metrics import QualityReport, psnr, ssim
from .network import ArchConfig, parameter_breakdown, restore_image
from .tensor import ContractViolation


class UsageError(Exception):
    """Bad flag combination or unusable input; maps to exit code 2."""


def _load_ckpt(path_str: str):
    path = Path(path_str)
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    return ckpt.load(path)


def _load_input_image(path_str: str) -> np.ndarray:
    path = Path(path_str)
    if not path.is_file():
        raise UsageError(f"input image not found: {path}")
    return load_image(path)


# -- subcommand implementations ---------------------------------------------


def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        raise UsageError(f"config file not found: {cfg_path}")
    raw = json.loads(cfg_path.read_text())

    from .datasets import PatchSource
    from .trainer import TrainConfig, train

    arch = ArchConfig(channels=raw.pop("channels", 8),
                      num_resblocks=raw.pop("num_resblocks", 4))
    estimator_steps = raw.pop("estimator_steps", 600)
    config = TrainConfig(**raw)
    records = load_corpus(args.corpus)
    source = PatchSource(records, config.patch_size, seed=config.seed + 1)

    log_fh = open(args.log, "w") if args.log else None

    def emit(record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        print(line, file=log_fh or sys.stdout)

    try:
        state = train(config, source, arch, progress=emit)
        estimator_tensors = None
        if args.with_estimator:
            from .estimator import INPUT_SIZE, train_estimator
            est_source = PatchSource(records, INPUT_SIZE, seed=config.seed + 2)
            net = train_estimator(config.levels, est_source, task=config.task,
                                  steps=estimator_steps, seed=config.seed)
            estimator_tensors = net.tensor_table()
        ckpt.save(state.model, args.output, estimator_tensors=estimator_tensors,
                  seed=config.seed)
    finally:
        if log_fh:
            log_fh.close()
    print(f"saved checkpoint to {args.output}")
    return 0


def cmd_restore(args) -> int:
    model, est_table = _load_ckpt(args.checkpoint)
    image = _load_input_image(args.input)
    if args.level is None and not args.blind:
        raise UsageError("restore needs --level or --blind")
    if args.blind:
        if est_table is None:
            raise UsageError(
                f"--blind requested but {args.checkpoint} has no estimator")
        net = EstimatorNet.from_tensor_table(est_table)
        level = estimate_level(net, image)
        print(f"estimated level: {level:.3f}")
    else:
        level = args.level
    restored = restore_image(model, image, level=level)
    save_image(restored, Path(args.output))
    if args.reference:
        reference = _load_input_image(args.reference)
        print(f"PSNR vs reference: {psnr(reference, restored):.4f} dB "
              f"(input was {psnr(reference, image):.4f} dB)")
    print(f"wrote {args.output}")
    return 0


def _parse_levels(text: str):
    try:
        levels = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --levels list {text!r}: {exc}")
    if not levels:
        raise UsageError("empty --levels list")
    return levels


def cmd_benchmark(args) -> int:
    model, _ = _load_ckpt(args.checkpoint)
    records = load_corpus(args.corpus)
    levels = _parse_levels(args.levels)

    level_reports = {}
    lines = []
    for level in levels:
        report = QualityReport()
        for rec in records:
            seed = stable_seed("bench", args.seed, rec.id, level)
            degraded = apply_degradation(rec.pixels, args.task, level, seed=seed)
            restored = degraded if args.bypass else restore_image(model, degraded, level=level)
            report.add(rec.id, psnr(rec.pixels, restored), ssim(rec.pixels, restored))
        level_reports[level] = report
        for image_id, p, s in report.per_image:
            lines.append(json.dumps({"type": "image", "level": level, "id": image_id,
                                     "psnr_db": round(p, 6), "ssim": round(s, 8)},
                                    sort_keys=True))
        lines.append(json.dumps({"type": "level", "level": level,
                                 "psnr_db": round(report.psnr_db, 6),
                                 "ssim": round(report.ssim, 8)}, sort_keys=True))
    mean_psnr = float(np.mean([r.psnr_db for r in level_reports.values()]))
    mean_ssim = float(np.mean([r.ssim for r in level_reports.values()]))
    lines.append(json.dumps({"type": "mean", "psnr_db": round(mean_psnr, 6),
                             "ssim": round(mean_ssim, 8)}, sort_keys=True))
    Path(args.report).write_text("\n".join(lines) + "\n")

    header = ["level"] + [f"{lv:g}" for lv in levels] + ["Mean"]
    psnr_row = ["PSNR"] + [f"{level_reports[lv].psnr_db:.2f}" for lv in levels] \
        + [f"{mean_psnr:.2f}"]
    ssim_row = ["SSIM"] + [f"{level_reports[lv].ssim:.4f}" for lv in levels] \
        + [f"{mean_ssim:.4f}"]
    for row in (header, psnr_row, ssim_row):
        print("  ".join(f"{cell:>8}" for cell in row))
    print(f"wrote {args.report}")
    return 0


def _parse_grid(text: str):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}, expected min:max:step: {exc}")
    if step <= 0 or hi < lo:
        raise UsageError(f"empty or invalid grid {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


def cmd_sweep(args) -> int:
    model, _ = _load_ckpt(args.checkpoint)
    image = _load_input_image(args.input)
    reference = _load_input_image(args.reference)
    grid = _parse_grid(args.grid)

    rows = []
    for c in grid:
        restored = restore_image(model, image, c=c)
        rows.append((c, psnr(reference, restored)))
    best_c, best_psnr = max(rows, key=lambda r: r[1])
    print(f"{'c':>8}  {'PSNR_dB':>10}")
    for c, p in rows:
        marker = "  <- best" if c == best_c else ""
        print(f"{c:8.4f}  {p:10.4f}{marker}")
    print(f"best c = {best_c:.4f} ({best_psnr:.4f} dB)")
    if args.report:
        payload = {"grid": [{"c": c, "psnr_db": p} for c, p in rows],
                   "best": {"c": best_c, "psnr_db": best_psnr}}
        Path(args.report).write_text(json.dumps(payload, sort_keys=True) + "\n")
    return 0


def cmd_estimate(args) -> int:
    _, est_table = _load_ckpt(args.checkpoint)
    if est_table is None:
        raise UsageError(f"checkpoint {args.checkpoint} has no estimator")
    net = EstimatorNet.from_tensor_table(est_table)
    image = _load_input_image(args.input)
    print(f"{estimate_level(net, image):.4f}")
    return 0


def cmd_degrade(args) -> int:
    image = _load_input_image(args.input)
    degraded = apply_degradation(image, args.task, args.level, seed=args.seed)
    save_image(degraded, Path(args.output))
    print(f"wrote {args.output}")
    return 0


def cmd_params(args) -> int:
    if args.checkpoint:
        header = ckpt.read_header(Path(args.checkpoint))
        cfg = ArchConfig(**header.arch)
    elif args.channels and args.resblocks:
        cfg = ArchConfig(channels=args.channels, num_resblocks=args.resblocks)
    else:
        raise UsageError("params needs --checkpoint or both --channels and --resblocks")
    total, breakdown = parameter_breakdown(cfg)
    print(f"channels={cfg.channels} resblocks={cfg.num_resblocks}")
    for name, count in breakdown.items():
        print(f"  {name:>14}: {count}")
    print(f"  {'total':>14}: {total}")
    print("kernel-generator parameters are constant in the number of served "
          "levels (2x the residual-block kernels of one network); a bank of "
          "k dedicated networks grows that share k-fold.")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    app = create_app(checkpoint_path=args.checkpoint, static_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# -- argument wiring ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperrestore",
        description="Adaptive image restoration with a level-conditioned kernel generator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on an image corpus")
    p.add_argument("--config", required=True, help="JSON training config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--with-estimator", action="store_true",
                   help="also fit the blind level estimator")
    p.add_argument("--log", help="write progress records to this file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("restore", help="restore one degraded image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--level", type=float)
    p.add_argument("--blind", action="store_true")
    p.add_argument("--reference", help="print PSNR against this clean image")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("benchmark", help="PSNR/SSIM over a corpus and level list")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", required=True, choices=("noise", "jpeg", "sr"))
    p.add_argument("--levels", required=True, help="comma-separated raw levels")
    p.add_argument("--report", required=True)
    p.add_argument("--bypass", action="store_true",
                   help="skip restoration (identity baseline)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="PSNR curve over a conditioning-scalar grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--grid", required=True, help="min:max:step in c units")
    p.add_argument("--report", help="also write the curve as JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="blind-estimate the degradation level")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("degrade", help="apply a degradation operator")
    p.add_argument("--task", required=True, choices=("noise", "jpeg", "sr"))
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("params", help="parameter counts and breakdown")
    p.add_argument("--checkpoint")
    p.add_argument("--channels", type=int)
    p.add_argument("--resblocks", type=int)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("serve", help="run the interactive tuning service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--ui-dir", help="static UI bundle directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
