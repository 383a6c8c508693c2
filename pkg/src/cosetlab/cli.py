"""Command-line interface.

Subcommands cover the full pipeline: `generate` datasets, `sense` with the
greedy baseline or a trained model, `classify` modulations, `train` a
model, `eval` a checkpoint, `ber-curve` the demodulation pipelines, and
`gradcheck` the differentiation machinery.  All outputs are tab-separated
tables with a one-line header, written to stdout or --out.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import torch

from .grid import SamplingGrid, mini_grid, wideband_grid
from .metrics import (
    eval_ber_classical,
    eval_ber_model,
    eval_full,
    eval_modulation,
    eval_sensing_model,
    eval_sensing_somp,
    render_table,
)

GRIDS = {"wideband": wideband_grid, "mini": mini_grid}


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_records(path):
    from .dataset import read_dataset

    return read_dataset(path)


def _load_model(path):
    from .checkpoint import load_model

    return load_model(path)


def cmd_generate(args) -> int:
    from .dataset import build_dataset

    grid = GRIDS[args.grid]()
    build_dataset(
        args.out,
        grid,
        count=args.count,
        seed=args.seed,
        snr_range=(args.snr[0], args.snr[1]),
        noise_power=args.noise_power,
        store_nyquist=args.store_nyquist,
    )
    print(f"wrote {args.count} frames to {args.out}")
    return 0


def cmd_sense(args) -> int:
    _, records, _ = _load_records(args.data)
    if args.method == "somp":
        report = eval_sensing_somp(records, n_channels=args.channels)
    else:
        if not args.checkpoint:
            print("sense --method model requires --checkpoint", file=sys.stderr)
            return 2
        model = _load_model(args.checkpoint)
        if args.channels and args.channels != model.config.n_channels:
            print("checkpoint channel count does not match --channels", file=sys.stderr)
            return 2
        report = eval_sensing_model(model, records)
    text = report.table() + f"# overall\t{report.overall:.6g}\n"
    if report.seconds_per_frame is not None:
        text += f"# ms_per_frame\t{1e3 * report.seconds_per_frame:.6g}\n"
    _emit(text, args.out)
    return 0


def cmd_classify(args) -> int:
    _, records, _ = _load_records(args.data)
    model = _load_model(args.checkpoint)
    report = eval_modulation(
        model,
        records,
        oracle_occupancy=args.oracle_occupancy,
        confusion_bin=args.confusion_snr,
    )
    text = report.table()
    text += report.confusion_table()
    text += f"# overall\t{report.overall:.6g}\n"
    _emit(text, args.out)
    return 0


def cmd_train(args) -> int:
    from .checkpoint import save_model
    from .losses import LossWeights
    from .network import SignalAnalyzer, default_config
    from .training import TrainConfig, TrainingDiverged, train

    grid, records, _ = _load_records(args.data)
    torch.manual_seed(args.seed)
    config = default_config(
        grid, n_encoders=args.encoders, d_model=args.d_model,
        n_heads=args.heads, d_ff=args.d_ff,
    )
    model = SignalAnalyzer(config)
    cfg = TrainConfig(
        steps=args.steps,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        weights=LossWeights(theta=args.theta),
        log_path=args.log,
    )
    scenes = [r.scene for r in records]
    cosets = [r.coset for r in records]
    try:
        history = train(model, scenes, cfg, cosets=cosets)
    except TrainingDiverged as err:
        print(f"aborted: {err}", file=sys.stderr)
        return 1
    save_model(args.out, model)
    if history.total:
        print(f"final losses: total={history.total[-1]:.4f}")
    print(f"saved checkpoint to {args.out}")
    return 0


def cmd_eval(args) -> int:
    _, records, _ = _load_records(args.data)
    model = _load_model(args.checkpoint)
    report = eval_full(model, records)
    text = report.summary()
    text += report.sensing.table()
    text += report.modulation.confusion_table()
    text += report.ber.table()
    _emit(text, args.out)
    return 0


def cmd_ber_curve(args) -> int:
    _, records, _ = _load_records(args.data)
    if args.pipeline in ("nyquist", "somp"):
        report = eval_ber_classical(records, args.pipeline, n_channels=args.channels)
    else:
        if not args.checkpoint:
            print("ber-curve --pipeline model requires --checkpoint", file=sys.stderr)
            return 2
        model = _load_model(args.checkpoint)
        report = eval_ber_model(model, records, oracle=args.oracle)
    _emit(report.table(), args.out)
    return 0


def cmd_gradcheck(args) -> int:
    from .training import finite_difference_check

    report = finite_difference_check(step=args.step)
    rows = [(name, err) for name, err in sorted(report.items(), key=lambda kv: -kv[1])]
    _emit(render_table(["parameter", "relative_error"], rows), args.out)
    worst = max(report.values())
    print(f"worst relative error: {worst:.3e} (tolerance {args.tol:g})")
    return 0 if worst < args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cosetlab",
        description="Sub-Nyquist multiband monitoring workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a dataset")
    p.add_argument("--grid", choices=GRIDS, default="wideband")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr", type=float, nargs=2, default=(-5.0, 10.0),
                   metavar=("LO", "HI"))
    p.add_argument("--noise-power", type=float, default=1.0)
    p.add_argument("--store-nyquist", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sense", help="spectrum sensing accuracy vs SNR")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("somp", "model"), default="somp")
    p.add_argument("--channels", type=int, choices=(4, 6, 8), default=None)
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("classify", help="modulation confusion and accuracy")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--oracle-occupancy", action="store_true")
    p.add_argument("--confusion-snr", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train", help="train the analyzer on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--encoders", type=int, choices=(4, 6, 8, 10), default=8)
    p.add_argument("--d-model", type=int, default=256)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--d-ff", type=int, default=1024)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--theta", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="full checkpoint evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ber-curve", help="demodulation BER per waveform")
    p.add_argument("--data", required=True)
    p.add_argument("--pipeline", choices=("nyquist", "somp", "model"), required=True)
    p.add_argument("--channels", type=int, choices=(4, 6, 8), default=None)
    p.add_argument("--oracle", choices=("none", "occupancy", "full"), default="full")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ber_curve)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return args.func(args)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
