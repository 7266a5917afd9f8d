"""Command-line entry point: train, eval, gradcheck, bench and gen."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bench import (
    BenchConfig,
    bench_matched,
    bench_throughput,
    compare_kernel_backends,
    report_csv,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config
from .errors import CheckpointError, ConfigError, NanLossError
from .gradcheck import finite_diff_report
from .memory import FrozenNoise
from .tasks import TaskSample, task_spec
from .tensor import Tensor
from .training import (
    TrainConfig,
    build_model,
    model_from_tensors,
    sample_accuracy,
    sequence_loss,
    train,
    validate,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIMS = 3
EXIT_CRC = 4


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")


def _load_train_config(args) -> TrainConfig:
    if args.config:
        config = load_config(args.config, args.set)
    else:
        config = load_config_from_overrides(args.set)
    if args.seed is not None:
        config.seed = args.seed
    return config


def load_config_from_overrides(overrides: list[str]) -> TrainConfig:
    import dataclasses

    from .config import _convert, _FIELDS

    values = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _convert(key, raw, 0)
    return TrainConfig(**values)


def cmd_train(args) -> int:
    try:
        config = _load_train_config(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    ckpt_path = os.path.join(args.out, "model.ckpt")

    def progress(row):
        print(
            f"iter {row['iter']}  train {row['train_loss']:.6f}  "
            f"val {row['val_loss']:.6f}  tau {row['tau']:.3f}"
        )

    try:
        result = train(config, csv_path=csv_path, progress=progress)
    except NanLossError as err:
        print(f"aborted: {err}", file=sys.stderr)
        return EXIT_FAIL
    save_checkpoint(ckpt_path, {k: t.data for k, t in result.model.named().items()})
    status = "solved" if result.solved else "finished"
    print(f"{status} after {result.iterations_run} iterations "
          f"({result.wall_time_s:.1f} s); wrote {csv_path} and {ckpt_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        tensors = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as err:
        print(f"bad checkpoint: {err}", file=sys.stderr)
        return EXIT_CRC
    model = model_from_tensors(tensors)
    try:
        spec = task_spec(args.task)
    except Exception as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if model.d_i != spec.d_i or model.d_o != spec.d_o:
        print(
            f"dimension mismatch: task {args.task} needs (d_i={spec.d_i}, "
            f"d_o={spec.d_o}), checkpoint holds (d_i={model.d_i}, "
            f"d_o={model.d_o})",
            file=sys.stderr,
        )
        return EXIT_DIMS
    loss = validate(model, spec, args.n, args.seed or 0)
    accuracy = sample_accuracy(model, spec, args.n, args.seed or 0)
    print(f"loss {loss:.6f}")
    print(f"accuracy {accuracy:.4f}")
    return EXIT_OK


def _gradcheck_sample(rng, d_i: int, steps: int) -> TaskSample:
    inputs = rng.uniform(-1.0, 1.0, size=(steps, d_i))
    targets = rng.integers(0, 2, size=(steps, 2)).astype(np.float64)
    mask = np.zeros((steps, 2))
    mask[steps // 2 :] = 1.0
    return TaskSample(inputs, targets, mask)


def cmd_gradcheck(args) -> int:
    if args.d_h > 16 or args.steps > 8:
        print("gradcheck caps dims at d_h <= 16 and steps <= 8", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    model = build_model(args.model, args.d_i, 2, args.d_h, args.d_r, args.n_mem, rng)
    sample = _gradcheck_sample(rng, args.d_i, args.steps)
    noise = FrozenNoise.capture(rng, (args.n_mem,), args.steps)

    def loss_fn(_params):
        noise._next = 0
        loss, _ = sequence_loss(model, sample, mode="soft", tau=0.7, noise=noise)
        return loss

    report = finite_diff_report(loss_fn, model.named(), eps=args.eps)
    failed = False
    for name, err in sorted(report.items()):
        verdict = "ok" if err < args.tolerance else "FAIL"
        if err >= args.tolerance:
            failed = True
        print(f"{name:8s} max_rel_err {err:.3e}  {verdict}")
    return EXIT_FAIL if failed else EXIT_OK


def _print_block(matrix: np.ndarray) -> None:
    for row in matrix:
        print(" ".join(repr(float(v)) for v in row))


def cmd_gen(args) -> int:
    try:
        spec = task_spec(args.task)
    except Exception as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    for _ in range(args.n):
        sample = spec.sample(rng)
        _print_block(sample.inputs)
        print()
        _print_block(sample.targets)
        print()
        _print_block(sample.mask)
        print()
    return EXIT_OK


def cmd_bench(args) -> int:
    base = BenchConfig(d_h=args.d_h, d_r=args.d_r, n_mem=args.n_mem,
                       chunk=args.chunk, batch=args.batch,
                       seed=args.seed if args.seed is not None else 0)
    if args.kernels:
        rates = compare_kernel_backends(base, warmup=args.warmup,
                                        duration=args.duration)
        print("backend,steps_per_s")
        for name, rate in sorted(rates.items()):
            print(f"{name},{rate:.1f}")
        return EXIT_OK
    try:
        if args.matched:
            configs = [
                BenchConfig(model="armin", mode="straight_through", d_h=args.d_h,
                            d_r=args.d_r, n_mem=args.n_mem, chunk=args.chunk,
                            batch=args.batch),
                BenchConfig(model="lstm", mode="straight_through",
                            d_h=args.lstm_d_h, chunk=args.chunk, batch=args.batch),
            ]
            rows = bench_matched(args.matched, configs, warmup=args.warmup,
                                 duration=args.duration)
        else:
            rows = []
            for mode in ("soft", "straight_through", "argmax"):
                rows.append(bench_throughput(
                    BenchConfig(model="armin", mode=mode, d_h=args.d_h,
                                d_r=args.d_r, n_mem=args.n_mem, chunk=args.chunk,
                                batch=args.batch),
                    warmup=args.warmup, duration=args.duration))
            rows.append(bench_throughput(
                BenchConfig(model="lstm", mode="straight_through", d_h=args.d_h,
                            chunk=args.chunk, batch=args.batch),
                warmup=args.warmup, duration=args.duration))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    text = report_csv(rows)
    print(text)
    if args.out and args.out != ".":
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "bench.csv")
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="armin")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    _common(p_train)
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a task")
    _common(p_eval)
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("task")
    p_eval.add_argument("-n", type=int, default=64, help="validation samples")
    p_eval.set_defaults(handler=cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _common(p_grad)
    p_grad.add_argument("--model", default="armin", choices=["armin", "lstm"])
    p_grad.add_argument("--d_i", type=int, default=3)
    p_grad.add_argument("--d_h", type=int, default=8)
    p_grad.add_argument("--d_r", type=int, default=4)
    p_grad.add_argument("--n_mem", type=int, default=5)
    p_grad.add_argument("--steps", type=int, default=6)
    p_grad.add_argument("--tolerance", type=float, default=1e-4)
    p_grad.add_argument("--eps", type=float, default=1e-4,
                        help="finite-difference step; 1e-4 keeps float64 "
                             "roundoff under the tolerance")
    p_grad.set_defaults(handler=cmd_gradcheck)

    p_gen = sub.add_parser("gen", help="print task samples as text blocks")
    _common(p_gen)
    p_gen.add_argument("task")
    p_gen.add_argument("n", type=int, nargs="?", default=1)
    p_gen.set_defaults(handler=cmd_gen)

    p_bench = sub.add_parser("bench", help="throughput micro-benchmarks")
    _common(p_bench)
    p_bench.add_argument("--d_h", type=int, default=64)
    p_bench.add_argument("--d_r", type=int, default=32)
    p_bench.add_argument("--n_mem", type=int, default=16)
    p_bench.add_argument("--chunk", type=int, default=50)
    p_bench.add_argument("--batch", type=int, default=1)
    p_bench.add_argument("--warmup", type=float, default=0.2)
    p_bench.add_argument("--duration", type=float, default=1.0)
    p_bench.add_argument("--matched", type=int, default=0,
                         help="parameter budget for a matched comparison")
    p_bench.add_argument("--lstm_d_h", type=int, default=128,
                         help="LSTM width for the matched comparison")
    p_bench.add_argument("--kernels", action="store_true",
                         help="compare python and compiled kernel backends")
    p_bench.set_defaults(handler=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
