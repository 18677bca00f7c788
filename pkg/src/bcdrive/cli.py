"""Command-line entry point: collect, train, eval, drive, serve.

Flag defaults encode the reference hyperparameters (20 epochs, batch 8,
80/20 split), so `collect -> train -> drive` with no extra flags runs the
whole pipeline. Every subcommand echoes its resolved configuration as
key=value lines before doing anything.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .data import MANIFEST_NAME, SplitSpec, read_manifest
from .drive import format_drive_report, measure_latency, run_closed_loop, write_trajectory
from .errors import ContractError
from .sim import (CameraSpec, DEFAULT_DT, DEFAULT_SPEED, load_track,
                  make_default_track, make_random_track, start_state)
from .train import (TrainConfig, collect_expert_run, evaluate, train,
                    write_train_report)


def _parse_track(spec: str):
    if spec == "default":
        return make_default_track()
    if spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise ContractError(f"bad track seed in {spec!r}") from None
        return make_random_track(seed)
    if spec.startswith("file:"):
        return load_track(spec.split(":", 1)[1])
    raise ContractError(
        f"track must be 'default', 'random:<seed>' or 'file:<path>', got {spec!r}")


def _parse_bind(bind: str):
    host, sep, port = bind.rpartition(":")
    if not sep:
        raise ContractError(f"bind address must be host:port, got {bind!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ContractError(f"bad port in bind address {bind!r}") from None


def _echo_config(args: argparse.Namespace, keys):
    for key in keys:
        print(f"{key.replace('_', '-')}={getattr(args, key)}")


def _manifest_for(data_dir: str):
    path = Path(data_dir) / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {data_dir}")
    return read_manifest(path)


def _arch_for(resolution: int) -> nn.ArchitectureConfig:
    return nn.ArchitectureConfig(input_height=resolution, input_width=resolution)


def cmd_collect(args) -> int:
    _echo_config(args, ("mode", "track", "steps", "out", "res", "dt", "speed",
                        "start_arc", "start_offset"))
    track = _parse_track(args.track)
    camera = CameraSpec(resolution=args.res)
    start = start_state(track, arc=args.start_arc, lateral_offset=args.start_offset,
                        speed=args.speed)
    manifest = collect_expert_run(track, args.steps, args.out, camera=camera,
                                  dt=args.dt, start=start)
    counts = manifest.class_counts()
    print(f"samples={len(manifest)}")
    for label in (-1, 0, 1):
        print(f"count[{label}]={counts[label]}")
    return 0


def cmd_train(args) -> int:
    _echo_config(args, ("data", "epochs", "batch", "seed", "out", "res", "lr",
                        "train_frac", "augment", "loss"))
    manifest = _manifest_for(args.data)
    arch = _arch_for(args.res)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        adam=nn.AdamConfig(learning_rate=args.lr),
        split=SplitSpec(train_fraction=args.train_frac, shuffle_seed=args.seed),
        augment=args.augment,
        loss=args.loss,
    )
    params, report = train(manifest, arch, cfg, args.seed)
    save_checkpoint(params, args.out)
    report_path = Path(args.out).with_suffix(".report.txt")
    write_train_report(report, report_path)
    print(f"checkpoint={args.out}")
    print(f"report={report_path}")
    print(f"train_acc={report.train_accuracy:.4f}")
    print(f"test_acc={report.test_accuracy:.4f}")
    return 0


def cmd_eval(args) -> int:
    _echo_config(args, ("model", "data", "split_test", "seed", "train_frac"))
    params = load_checkpoint(args.model)
    manifest = _manifest_for(args.data)
    if args.split_test:
        from .data import split
        _, manifest = split(manifest, SplitSpec(train_fraction=args.train_frac,
                                                shuffle_seed=args.seed))
    result = evaluate(params, manifest)
    print(f"samples={result.total}")
    print(f"accuracy={result.accuracy:.4f}")
    print("confusion rows=true(-1,0,1) cols=predicted(-1,0,1)")
    for row in result.confusion:
        print(",".join(str(int(v)) for v in row))
    return 0


def cmd_drive(args) -> int:
    _echo_config(args, ("model", "track", "steps", "dt", "speed", "start_arc",
                        "start_offset", "fallback", "traj_out"))
    params = load_checkpoint(args.model)
    track = _parse_track(args.track)
    camera = CameraSpec(resolution=params.config.input_height)
    if params.config.input_height != params.config.input_width:
        raise ContractError("closed-loop driving needs a square network input")
    start = start_state(track, arc=args.start_arc, lateral_offset=args.start_offset,
                        speed=args.speed)
    report, rollout = run_closed_loop(params, track, camera, args.steps, dt=args.dt,
                                      start=start, expert_fallback=args.fallback)
    write_trajectory(rollout, args.traj_out)
    print(format_drive_report(report))
    print(f"trajectory={args.traj_out}")
    return 0


def cmd_latency(args) -> int:
    _echo_config(args, ("model", "trials"))
    params = load_checkpoint(args.model)
    camera = CameraSpec(resolution=params.config.input_height)
    mean, p99 = measure_latency(params, camera, trials=args.trials)
    print(f"latency_mean={mean:.3f}")
    print(f"latency_p99={p99:.3f}")
    return 0


def cmd_serve(args) -> int:
    _echo_config(args, ("bind", "mode", "track", "out", "model", "tick_hz", "res"))
    from .gateway import GatewayConfig, serve

    host, port = _parse_bind(args.bind)
    model = load_checkpoint(args.model) if args.model else None
    mode = args.mode.upper()
    if mode == "AUTONOMOUS" and model is None:
        raise ContractError("--mode autonomous requires --model")
    cfg = GatewayConfig(
        track=_parse_track(args.track),
        camera=CameraSpec(resolution=args.res),
        mode=mode,
        out_dir=Path(args.out) if args.out else None,
        model=model,
        tick_hz=args.tick_hz,
    )
    serve(cfg, host, port, ui_dir=args.ui if args.ui else None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcdrive",
        description="Behavioral-cloning driving sandbox: record demonstrations, "
                    "train the steering network, test it closed-loop.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="record a scripted-expert demonstration run")
    p.add_argument("--mode", choices=["expert"], default="expert")
    p.add_argument("--track", default="default", help="default | random:<seed> | file:<path>")
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--out", required=True, help="output directory for the run")
    p.add_argument("--res", type=int, default=64, help="camera resolution")
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--speed", type=float, default=DEFAULT_SPEED)
    p.add_argument("--start-arc", type=float, default=6.0,
                   help="start position along the centerline, meters")
    p.add_argument("--start-offset", type=float, default=0.0,
                   help="lateral start offset, meters (+ = left)")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train the network on a recorded run")
    p.add_argument("--data", required=True, help="directory containing drive_log.csv")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.bcw")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--augment", action="store_true",
                   help="add mirrored copies of the training half")
    p.add_argument("--loss", choices=["mse", "cross_entropy"], default="mse")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy + confusion matrix on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split-test", action="store_true",
                   help="evaluate only the held-out 20%% under --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("drive", help="closed-loop run of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--track", default="default")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--speed", type=float, default=DEFAULT_SPEED)
    p.add_argument("--start-arc", type=float, default=0.0)
    p.add_argument("--start-offset", type=float, default=0.0)
    p.add_argument("--fallback", action="store_true",
                   help="let the expert intervene when off the lane")
    p.add_argument("--traj-out", default="trajectory.csv")
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("latency", help="per-frame prediction latency of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("serve", help="run the browser teleoperation gateway")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--mode", choices=["manual", "expert", "autonomous"], default="manual")
    p.add_argument("--track", default="default")
    p.add_argument("--out", default=None, help="recording directory (enables REC)")
    p.add_argument("--model", default=None)
    p.add_argument("--tick-hz", type=float, default=20.0)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--ui", default=None, help="static directory with the browser client")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
