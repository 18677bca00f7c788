"""Closed-loop testing: render, predict, actuate, repeat.

The loop mirrors the deployment path: each step renders the camera frame,
runs the network, converts the argmax class to actuation lines and steps
the car. A DriveReport quantifies lap progress, lane keeping and per-frame
prediction latency. The trajectory is deterministic given identical
inputs; only the latency fields depend on the wall clock.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn, steer
from .errors import ContractError
from .sim import (CameraSpec, DEFAULT_DT, DEFAULT_GAINS, CarState, ExpertGains,
                  Track, car_step, expert_policy, make_default_track,
                  render_camera, start_state, track_frame)


@dataclass(frozen=True)
class LineState:
    """Levels of the four actuation lines (the remote's soldered pins)."""

    forward: bool
    reverse: bool
    left: bool
    right: bool

    def __post_init__(self):
        if self.reverse:
            raise ContractError("reverse line is never asserted")
        if self.left and self.right:
            raise ContractError("left and right lines cannot both be asserted")


def class_to_lines(command: int) -> LineState:
    """Map a steering class to line levels; forward is always asserted."""
    steer.validate(command)
    return LineState(forward=True, reverse=False,
                     left=command == steer.LEFT, right=command == steer.RIGHT)


@dataclass
class DriveReport:
    steps: int
    laps_completed: float
    max_abs_offset: float
    off_track_steps: int
    latency_mean: float  # milliseconds
    latency_p99: float   # milliseconds
    interventions: int


@dataclass
class Rollout:
    """Per-step trace of a closed-loop run (parallel lists)."""

    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    headings: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    offsets: list = field(default_factory=list)
    arc_progress: list = field(default_factory=list)  # cumulative meters

    def __len__(self):
        return len(self.xs)


def _latency_stats(samples_ms):
    if not samples_ms:
        return 0.0, 0.0
    arr = np.asarray(samples_ms, dtype=np.float64)
    mean = float(arr.mean())
    p99 = float(np.percentile(arr, 99.0, method="higher"))
    return mean, p99


def _run_loop(policy, track: Track, camera: CameraSpec, steps: int, dt: float,
              start: CarState, expert_fallback: bool, gains: ExpertGains):
    """Drive `policy` (frame -> command) closed-loop for `steps` steps."""
    state = start
    rollout = Rollout()
    latencies = []
    interventions = 0
    off_track = 0
    max_abs_offset = 0.0
    progress = 0.0
    half = track.total_length / 2.0
    _, _, prev_arc = track_frame(track, (state.x, state.y))

    for step in range(steps):
        frame = render_camera(track, state, camera)
        t0 = time.perf_counter()
        command = policy(frame)
        latencies.append((time.perf_counter() - t0) * 1000.0)

        error, _, _ = track_frame(track, (state.x, state.y))
        if abs(error) > track.width / 2.0:
            off_track += 1
            if expert_fallback:
                command = expert_policy(track, state, gains)
                interventions += 1
        max_abs_offset = max(max_abs_offset, abs(error))

        rollout.xs.append(state.x)
        rollout.ys.append(state.y)
        rollout.headings.append(state.heading)
        rollout.commands.append(command)
        rollout.offsets.append(error)

        state = car_step(state, command, dt)
        _, _, arc = track_frame(track, (state.x, state.y))
        delta = arc - prev_arc
        if delta > half:
            delta -= track.total_length
        elif delta <= -half:
            delta += track.total_length
        progress += delta
        prev_arc = arc
        rollout.arc_progress.append(progress)

    mean, p99 = _latency_stats(latencies)
    report = DriveReport(
        steps=steps,
        laps_completed=progress / track.total_length,
        max_abs_offset=max_abs_offset,
        off_track_steps=off_track,
        latency_mean=mean,
        latency_p99=p99,
        interventions=interventions,
    )
    return report, rollout


def run_closed_loop(params: nn.NetworkParams, track: Track, camera: CameraSpec,
                    steps: int, dt: float = DEFAULT_DT, start: CarState | None = None,
                    expert_fallback: bool = False, gains: ExpertGains = DEFAULT_GAINS):
    """Let the trained network drive; see DriveReport for the metrics.

    With expert_fallback on, any step taken beyond half the track width is
    steered by the expert instead and counted as an intervention. Aborts
    with a diagnostic if the network ever emits a non-finite output.
    """
    if steps < 0:
        raise ContractError(f"steps must be >= 0, got {steps}")
    state = start if start is not None else start_state(track)

    def policy(frame):
        probs, _ = nn.forward(params, frame)
        if not np.all(np.isfinite(probs)):
            raise RuntimeError(f"model produced non-finite output {probs.tolist()}")
        return steer.from_index(int(np.argmax(probs)))

    return _run_loop(policy, track, camera, steps, dt, state, expert_fallback, gains)


def write_trajectory(rollout: Rollout, path) -> None:
    """CSV dump: step,x,y,heading,cmd,offset."""
    lines = ["step,x,y,heading,cmd,offset"]
    for i in range(len(rollout)):
        lines.append(f"{i},{rollout.xs[i]!r},{rollout.ys[i]!r},"
                     f"{rollout.headings[i]!r},{rollout.commands[i]},{rollout.offsets[i]!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_drive_report(report: DriveReport) -> str:
    """Key,value lines for terminals and report files."""
    pairs = [
        ("steps", report.steps),
        ("laps_completed", f"{report.laps_completed:.4f}"),
        ("max_abs_offset", f"{report.max_abs_offset:.4f}"),
        ("off_track_steps", report.off_track_steps),
        ("latency_mean", f"{report.latency_mean:.3f}"),
        ("latency_p99", f"{report.latency_p99:.3f}"),
        ("interventions", report.interventions),
    ]
    return "\n".join(f"{key},{value}" for key, value in pairs)


def measure_latency(params: nn.NetworkParams, camera: CameraSpec, trials: int = 100):
    """Time `trials` forward passes on one fixed rendered frame.

    Returns (mean_ms, p99_ms); p99 uses the nearest-rank-above percentile,
    which for trials <= 100 is the maximum sample.
    """
    if trials < 10:
        raise ContractError(f"need at least 10 trials, got {trials}")
    track = make_default_track()
    frame = render_camera(track, start_state(track), camera)
    samples = []
    for _ in range(trials):
        t0 = time.perf_counter()
        nn.forward(params, frame)
        samples.append((time.perf_counter() - t0) * 1000.0)
    return _latency_stats(samples)
