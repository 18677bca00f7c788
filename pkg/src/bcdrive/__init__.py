"""Behavioral-cloning driving sandbox.

A deterministic 2-D driving simulator, a from-scratch convolutional
steering classifier trained with hand-written backpropagation and Adam,
dataset recording in a CSV-manifest + PGM format, closed-loop autonomous
driving with lap metrics, and a websocket gateway for browser
teleoperation.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (Manifest, Sample, SplitSpec, augment_flip, read_frame,
                   read_manifest, record_run, split, write_frame, write_manifest)
from .drive import (DriveReport, LineState, class_to_lines, measure_latency,
                    run_closed_loop)
from .nn import (AdamConfig, ArchitectureConfig, NetworkParams, adam_step,
                 backward, forward, init_params, mse_loss)
from .sim import (CameraSpec, CarState, ExpertGains, Track, car_step,
                  expert_policy, make_default_track, make_random_track,
                  render_camera, start_state, track_frame)
from .train import TrainConfig, TrainReport, dagger_round, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AdamConfig", "ArchitectureConfig", "CameraSpec", "CarState",
    "DriveReport", "ExpertGains", "LineState", "Manifest", "NetworkParams",
    "Sample", "SplitSpec", "Track", "TrainConfig", "TrainReport",
    "adam_step", "augment_flip", "backward", "car_step", "class_to_lines",
    "dagger_round", "evaluate", "expert_policy", "forward", "init_params",
    "load_checkpoint", "make_default_track", "make_random_track",
    "measure_latency", "mse_loss", "read_frame", "read_manifest",
    "record_run", "render_camera", "run_closed_loop", "save_checkpoint",
    "split", "start_state", "track_frame", "train", "write_frame",
    "write_manifest",
]
