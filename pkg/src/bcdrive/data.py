"""Demonstration dataset persistence: CSV manifests and PGM frames.

The on-disk layout of a recorded run is

    <out_dir>/drive_log.csv      header "IMG,steer", rows "path,label"
    <out_dir>/dataset/1.pgm      frames, 1-based, binary PGM (P5, maxval 255)
    <out_dir>/dataset/2.pgm
    ...

Manifests round-trip exactly; frames round-trip up to 1/255 quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from . import steer
from .errors import ContractError, FormatError, ParseError

MANIFEST_NAME = "drive_log.csv"
MANIFEST_HEADER = "IMG,steer"
IMAGE_DIR = "dataset"


@dataclass(frozen=True)
class Sample:
    """One manifest row: a forward-slash relative image path and its label."""

    image_path: str
    label: int

    def __post_init__(self):
        steer.validate(self.label)
        path = self.image_path
        if not path:
            raise ContractError("sample image path is empty")
        if "\\" in path or "," in path or "\r" in path or "\n" in path:
            raise ContractError(f"sample image path contains forbidden characters: {path!r}")
        pure = PurePosixPath(path)
        if pure.is_absolute() or ".." in pure.parts:
            raise ContractError(f"sample image path must be relative without '..': {path!r}")


@dataclass
class Manifest:
    samples: list = field(default_factory=list)
    base_dir: Path = Path(".")

    def __len__(self):
        return len(self.samples)

    def resolve(self, sample: Sample) -> Path:
        return Path(self.base_dir) / sample.image_path

    def class_counts(self) -> dict:
        counts = {label: 0 for label in steer.CLASSES}
        for sample in self.samples:
            counts[sample.label] += 1
        return counts


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}")


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    lines = [MANIFEST_HEADER]
    for sample in manifest.samples:
        lines.append(f"{sample.image_path},{sample.label}")
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_manifest(path, verify_files: bool = False) -> Manifest:
    """Parse a manifest; base_dir becomes the CSV's directory.

    With verify_files=True every referenced image must exist on disk.
    """
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MANIFEST_HEADER:
        found = lines[0] if lines else ""
        raise ParseError(f"expected header {MANIFEST_HEADER!r}, got {found!r}",
                         path=path, line=1)

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if "\r" in line:
            raise ParseError("carriage return in row", path=path, line=lineno)
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"malformed row {line!r}", path=path, line=lineno)
        image_path, label_text = parts
        if label_text not in ("-1", "0", "1"):
            raise ParseError(f"steer label must be -1, 0 or 1, got {label_text!r}",
                             path=path, line=lineno)
        try:
            samples.append(Sample(image_path=image_path, label=int(label_text)))
        except ContractError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None

    manifest = Manifest(samples=samples, base_dir=path.parent)
    if verify_files:
        for sample in samples:
            target = manifest.resolve(sample)
            if not target.is_file():
                raise FileNotFoundError(f"manifest references missing image: {target}")
    return manifest


def encode_pgm(frame: np.ndarray) -> bytes:
    """Binary PGM (P5, maxval 255) from a [0, 1] float frame."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ContractError(f"frame must be 2-D, got shape {frame.shape}")
    if frame.size == 0:
        raise ContractError("frame is empty")
    lo, hi = frame.min(), frame.max()
    if not np.isfinite(lo) or not np.isfinite(hi) or lo < 0.0 or hi > 1.0:
        raise ContractError(f"frame values must be in [0, 1], got range [{lo}, {hi}]")
    h, w = frame.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    payload = np.rint(frame * 255.0).astype(np.uint8).tobytes()
    return header + payload


def decode_pgm(blob: bytes, name: str = "<bytes>") -> np.ndarray:
    """Parse a binary PGM into a [0, 1] float frame."""
    if blob[:2] != b"P5":
        raise FormatError(f"{name}: not a binary PGM (magic {blob[:2]!r})")
    # Header tokens: magic, width, height, maxval; '#' comments allowed.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{name}: truncated PGM header")
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{name}: non-numeric PGM header fields {tokens}") from None
    if maxval != 255:
        raise FormatError(f"{name}: unsupported PGM maxval {maxval} (need 255)")
    if w <= 0 or h <= 0:
        raise FormatError(f"{name}: bad PGM dimensions {w}x{h}")
    expected = w * h
    payload = blob[pos:]
    if len(payload) < expected:
        raise FormatError(
            f"{name}: truncated PGM payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise FormatError(
            f"{name}: {len(payload) - expected} trailing bytes after PGM payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return pixels.astype(np.float64) / 255.0


def write_frame(frame: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_pgm(frame))


def read_frame(path) -> np.ndarray:
    path = Path(path)
    return decode_pgm(path.read_bytes(), name=str(path))


def split(manifest: Manifest, spec: SplitSpec):
    """Seeded shuffle, then the first floor(n*train_fraction) samples go to
    train and the rest to test."""
    n = len(manifest.samples)
    if n < 2:
        raise ContractError(f"need at least 2 samples to split, got {n}")
    order = np.random.default_rng(spec.shuffle_seed).permutation(n)
    cut = math.floor(n * spec.train_fraction)
    train = Manifest(samples=[manifest.samples[i] for i in order[:cut]],
                     base_dir=manifest.base_dir)
    test = Manifest(samples=[manifest.samples[i] for i in order[cut:]],
                    base_dir=manifest.base_dir)
    return train, test


def augment_flip(frame: np.ndarray, label: int):
    """Mirror columns and negate the label (an involution)."""
    steer.validate(label)
    return np.ascontiguousarray(np.asarray(frame)[:, ::-1]), -label


class DatasetRecorder:
    """Single-writer stream of (frame, label) pairs into a run directory.

    Frames land in dataset/<n>.pgm with 1-based numbering; each manifest
    row is flushed as soon as its frame is on disk, so an interrupted
    recording never leaves a torn tail. append=True continues numbering
    after an existing drive_log.csv instead of refusing to overwrite it.
    """

    def __init__(self, out_dir, append: bool = False):
        self.out_dir = Path(out_dir)
        self.manifest_path = self.out_dir / MANIFEST_NAME
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / IMAGE_DIR).mkdir(exist_ok=True)

        if append:
            existing = read_manifest(self.manifest_path)
            self._samples = list(existing.samples)
            self._file = open(self.manifest_path, "ab")
        else:
            if self.manifest_path.exists():
                raise FileExistsError(
                    f"refusing to overwrite existing recording: {self.manifest_path}")
            self._samples = []
            self._file = open(self.manifest_path, "wb")
            self._file.write((MANIFEST_HEADER + "\n").encode("utf-8"))
            self._file.flush()

    def add(self, frame: np.ndarray, label: int) -> Sample:
        steer.validate(label)
        name = f"{IMAGE_DIR}/{len(self._samples) + 1}.pgm"
        write_frame(frame, self.out_dir / name)
        sample = Sample(image_path=name, label=label)
        self._file.write(f"{name},{label}\n".encode("utf-8"))
        self._file.flush()
        self._samples.append(sample)
        return sample

    @property
    def manifest(self) -> Manifest:
        return Manifest(samples=list(self._samples), base_dir=self.out_dir)

    def class_counts(self) -> dict:
        return self.manifest.class_counts()

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def record_run(stream, out_dir) -> Manifest:
    """Write a (frame, label) stream as a fresh run directory."""
    with DatasetRecorder(out_dir) as recorder:
        for frame, label in stream:
            recorder.add(frame, label)
        return recorder.manifest


def load_images(manifest: Manifest) -> np.ndarray:
    """Stack every referenced frame into an (n, H, W) array."""
    if not manifest.samples:
        raise ContractError("manifest has no samples")
    frames = [read_frame(manifest.resolve(sample)) for sample in manifest.samples]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise ContractError(f"manifest mixes frame shapes: {sorted(shapes)}")
    return np.stack(frames)
