"""Dataset types and on-disk formats: PGM frames, JSON manifests, checkpoints.

A dataset on disk is a directory holding ``manifest.json`` plus one 8-bit
binary PGM file per frame.  The manifest describes studies, their cine views
and the relative frame paths; loading materializes everything into plain
in-memory values and never mutates the files.

Checkpoints are a small binary container: magic, format version, array
shapes, then raw little-endian float32 weights.
"""

from __future__ import annotations

import enum
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

MANIFEST_FORMAT = "domvote-dataset"
MANIFEST_VERSION = 1
TRUTH_FORMAT = "domvote-truth"

CHECKPOINT_MAGIC = b"DVCK"
CHECKPOINT_VERSION = 1


class DataError(Exception):
    """A file or dataset violates one of the documented formats."""


class Dominance(enum.Enum):
    """Coronary dominance label. Class index 0 is left, 1 is right."""

    LEFT = 0
    RIGHT = 1

    @property
    def index(self) -> int:
        return self.value

    @classmethod
    def from_string(cls, text: str) -> "Dominance":
        try:
            return {"left": cls.LEFT, "right": cls.RIGHT}[text]
        except KeyError:
            raise DataError(f"unknown dominance label {text!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


class Artery(enum.Enum):
    RCA = "rca"
    LCA = "lca"

    @classmethod
    def from_string(cls, text: str) -> "Artery":
        try:
            return cls(text)
        except ValueError:
            raise DataError(f"unknown artery {text!r}") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Frame:
    """One grayscale frame, row-major uint8 intensities in 0..255."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError(f"frame pixels must be 2-d, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"frame pixels must be uint8, got {self.pixels.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class CineView:
    """A cine sequence from one projection of one study.

    ``informative_truth`` is generator metadata (synthetic data only): one
    boolean per frame, true where contrast renders the vessel clearly.
    """

    view_id: str
    artery: Artery
    frames: tuple[Frame, ...]
    fps: int = 15
    informative_truth: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError(f"view {self.view_id!r} has no frames")
        h, w = self.frames[0].pixels.shape
        for i, frame in enumerate(self.frames):
            if frame.pixels.shape != (h, w):
                raise ValueError(
                    f"view {self.view_id!r}: frame {i} is {frame.pixels.shape}, "
                    f"expected {(h, w)}"
                )
        if self.informative_truth is not None and len(self.informative_truth) != len(self.frames):
            raise ValueError(
                f"view {self.view_id!r}: {len(self.informative_truth)} truth flags "
                f"for {len(self.frames)} frames"
            )

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Study:
    study_id: str
    dominance: Dominance
    views: tuple[CineView, ...]

    def __post_init__(self) -> None:
        if not any(v.artery is Artery.RCA for v in self.views):
            raise ValueError(f"study {self.study_id!r} has no RCA view")

    def rca_views(self) -> tuple[CineView, ...]:
        return tuple(v for v in self.views if v.artery is Artery.RCA)


Dataset = list[Study]


# ---------------------------------------------------------------------------
# PGM


def write_pgm(path: str, pixels: np.ndarray) -> None:
    """Write an 8-bit binary PGM (P5, maxval 255)."""
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("write_pgm expects a 2-d uint8 array")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pixels.tobytes(order="C"))


def read_pgm(path: str) -> np.ndarray:
    """Read a frame written by :func:`write_pgm`. Strict about the format."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5) file")
    parts = blob.split(b"\n", 3)
    if len(parts) < 4:
        raise DataError(f"{path}: truncated PGM header")
    _, dims, maxval, payload = parts
    try:
        w, h = (int(tok) for tok in dims.split())
    except ValueError:
        raise DataError(f"{path}: malformed PGM dimensions {dims!r}") from None
    if maxval != b"255":
        raise DataError(f"{path}: unsupported PGM maxval {maxval!r} (expected 255)")
    if w <= 0 or h <= 0:
        raise DataError(f"{path}: bad PGM dimensions {w}x{h}")
    if len(payload) < w * h:
        raise DataError(f"{path}: truncated PGM payload ({len(payload)} of {w * h} bytes)")
    if len(payload) > w * h:
        raise DataError(f"{path}: {len(payload) - w * h} trailing bytes after PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


# ---------------------------------------------------------------------------
# Manifest


def _study_to_entry(study: Study, frame_paths: dict[tuple[str, str], list[str]]) -> dict:
    views = []
    for view in study.views:
        entry = {
            "view_id": view.view_id,
            "artery": str(view.artery),
            "fps": view.fps,
            "frames": frame_paths[(study.study_id, view.view_id)],
        }
        if view.informative_truth is not None:
            entry["informative_truth"] = list(view.informative_truth)
        views.append(entry)
    return {"study_id": study.study_id, "dominance": str(study.dominance), "views": views}


def write_dataset(dataset: Dataset, root: str) -> str:
    """Write frames and manifest under ``root``; returns the manifest path.

    Frames land in ``frames/<study>/<view>/<index>.pgm`` relative to root.
    """
    os.makedirs(root, exist_ok=True)
    frame_paths: dict[tuple[str, str], list[str]] = {}
    for study in dataset:
        for view in study.views:
            rel_dir = os.path.join("frames", study.study_id, view.view_id)
            os.makedirs(os.path.join(root, rel_dir), exist_ok=True)
            rels = []
            for i, frame in enumerate(view.frames):
                rel = os.path.join(rel_dir, f"{i:04d}.pgm")
                write_pgm(os.path.join(root, rel), frame.pixels)
                rels.append(rel)
            frame_paths[(study.study_id, view.view_id)] = rels
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "studies": [_study_to_entry(s, frame_paths) for s in dataset],
    }
    manifest_path = os.path.join(root, "manifest.json")
    with open(manifest_path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_manifest(path: str) -> Dataset:
    """Load a dataset from its manifest file.

    Fails atomically: any missing frame, duplicate study id, dimension
    mismatch or schema violation raises :class:`DataError` and nothing is
    returned. Study and view order is preserved as listed.
    """
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format") != MANIFEST_FORMAT:
        raise DataError(f"{path}: unrecognized manifest format {doc.get('format')!r}")
    if doc.get("version") != MANIFEST_VERSION:
        raise DataError(f"{path}: unsupported manifest version {doc.get('version')!r}")
    base = os.path.dirname(os.path.abspath(path))

    dataset: Dataset = []
    seen: set[str] = set()
    for s_entry in doc.get("studies", []):
        study_id = s_entry.get("study_id")
        if not isinstance(study_id, str) or not study_id:
            raise DataError(f"{path}: study with missing or empty study_id")
        if study_id in seen:
            raise DataError(f"{path}: duplicate study_id {study_id!r}")
        seen.add(study_id)
        dominance = Dominance.from_string(s_entry.get("dominance", ""))
        views = []
        for v_entry in s_entry.get("views", []):
            frames = []
            for rel in v_entry.get("frames", []):
                frame_path = os.path.join(base, rel)
                if not os.path.isfile(frame_path):
                    raise DataError(f"{path}: missing frame file {rel!r} (study {study_id})")
                frames.append(Frame(read_pgm(frame_path)))
            truth = v_entry.get("informative_truth")
            try:
                view = CineView(
                    view_id=v_entry.get("view_id", ""),
                    artery=Artery.from_string(v_entry.get("artery", "")),
                    frames=tuple(frames),
                    fps=int(v_entry.get("fps", 15)),
                    informative_truth=None if truth is None else tuple(bool(b) for b in truth),
                )
            except ValueError as exc:
                raise DataError(f"{path}: study {study_id}: {exc}") from None
            views.append(view)
        try:
            dataset.append(Study(study_id=study_id, dominance=dominance, views=tuple(views)))
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    return dataset


def write_truth(truth: dict[str, dict], root: str) -> str:
    """Write the hidden per-study truth sidecar (occlusion/flip tags etc.).

    The training pipeline never reads this file; the evaluation harness may.
    """
    doc = {"format": TRUTH_FORMAT, "version": 1, "studies": truth}
    path = os.path.join(root, "truth.json")
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_truth(root: str) -> dict[str, dict] | None:
    """Load the truth sidecar next to a manifest, or None if absent."""
    if os.path.isfile(root):
        root = os.path.dirname(os.path.abspath(root))
    path = os.path.join(root, "truth.json")
    if not os.path.isfile(path):
        return None
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("format") != TRUTH_FORMAT:
        raise DataError(f"{path}: unrecognized truth format {doc.get('format')!r}")
    return doc["studies"]


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(arrays: list[np.ndarray], path: str) -> None:
    """Serialize float32 arrays: magic, version, shapes, then raw weights."""
    for a in arrays:
        if a.dtype != np.float32:
            raise ValueError(f"checkpoint arrays must be float32, got {a.dtype}")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(arrays)))
        for a in arrays:
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        for a in arrays:
            fh.write(a.astype("<f4", copy=False).tobytes(order="C"))


def load_checkpoint(path: str) -> list[np.ndarray]:
    """Inverse of :func:`save_checkpoint`; round-trips bit-identically."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    offset = 4
    try:
        version, count = struct.unpack_from("<II", blob, offset)
    except struct.error:
        raise DataError(f"{path}: truncated checkpoint header") from None
    offset += 8
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    shapes = []
    for _ in range(count):
        try:
            (ndim,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
        except struct.error:
            raise DataError(f"{path}: truncated checkpoint shape table") from None
        shapes.append(shape)
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * n
        if end > len(blob):
            raise DataError(f"{path}: truncated checkpoint weights")
        arrays.append(np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).copy())
        offset = end
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes in checkpoint")
    return arrays
