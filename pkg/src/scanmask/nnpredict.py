"""Nearest-neighbor mask prediction from low-frequency features.

The training stage leaves behind a library pairing each scan's
low-frequency zero-filled reconstruction with its optimized mask.  At test
time the same feature is computed from the acquired central lines of the
unseen scan and the mask of the closest library entry (complex Euclidean
distance) is returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LineMask, adjoint
from .errors import DataError, InvalidInputError

FEATURE_DTYPE = "<c8"  # little-endian interleaved complex64 on disk


@dataclass
class LibraryEntry:
    scan_id: str
    feature: np.ndarray  # (H, W) complex low-frequency reconstruction
    mask: LineMask


@dataclass
class MaskLibrary:
    width: int
    fixed: frozenset[int]
    entries: list[LibraryEntry]


def lowfreq_feature(
    y: np.ndarray, smaps: np.ndarray, fixed: frozenset[int] | set[int]
) -> np.ndarray:
    """Coil-combined zero-filled image from the central lines only."""
    if not fixed:
        raise InvalidInputError("lowfreq_feature: empty low-frequency line set")
    width = y.shape[-1]
    mask = LineMask(width, tuple(sorted(fixed)), frozenset(fixed), len(fixed))
    return adjoint(y, smaps, mask)


def build_library(train, fixed: frozenset[int] | set[int]) -> MaskLibrary:
    """One entry per (bundle, mask) training pair, order preserved."""
    train = list(train)
    if not train:
        raise InvalidInputError("build_library: empty training list")
    fixed = frozenset(int(c) for c in fixed)
    width = train[0][1].width
    entries = []
    for bundle, mask in train:
        if mask.width != width:
            raise InvalidInputError("build_library: inconsistent mask widths")
        if not mask.complete:
            raise InvalidInputError(f"build_library: incomplete mask for {bundle.scan_id}")
        if not fixed <= set(mask.lines):
            raise InvalidInputError(
                f"build_library: mask for {bundle.scan_id} lacks the fixed block"
            )
        feature = lowfreq_feature(bundle.kspace, bundle.smaps, fixed)
        entries.append(LibraryEntry(bundle.scan_id, feature, mask))
    return MaskLibrary(width, fixed, entries)


def predict_mask(
    y_test: np.ndarray, smaps_test: np.ndarray, library: MaskLibrary
) -> tuple[LineMask, str, float]:
    """Mask of the library entry nearest in low-frequency feature space.

    Ties break toward the earliest library entry.  Returns
    (mask, neighbor scan_id, Euclidean distance).
    """
    if not library.entries:
        raise InvalidInputError("predict_mask: empty library")
    feat = lowfreq_feature(y_test, smaps_test, library.fixed)
    if feat.shape != library.entries[0].feature.shape:
        raise InvalidInputError("predict_mask: feature shape mismatch with library")
    dists = [
        float(np.linalg.norm(feat - e.feature.astype(np.complex128)))
        for e in library.entries
    ]
    idx = int(np.argmin(dists))
    entry = library.entries[idx]
    return entry.mask, entry.scan_id, dists[idx]


def save_library(library: MaskLibrary, out_dir: str | Path) -> Path:
    """Directory with library.json plus one raw complex64 feature file per entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries_meta = []
    for i, entry in enumerate(library.entries):
        fname = f"feature_{i:04d}.bin"
        entry.feature.astype(FEATURE_DTYPE).tofile(out_dir / fname)
        entries_meta.append(
            {
                "scan_id": entry.scan_id,
                "mask": entry.mask.to_json_dict(),
                "feature": fname,
                "height": entry.feature.shape[0],
                "width": entry.feature.shape[1],
            }
        )
    meta = {
        "width": library.width,
        "fixed": sorted(library.fixed),
        "entries": entries_meta,
    }
    (out_dir / "library.json").write_text(json.dumps(meta, indent=2))
    return out_dir


def load_library(lib_dir: str | Path) -> MaskLibrary:
    lib_dir = Path(lib_dir)
    meta_path = lib_dir / "library.json"
    if not meta_path.exists():
        raise DataError(f"missing library file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    entries = []
    for em in meta["entries"]:
        raw = np.fromfile(lib_dir / em["feature"], dtype=FEATURE_DTYPE)
        n_expected = em["height"] * em["width"]
        if raw.size != n_expected:
            raise DataError(f"corrupt feature file {em['feature']}")
        entries.append(
            LibraryEntry(
                em["scan_id"],
                raw.reshape(em["height"], em["width"]),
                LineMask.from_json_dict(em["mask"]),
            )
        )
    return MaskLibrary(int(meta["width"]), frozenset(meta["fixed"]), entries)
