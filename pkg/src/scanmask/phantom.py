"""Synthetic multi-coil scan generation and the on-disk bundle format.

Each scan bundle holds fully sampled k-space, coil sensitivity maps, and the
coil-combined ground-truth image, all generated deterministically from a
seed.  Phantoms are randomized Shepp-Logan ellipse compositions with a
smooth complex phase; coil maps are Gaussian profiles on a ring around the
field of view, root-sum-of-squares normalized.

Disk format: one directory per scan containing ``manifest.json`` plus raw
little-endian interleaved complex64 binaries (coil-major, row-major).
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import LineMask, fft2c, forward, ifft2c
from .errors import DataError, DimensionError, InvalidInputError

GENERATOR_VERSION = "1.0"
_DTYPE_TAG = "c64le-interleaved"

# Standard Shepp-Logan ellipse table: (intensity, a, b, x0, y0, angle_deg),
# axes and centers in [-1, 1] units.
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


@dataclass
class ScanBundle:
    scan_id: str
    kspace: np.ndarray  # (Nc, H, W) complex, fully sampled
    smaps: np.ndarray  # (Nc, H, W) complex, RSS-normalized
    support: np.ndarray  # (H, W) bool
    gt: np.ndarray  # (H, W) complex
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gt.shape

    @property
    def ncoils(self) -> int:
        return self.kspace.shape[0]


def _smooth_field(rng: np.random.Generator, h: int, w: int, n_modes: int = 3) -> np.ndarray:
    """Bandlimited real random field via a few low-frequency Fourier modes."""
    spec = np.zeros((h, w), dtype=complex)
    ch, cw = h // 2, w // 2
    for dy in range(-n_modes, n_modes + 1):
        for dx in range(-n_modes, n_modes + 1):
            spec[ch + dy, cw + dx] = rng.normal() + 1j * rng.normal()
    fld = ifft2c(spec).real
    return fld


def gen_phantom(seed: int, h: int, w: int) -> np.ndarray:
    """Randomly perturbed Shepp-Logan phantom with a smooth phase field."""
    if h < 16 or w < 16:
        raise InvalidInputError(f"gen_phantom: size {h}x{w} below 16x16 minimum")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[-1 : 1 : h * 1j, -1 : 1 : w * 1j]

    img = np.zeros((h, w))
    for inten, a, b, x0, y0, ang in _SHEPP_LOGAN:
        inten = inten * (1 + rng.uniform(-0.2, 0.2))
        a = a * (1 + rng.uniform(-0.15, 0.15))
        b = b * (1 + rng.uniform(-0.15, 0.15))
        x0 = x0 + rng.uniform(-0.1, 0.1)
        y0 = y0 + rng.uniform(-0.1, 0.1)
        theta = np.deg2rad(ang + rng.uniform(-15, 15))
        ct, st = np.cos(theta), np.sin(theta)
        xr = (xx - x0) * ct + (yy - y0) * st
        yr = -(xx - x0) * st + (yy - y0) * ct
        img += inten * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)

    img = np.abs(img)
    phase = _smooth_field(rng, h, w)
    phase *= (np.pi / 2) / max(np.abs(phase).max(), 1e-12)
    out = img * np.exp(1j * phase)
    peak = np.abs(out).max()
    if peak == 0:
        raise InvalidInputError("gen_phantom: degenerate all-zero phantom")
    return out / peak


def gen_smaps(
    seed: int, nc: int, h: int, w: int, support: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Smooth complex coil profiles, RSS-normalized to 1 on the support.

    Returns (maps, support).  Default support is the full grid, in which
    case normalization holds everywhere and A^H A = I under full sampling.
    """
    if nc < 1:
        raise InvalidInputError("gen_smaps: need at least one coil")
    rng = np.random.default_rng(seed)
    if support is None:
        support = np.ones((h, w), dtype=bool)
    yy, xx = np.mgrid[-1 : 1 : h * 1j, -1 : 1 : w * 1j]

    maps = np.zeros((nc, h, w), dtype=complex)
    width = 1.2
    for c in range(nc):
        ang = 2 * np.pi * c / nc + rng.uniform(-0.2, 0.2)
        cx, cy = 1.3 * np.cos(ang), 1.3 * np.sin(ang)
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))
        phase = 0.2 * _smooth_field(rng, h, w, n_modes=1)
        maps[c] = mag * np.exp(1j * phase)

    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    maps /= rss  # Gaussian profiles are strictly positive, rss > 0 everywhere
    return maps, support


def simulate_kspace(
    x: np.ndarray, smaps: np.ndarray, noise_sigma: float, seed: int
) -> np.ndarray:
    """Fully sampled noisy multi-coil k-space of an image."""
    if x.shape != smaps.shape[1:]:
        raise DimensionError(f"simulate_kspace: image {x.shape} vs maps {smaps.shape}")
    if noise_sigma < 0:
        raise InvalidInputError("simulate_kspace: negative noise_sigma")
    ksp = forward(x, smaps, LineMask.full(x.shape[-1]))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        ksp = ksp + noise_sigma * (
            rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape)
        )
    return ksp


def coil_combine(kspace: np.ndarray, smaps: np.ndarray) -> np.ndarray:
    """Coil-combined image of fully sampled k-space: sum_c conj(S_c) ifft2c(y_c)."""
    return np.sum(np.conj(smaps) * ifft2c(kspace), axis=0)


def make_bundle(
    seed: int, h: int, w: int, nc: int, noise_sigma: float = 0.0
) -> ScanBundle:
    """Generate one synthetic scan: phantom, maps, k-space, and ground truth."""
    phantom = gen_phantom(seed, h, w)
    smaps, support = gen_smaps(seed + 1_000_003, nc, h, w)
    kspace = simulate_kspace(phantom, smaps, noise_sigma, seed + 2_000_003)
    gt = coil_combine(kspace, smaps)
    return ScanBundle(
        scan_id=f"scan{seed:05d}",
        kspace=kspace,
        smaps=smaps,
        support=support,
        gt=gt,
        meta={
            "seed": seed,
            "noise_sigma": noise_sigma,
            "generator_version": GENERATOR_VERSION,
        },
    )


def _write_complex(path: Path, arr: np.ndarray) -> None:
    arr.astype("<c8").tofile(path)


def _read_complex(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    n_expected = int(np.prod(shape))
    raw = np.fromfile(path, dtype="<c8")
    if raw.size != n_expected:
        raise DataError(
            f"corrupt bundle: {path} holds {raw.size} values, expected {n_expected}"
        )
    return raw.reshape(shape).astype(np.complex128)


def save_bundle(bundle: ScanBundle, out_dir: str | Path) -> Path:
    """Write a bundle directory atomically (temp dir + rename)."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".bundle-", dir=out_dir.parent))
    try:
        nc, h, w = bundle.kspace.shape
        _write_complex(tmp / "kspace.bin", bundle.kspace)
        _write_complex(tmp / "smaps.bin", bundle.smaps)
        _write_complex(tmp / "gt.bin", bundle.gt)
        manifest = {
            "scan_id": bundle.scan_id,
            "height": h,
            "width": w,
            "ncoils": nc,
            "dtype": _DTYPE_TAG,
            "files": {"kspace": "kspace.bin", "smaps": "smaps.bin", "gt": "gt.bin"},
            "meta": bundle.meta,
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2))
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except OSError as e:
        shutil.rmtree(tmp, ignore_errors=True)
        raise DataError(f"failed to write bundle at {out_dir}: {e}") from e
    return out_dir


def load_bundle(bundle_dir: str | Path) -> ScanBundle:
    """Read a bundle directory; raises DataError on any inconsistency."""
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"corrupt manifest {manifest_path}: {e}") from e
    if manifest.get("dtype") != _DTYPE_TAG:
        raise DataError(f"unsupported dtype in {manifest_path}")

    h, w, nc = manifest["height"], manifest["width"], manifest["ncoils"]
    files = manifest["files"]
    kspace = _read_complex(bundle_dir / files["kspace"], (nc, h, w))
    smaps = _read_complex(bundle_dir / files["smaps"], (nc, h, w))
    gt = _read_complex(bundle_dir / files["gt"], (h, w))
    # support is not stored; reconstruct from the RSS profile
    support = np.sqrt(np.sum(np.abs(smaps) ** 2, axis=0)) > 0.5
    return ScanBundle(
        scan_id=manifest["scan_id"],
        kspace=kspace,
        smaps=smaps,
        support=support,
        gt=gt,
        meta=manifest.get("meta", {}),
    )


def generate_corpus(
    out_dir: str | Path,
    n_train: int,
    n_test: int,
    h: int,
    w: int,
    nc: int,
    noise_sigma: float,
    seed: int,
) -> dict:
    """Write n_train + n_test bundles plus an index.json train/test split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ids, test_ids = [], []
    for i in range(n_train + n_test):
        bundle = make_bundle(seed + i, h, w, nc, noise_sigma)
        save_bundle(bundle, out_dir / bundle.scan_id)
        (train_ids if i < n_train else test_ids).append(bundle.scan_id)
    index = {
        "train": train_ids,
        "test": test_ids,
        "height": h,
        "width": w,
        "ncoils": nc,
        "noise_sigma": noise_sigma,
        "seed": seed,
        "generator_version": GENERATOR_VERSION,
    }
    (out_dir / "index.json").write_text(json.dumps(index, indent=2))
    return index


def load_corpus(data_dir: str | Path) -> tuple[list[ScanBundle], list[ScanBundle]]:
    """Load (train, test) bundles listed by index.json."""
    data_dir = Path(data_dir)
    index_path = data_dir / "index.json"
    if not index_path.exists():
        raise DataError(f"missing data index: {index_path}")
    index = json.loads(index_path.read_text())
    train = [load_bundle(data_dir / sid) for sid in index["train"]]
    test = [load_bundle(data_dir / sid) for sid in index["test"]]
    return train, test
