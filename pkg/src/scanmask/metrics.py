"""Image quality metrics: NMSE (complex), SSIM and HFEN (magnitude).

NMSE is the optimization loss: it is a fixed positive rescaling of the
squared l2 error for a given reference image, so argmins over masks are
identical to plain l2.  SSIM and HFEN operate on magnitude images with
community-standard parameters (11x11 Gaussian window sigma=1.5 for SSIM;
15x15 zero-sum Laplacian-of-Gaussian kernel sigma=1.5 for HFEN).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError, InvalidInputError, UndefinedMetricError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
HFEN_KERNEL_SIZE = 15
HFEN_SIGMA = 1.5

METRIC_CSV_COLUMNS = ["scan_id", "mask_kind", "recon_kind", "nmse", "ssim", "hfen"]


@dataclass(frozen=True)
class MetricReport:
    nmse: float
    ssim: float
    hfen: float


def _check_shapes(x_gt: np.ndarray, x_rec: np.ndarray) -> None:
    if x_gt.shape != x_rec.shape:
        raise DimensionError(f"metric: shapes {x_gt.shape} vs {x_rec.shape}")


def nmse(x_gt: np.ndarray, x_rec: np.ndarray) -> float:
    """||x_gt - x_rec||^2 / ||x_gt||^2 on complex values."""
    _check_shapes(x_gt, x_rec)
    denom = np.sum(np.abs(x_gt) ** 2)
    if denom == 0:
        raise UndefinedMetricError("nmse: reference image has zero energy")
    return float(np.sum(np.abs(x_gt - x_rec) ** 2) / denom)


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel of odd size."""
    r = size // 2
    g = np.exp(-(np.arange(-r, r + 1) ** 2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x_gt: np.ndarray, x_rec: np.ndarray) -> float:
    """Mean local SSIM over magnitude images.

    Local statistics are Gaussian-weighted over fully contained 11x11
    windows ("valid" positions only); the dynamic range is the max
    magnitude of the reference image.
    """
    _check_shapes(x_gt, x_rec)
    h, w = x_gt.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise InvalidInputError(
            f"ssim: image {h}x{w} smaller than {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    a = np.abs(x_gt).astype(np.float64)
    b = np.abs(x_rec).astype(np.float64)
    win = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, win, mode="valid") - mu_b**2
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b

    data_range = a.max()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def log_kernel(size: int = HFEN_KERNEL_SIZE, sigma: float = HFEN_SIGMA) -> np.ndarray:
    """Zero-sum Laplacian-of-Gaussian kernel (mean subtracted)."""
    r = size // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    rr = xx**2 + yy**2
    k = (rr - 2.0 * sigma**2) / sigma**4 * np.exp(-rr / (2.0 * sigma**2))
    return k - k.mean()


def hfen(x_gt: np.ndarray, x_rec: np.ndarray) -> float:
    """High-frequency error norm: relative l2 distance of LoG-filtered magnitudes."""
    _check_shapes(x_gt, x_rec)
    k = log_kernel()
    ref = convolve2d(np.abs(x_gt), k, mode="same", boundary="fill")
    rec = convolve2d(np.abs(x_rec), k, mode="same", boundary="fill")
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise UndefinedMetricError("hfen: LoG of reference image has zero energy")
    return float(np.linalg.norm(rec - ref) / denom)


def central_crop(img: np.ndarray, fraction: float) -> np.ndarray:
    """Keep the central ``fraction`` of both dimensions (fraction in (0, 1])."""
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"central_crop: fraction {fraction} not in (0, 1]")
    h, w = img.shape[-2:]
    ch, cw = max(1, round(h * fraction)), max(1, round(w * fraction))
    top, left = (h - ch) // 2, (w - cw) // 2
    return img[..., top : top + ch, left : left + cw]


def evaluate(
    x_gt: np.ndarray, x_rec: np.ndarray, crop_fraction: float | None = None
) -> MetricReport:
    """All three metrics, optionally on centrally cropped images."""
    if crop_fraction is not None:
        x_gt = central_crop(x_gt, crop_fraction)
        x_rec = central_crop(x_rec, crop_fraction)
    return MetricReport(
        nmse=nmse(x_gt, x_rec), ssim=ssim(x_gt, x_rec), hfen=hfen(x_gt, x_rec)
    )


def write_metric_csv(path, rows: list[dict]) -> None:
    """Write metric rows with the canonical column set."""
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=METRIC_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in METRIC_CSV_COLUMNS})
