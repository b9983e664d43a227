"""Scan-adaptive Cartesian MRI sampling mask learning.

Learns per-scan undersampling line masks on a training set via greedy
selection and iterative coordinate descent, jointly tuned with a classical
reconstructor, and predicts masks for unseen scans by nearest-neighbor
search over low-frequency reconstructions.
"""

from .core import LineMask, adjoint, apply_mask, fft2c, forward, ifft2c
from .errors import (
    DataError,
    DimensionError,
    InfeasibleConfigError,
    InvalidInputError,
    NumericalError,
    ScanmaskError,
    UndefinedMetricError,
)
from .maskopt import (
    OptimConfig,
    TrainSchedule,
    alternate_train,
    central_lines,
    greedy_optimize,
    icd_optimize,
    make_vdrs_mask,
    population_greedy,
    scan_loss,
)
from .metrics import MetricReport, evaluate, hfen, nmse, ssim
from .nnpredict import build_library, load_library, lowfreq_feature, predict_mask, save_library
from .phantom import (
    ScanBundle,
    gen_phantom,
    gen_smaps,
    generate_corpus,
    load_bundle,
    load_corpus,
    make_bundle,
    save_bundle,
    simulate_kspace,
)
from .recon import CGResult, ReconParams, cg_solve, default_grid, reconstruct, tune_reconstructor

__version__ = "0.1.0"
