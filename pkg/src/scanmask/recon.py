"""Classical reconstructors and their grid-search tuning.

Three reconstructor kinds share one parameter record:

* ``zero-filled``    -- coil-combined adjoint of the masked k-space.
* ``tikhonov-cg``    -- CG solve of (A^H A + lambda I) x = A^H y.
* ``modl-unrolled``  -- unrolled alternation between a Gaussian-blur
  denoiser z_n = D(x_n) and the data-consistency solve
  (A^H A + lambda I) x = A^H y + lambda z_n, warm-started across blocks.

"Training" the reconstructor is an exhaustive grid search minimizing mean
NMSE over (scan, mask) pairs, with deterministic tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from . import metrics
from .core import LineMask, adjoint, forward
from .errors import InvalidInputError, NumericalError

RECON_KINDS = ("zero-filled", "tikhonov-cg", "modl-unrolled")


@dataclass(frozen=True)
class ReconParams:
    kind: str
    lam: float = 0.0
    n_blocks: int = 1
    cg_tol: float = 1e-8
    cg_maxiter: int = 50
    denoiser_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in RECON_KINDS:
            raise InvalidInputError(f"unknown reconstructor kind {self.kind!r}")
        if self.lam < 0 or self.cg_tol <= 0 or self.n_blocks < 1:
            raise InvalidInputError("ReconParams: invalid parameter values")
        if self.denoiser_sigma < 0:
            raise InvalidInputError("ReconParams: negative denoiser_sigma")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "n_blocks": self.n_blocks,
            "cg_tol": self.cg_tol,
            "cg_maxiter": self.cg_maxiter,
            "denoiser_sigma": self.denoiser_sigma,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReconParams":
        return cls(
            kind=d["kind"],
            lam=float(d["lambda"]),
            n_blocks=int(d["n_blocks"]),
            cg_tol=float(d["cg_tol"]),
            cg_maxiter=int(d["cg_maxiter"]),
            denoiser_sigma=float(d["denoiser_sigma"]),
        )


@dataclass
class CGResult:
    x: np.ndarray
    niter: int
    residual: float
    residual_history: list[float]
    # quadratic objective 0.5 x^H A x - Re<rhs, x>; monotone under CG,
    # unlike the residual 2-norm
    objective_history: list[float] = field(default_factory=list)


def cg_solve(
    normal_op: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol: float = 1e-8,
    maxiter: int = 50,
    x0: np.ndarray | None = None,
) -> CGResult:
    """Conjugate gradients for a Hermitian positive definite operator.

    Stops when the relative residual ||normal_op(x) - rhs|| / ||rhs||
    drops to ``tol`` or at ``maxiter`` iterations.
    """
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CGResult(np.zeros_like(rhs), 0, 0.0, [0.0], [0.0])

    def objective(x, r):
        # phi(x) = 0.5 x^H A x - Re<rhs, x>, rewritten via r = rhs - A x
        return float(-0.5 * (np.vdot(rhs, x).real + np.vdot(r, x).real))

    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - normal_op(x)
    p = r.copy()
    rsold = float(np.vdot(r, r).real)
    history = [float(np.sqrt(rsold)) / rhs_norm]
    objectives = [objective(x, r)]
    niter = 0
    for _ in range(maxiter):
        if history[-1] <= tol:
            break
        ap = normal_op(p)
        denom = np.vdot(p, ap).real
        if not np.isfinite(denom) or denom <= 0:
            raise NumericalError("cg_solve: operator lost positive definiteness")
        alpha = rsold / denom
        x = x + alpha * p
        r = r - alpha * ap
        rsnew = float(np.vdot(r, r).real)
        if not np.isfinite(rsnew):
            raise NumericalError("cg_solve: non-finite residual")
        history.append(float(np.sqrt(rsnew)) / rhs_norm)
        objectives.append(objective(x, r))
        niter += 1
        p = r + (rsnew / rsold) * p
        rsold = rsnew
    return CGResult(x, niter, history[-1], history, objectives)


def _blur(x: np.ndarray, sigma: float) -> np.ndarray:
    """Isotropic Gaussian blur applied to real and imaginary parts."""
    if sigma == 0:
        return x
    return gaussian_filter(x.real, sigma) + 1j * gaussian_filter(x.imag, sigma)


def reconstruct(
    y: np.ndarray, smaps: np.ndarray, mask: LineMask, params: ReconParams
) -> np.ndarray:
    """Reconstruct an image from (possibly fully sampled) k-space under a mask."""
    x_zf = adjoint(y, smaps, mask)
    if params.kind == "zero-filled":
        return x_zf

    lam = params.lam

    def normal_op(v: np.ndarray) -> np.ndarray:
        return adjoint(forward(v, smaps, mask), smaps, mask) + lam * v

    if params.kind == "tikhonov-cg":
        return cg_solve(normal_op, x_zf, params.cg_tol, params.cg_maxiter).x

    # modl-unrolled
    x = x_zf
    for _ in range(params.n_blocks):
        z = _blur(x, params.denoiser_sigma)
        x = cg_solve(
            normal_op, x_zf + lam * z, params.cg_tol, params.cg_maxiter, x0=x
        ).x
    return x


def default_grid(kind: str) -> list[ReconParams]:
    """Bracketing parameter grid used when no explicit grid is given."""
    if kind == "zero-filled":
        return [ReconParams(kind="zero-filled")]
    lams = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    if kind == "tikhonov-cg":
        return [ReconParams(kind="tikhonov-cg", lam=lam) for lam in lams]
    return [
        ReconParams(kind="modl-unrolled", lam=lam, denoiser_sigma=s, n_blocks=n)
        for lam in lams
        for s in [0.5, 1.0, 2.0]
        for n in [1, 3]
    ]


def mean_nmse(scans: Sequence, params: ReconParams) -> float:
    """Mean NMSE of ``reconstruct`` against ground truth over (bundle, mask) pairs."""
    total = 0.0
    for bundle, mask in scans:
        rec = reconstruct(bundle.kspace, bundle.smaps, mask, params)
        total += metrics.nmse(bundle.gt, rec)
    return total / len(scans)


def tune_reconstructor(
    scans: Sequence, kind: str, grid: Iterable[ReconParams] | None = None
) -> ReconParams:
    """Grid-search the reconstructor parameters minimizing mean NMSE.

    Ties (losses within 1e-12 relative) break toward smaller lambda, then
    smaller denoiser_sigma, then smaller n_blocks.
    """
    scans = list(scans)
    grid = list(grid) if grid is not None else default_grid(kind)
    if not scans or not grid:
        raise InvalidInputError("tune_reconstructor: empty scans or grid")
    for params in grid:
        if params.kind != kind:
            raise InvalidInputError(
                f"tune_reconstructor: grid entry kind {params.kind!r} != {kind!r}"
            )

    best: ReconParams | None = None
    best_loss = np.inf
    for params in grid:
        loss = mean_nmse(scans, params)
        tie = abs(loss - best_loss) <= 1e-12 * max(1.0, abs(best_loss))
        if best is None or (loss < best_loss and not tie):
            best, best_loss = params, loss
        elif tie:
            cand_key = (params.lam, params.denoiser_sigma, params.n_blocks)
            best_key = (best.lam, best.denoiser_sigma, best.n_blocks)
            if cand_key < best_key:
                best, best_loss = params, min(loss, best_loss)
    return best


def search_params(params: ReconParams) -> ReconParams:
    """Cheapened solver settings for use inside mask-search loops.

    Greedy/ICD sweeps evaluate thousands of candidate masks; a loosely
    converged solve of the same reconstruction model ranks candidates
    almost identically at a fraction of the cost.
    """
    if params.kind == "zero-filled":
        return params
    cheap = dict(cg_tol=max(params.cg_tol, 1e-3), cg_maxiter=min(params.cg_maxiter, 8))
    if params.kind == "modl-unrolled":
        cheap["n_blocks"] = 1
    return replace(params, **cheap)


def with_kind_defaults(kind: str) -> ReconParams:
    """A reasonable standalone parameter set for a kind (no tuning)."""
    if kind == "zero-filled":
        return ReconParams(kind="zero-filled")
    if kind == "tikhonov-cg":
        return ReconParams(kind="tikhonov-cg", lam=1e-2)
    return replace(
        ReconParams(kind="modl-unrolled", lam=1e-2), denoiser_sigma=1.0, n_blocks=3
    )
