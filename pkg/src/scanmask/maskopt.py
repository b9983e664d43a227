"""Sampling-pattern search: VDRS baseline, greedy selection, ICD refinement,
population-adaptive greedy, and the alternating training driver.

All searches evaluate candidate masks through a reconstructor and score the
result with NMSE against ground truth; NMSE is a positive rescaling of the
squared l2 error per scan, so argmins match the plain l2 objective.
Tie-breaking is always toward the lowest column index so results do not
depend on evaluation order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import LineMask
from .errors import InfeasibleConfigError, InvalidInputError
from .metrics import nmse
from .phantom import ScanBundle
from .recon import ReconParams, default_grid, reconstruct, tune_reconstructor


@dataclass(frozen=True)
class OptimConfig:
    budget: int
    n_lowfreq: int
    n_icd_iters: int = 1
    candidate_set: tuple[int, ...] | None = None
    loss: str = "nmse"
    freeze_lowfreq: bool = True
    tie_tol: float = 1e-12
    parallelism: int = 1

    def __post_init__(self):
        if self.n_lowfreq > self.budget:
            raise InvalidInputError("OptimConfig: n_lowfreq exceeds budget")
        if self.budget < 0 or self.n_lowfreq < 0 or self.n_icd_iters < 0:
            raise InvalidInputError("OptimConfig: negative counts")
        if self.loss != "nmse":
            raise InvalidInputError(f"OptimConfig: unknown loss {self.loss!r}")


def central_lines(width: int, n: int) -> list[int]:
    """The n contiguous columns nearest DC (extra line below DC for even n)."""
    if not 0 <= n <= width:
        raise InvalidInputError(f"central_lines: n={n} outside [0, {width}]")
    start = width // 2 - n // 2
    return list(range(start, start + n))


def scan_loss(bundle: ScanBundle, mask: LineMask, recon: ReconParams) -> float:
    """NMSE of the reconstruction from the masked k-space of one scan."""
    rec = reconstruct(bundle.kspace, bundle.smaps, mask, recon)
    return nmse(bundle.gt, rec)


def make_vdrs_mask(
    width: int, config: OptimConfig, density_power: float, seed: int
) -> LineMask:
    """Variable-density random mask: frozen central block plus random lines
    drawn without replacement with probability decaying away from DC."""
    if config.budget > width:
        raise InvalidInputError("make_vdrs_mask: budget exceeds width")
    fixed = central_lines(width, config.n_lowfreq)
    if config.budget == width:
        return LineMask(width, tuple(range(width)), frozenset(fixed), width)

    dc = width // 2
    candidates = np.array([c for c in range(width) if c not in fixed])
    weights = (1.0 - np.abs(candidates - dc) / (width / 2.0)) ** density_power
    n_draw = config.budget - config.n_lowfreq
    if (weights > 0).sum() < n_draw:
        raise InfeasibleConfigError("make_vdrs_mask: not enough admissible columns")
    rng = np.random.default_rng(seed)
    drawn = rng.choice(candidates, size=n_draw, replace=False, p=weights / weights.sum())
    return LineMask(
        width, tuple(fixed) + tuple(int(c) for c in drawn), frozenset(fixed), config.budget
    )


def _argmin_with_ties(
    candidates: Sequence[int], losses: Sequence[float], tie_tol: float
) -> tuple[int, float]:
    """Lowest-index candidate among those within tie_tol (relative) of the min."""
    losses = np.asarray(losses, dtype=float)
    lmin = losses.min()
    tied = [c for c, l in zip(candidates, losses) if l - lmin <= tie_tol * max(1.0, abs(lmin))]
    return min(tied), float(lmin)


@dataclass
class GreedyResult:
    mask: LineMask
    steps: list[tuple[int, float]]  # (accepted column, loss after acceptance)


def _greedy_core(
    width: int,
    loss_of_mask: Callable[[LineMask], float],
    config: OptimConfig,
) -> GreedyResult:
    fixed = central_lines(width, config.n_lowfreq)
    mask = LineMask(width, tuple(fixed), frozenset(fixed), config.budget)
    pool = list(config.candidate_set) if config.candidate_set is not None else list(range(width))
    steps: list[tuple[int, float]] = []
    while len(mask.lines) < config.budget:
        cands = [c for c in pool if c not in mask.lines]
        if not cands:
            raise InfeasibleConfigError(
                "greedy: candidate pool exhausted before reaching budget"
            )
        losses = [loss_of_mask(mask.add(c)) for c in cands]
        best, best_loss = _argmin_with_ties(cands, losses, config.tie_tol)
        mask = mask.add(best)
        steps.append((best, best_loss))
    return GreedyResult(mask, steps)


def greedy_optimize(
    scan: ScanBundle, recon: ReconParams, config: OptimConfig
) -> GreedyResult:
    """Grow a mask from the central block, adding the loss-minimizing line
    each step until the budget is reached."""
    if config.budget > scan.shape[1]:
        raise InvalidInputError("greedy_optimize: budget exceeds width")
    return _greedy_core(scan.shape[1], lambda m: scan_loss(scan, m, recon), config)


def population_greedy(
    dataset: Sequence[ScanBundle], recon: ReconParams, config: OptimConfig
) -> GreedyResult:
    """Greedy selection scoring each candidate by mean loss over all scans."""
    if not dataset:
        raise InvalidInputError("population_greedy: empty dataset")
    width = dataset[0].shape[1]

    def mean_loss(mask: LineMask) -> float:
        return float(np.mean([scan_loss(b, mask, recon) for b in dataset]))

    return _greedy_core(width, mean_loss, config)


@dataclass
class IcdResult:
    mask: LineMask
    # one record per line visit: (old column, new column, loss after the move)
    moves: list[tuple[int, int, float]]
    n_sweeps: int


def icd_optimize(
    scan: ScanBundle, mask0: LineMask, recon: ReconParams, config: OptimConfig
) -> IcdResult:
    """Iterative coordinate descent over mask lines.

    For each movable line, remove it and re-insert the loss-minimizing
    column (possibly the same one).  Runs up to n_icd_iters sweeps with
    early exit on a sweep that changes nothing.
    """
    if not mask0.complete:
        raise InvalidInputError("icd_optimize: initial mask is not complete")
    return _icd_core(mask0, lambda m: scan_loss(scan, m, recon), config)


def _icd_core(
    mask0: LineMask, loss_of_mask: Callable[[LineMask], float], config: OptimConfig
) -> IcdResult:
    width = mask0.width
    pool = set(config.candidate_set) if config.candidate_set is not None else set(range(width))
    mask = mask0
    moves: list[tuple[int, int, float]] = []
    sweeps = 0
    for _ in range(config.n_icd_iters):
        sweeps += 1
        changed = False
        snapshot = [
            c for c in mask.lines if not (config.freeze_lowfreq and c in mask.fixed)
        ]
        for line in snapshot:
            if line not in mask.lines:
                continue
            base = LineMask(
                width,
                tuple(c for c in mask.lines if c != line),
                mask.fixed - {line},
                mask.budget,
            )
            # the current column is always admissible so a sweep never
            # increases the loss
            cands = sorted((pool | {line}) - set(base.lines))
            losses = [loss_of_mask(base.add(c)) for c in cands]
            best, best_loss = _argmin_with_ties(cands, losses, config.tie_tol)
            # a relocated low-frequency line stops being "fixed"
            new_fixed = mask.fixed if best == line else (mask.fixed - {line})
            mask = LineMask(width, base.lines + (best,), new_fixed, mask.budget)
            moves.append((line, best, best_loss))
            if best != line:
                changed = True
        if not changed:
            break
    return IcdResult(mask, moves, sweeps)


@dataclass(frozen=True)
class TrainSchedule:
    optim: OptimConfig
    recon_kind: str = "zero-filled"
    grid: tuple[ReconParams, ...] | None = None
    density_power: float = 2.0
    seed: int = 0
    jobs: int = 1


@dataclass
class StageRecord:
    stage: str
    scan_id: str
    loss: float


@dataclass
class TrainResult:
    recon: ReconParams
    masks: list[LineMask]
    audit: list[StageRecord]

    def stage_means(self) -> dict[str, float]:
        stages: dict[str, list[float]] = {}
        for rec in self.audit:
            stages.setdefault(rec.stage, []).append(rec.loss)
        return {k: float(np.mean(v)) for k, v in stages.items()}


def _greedy_task(args) -> GreedyResult:
    scan, recon, config = args
    return greedy_optimize(scan, recon, config)


def _icd_task(args) -> IcdResult:
    scan, mask, recon, config = args
    return icd_optimize(scan, mask, recon, config)


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def alternate_train(dataset: Sequence[ScanBundle], schedule: TrainSchedule) -> TrainResult:
    """Alternate between per-scan mask search and reconstructor tuning.

    Stages: seeded VDRS masks -> tune -> per-scan greedy -> re-tune ->
    one ICD pass per scan -> final re-tune.  The audit log records the
    per-scan loss after every stage so monotone progress can be checked
    downstream.
    """
    dataset = list(dataset)
    if not dataset:
        raise InvalidInputError("alternate_train: empty dataset")
    config = schedule.optim
    width = dataset[0].shape[1]
    grid = list(schedule.grid) if schedule.grid is not None else default_grid(schedule.recon_kind)
    audit: list[StageRecord] = []

    def log(stage: str, masks: Sequence[LineMask], recon: ReconParams):
        for bundle, mask in zip(dataset, masks):
            audit.append(StageRecord(stage, bundle.scan_id, scan_loss(bundle, mask, recon)))

    # (1) per-scan seeded VDRS initialization
    vdrs_masks = [
        make_vdrs_mask(width, config, schedule.density_power, schedule.seed + 17 * i)
        for i in range(len(dataset))
    ]
    # (2) tune reconstructor on the VDRS pairs
    recon1 = tune_reconstructor(list(zip(dataset, vdrs_masks)), schedule.recon_kind, grid)
    log("vdrs", vdrs_masks, recon1)

    # (3) per-scan greedy with the tuned reconstructor
    greedy_results = _map_tasks(
        _greedy_task, [(b, recon1, config) for b in dataset], schedule.jobs
    )
    greedy_masks = [r.mask for r in greedy_results]
    log("greedy", greedy_masks, recon1)

    # (4) re-tune on the greedy pairs
    recon2 = tune_reconstructor(list(zip(dataset, greedy_masks)), schedule.recon_kind, grid)
    log("greedy-retuned", greedy_masks, recon2)

    # (5) one ICD pass per scan, reconstructor held fixed
    icd_results = _map_tasks(
        _icd_task,
        [(b, m, recon2, config) for b, m in zip(dataset, greedy_masks)],
        schedule.jobs,
    )
    icd_masks = [r.mask for r in icd_results]
    log("icd", icd_masks, recon2)

    # (6) final re-tune on the ICD pairs
    recon3 = tune_reconstructor(list(zip(dataset, icd_masks)), schedule.recon_kind, grid)
    log("icd-retuned", icd_masks, recon3)

    return TrainResult(recon3, icd_masks, audit)
