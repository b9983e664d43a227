"""Centered Fourier transforms, line masks, and the multi-coil MRI operators.

Conventions
-----------
Images are complex ``(H, W)`` arrays, multi-coil k-space is ``(Nc, H, W)``,
coil sensitivity maps are ``(Nc, H, W)``.  The DC frequency sits at index
``(H // 2, W // 2)`` and the DFT is unitary (``norm="ortho"``), so with
root-sum-of-squares normalized maps the fully sampled normal operator is the
identity on the coil support.

Sampling masks select whole k-space columns (phase encodes along the width
axis), which is the Cartesian line-undersampling setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidInputError

_AXES = (-2, -1)


def fft2c(img: np.ndarray) -> np.ndarray:
    """Unitary centered 2-D FFT over the last two axes."""
    if img.shape[-1] == 0 or img.shape[-2] == 0:
        raise InvalidInputError("fft2c: zero-sized image")
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(img, axes=_AXES), norm="ortho", axes=_AXES),
        axes=_AXES,
    )


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    if ksp.shape[-1] == 0 or ksp.shape[-2] == 0:
        raise InvalidInputError("ifft2c: zero-sized input")
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(ksp, axes=_AXES), norm="ortho", axes=_AXES),
        axes=_AXES,
    )


@dataclass(frozen=True)
class LineMask:
    """A budgeted set of sampled phase-encode columns.

    ``lines`` is the sorted tuple of sampled column indices, ``fixed`` the
    frozen low-frequency subset that search algorithms must not move, and
    ``budget`` the total number of lines the mask may hold.  A mask is
    "complete" when ``len(lines) == budget``.
    """

    width: int
    lines: tuple[int, ...]
    fixed: frozenset[int] = field(default_factory=frozenset)
    budget: int = 0

    def __post_init__(self):
        lines = tuple(sorted(int(c) for c in self.lines))
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "fixed", frozenset(int(c) for c in self.fixed))
        if len(set(lines)) != len(lines):
            raise InvalidInputError("LineMask: duplicate columns")
        if lines and (lines[0] < 0 or lines[-1] >= self.width):
            raise InvalidInputError("LineMask: column out of range")
        if not self.fixed <= set(lines):
            raise InvalidInputError("LineMask: fixed block not a subset of lines")
        if len(lines) > self.budget:
            raise InvalidInputError(
                f"LineMask: {len(lines)} lines exceed budget {self.budget}"
            )

    @property
    def complete(self) -> bool:
        return len(self.lines) == self.budget

    def as_array(self) -> np.ndarray:
        """Boolean (width,) indicator of sampled columns."""
        arr = np.zeros(self.width, dtype=bool)
        arr[list(self.lines)] = True
        return arr

    def add(self, col: int) -> "LineMask":
        return LineMask(self.width, self.lines + (col,), self.fixed, self.budget)

    def remove(self, col: int) -> "LineMask":
        if col in self.fixed:
            raise InvalidInputError(f"LineMask: column {col} is frozen")
        return LineMask(
            self.width,
            tuple(c for c in self.lines if c != col),
            self.fixed,
            self.budget,
        )

    def replace(self, old: int, new: int) -> "LineMask":
        return self.remove(old).add(new)

    @classmethod
    def full(cls, width: int) -> "LineMask":
        return cls(width, tuple(range(width)), frozenset(), width)

    def to_json_dict(self) -> dict:
        return {
            "width": self.width,
            "budget": self.budget,
            "fixed": sorted(self.fixed),
            "lines": list(self.lines),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LineMask":
        return cls(
            int(d["width"]),
            tuple(d["lines"]),
            frozenset(d["fixed"]),
            int(d["budget"]),
        )


def apply_mask(ksp: np.ndarray, mask: LineMask) -> np.ndarray:
    """Zero out all k-space columns not present in the mask."""
    if ksp.shape[-1] != mask.width:
        raise DimensionError(
            f"apply_mask: k-space width {ksp.shape[-1]} != mask width {mask.width}"
        )
    return ksp * mask.as_array()


def forward(x: np.ndarray, smaps: np.ndarray, mask: LineMask) -> np.ndarray:
    """Masked multi-coil measurement: per coil, mask(fft2c(S_c * x))."""
    if x.shape != smaps.shape[1:]:
        raise DimensionError(f"forward: image {x.shape} vs maps {smaps.shape}")
    return apply_mask(fft2c(smaps * x[None]), mask)


def adjoint(y: np.ndarray, smaps: np.ndarray, mask: LineMask) -> np.ndarray:
    """Adjoint of :func:`forward`: sum_c conj(S_c) * ifft2c(mask(y_c))."""
    if y.shape != smaps.shape:
        raise DimensionError(f"adjoint: k-space {y.shape} vs maps {smaps.shape}")
    return np.sum(np.conj(smaps) * ifft2c(apply_mask(y, mask)), axis=0)
