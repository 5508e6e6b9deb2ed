"""Top-k masked feature propagation with an engine-routed sparse product.

Forward: X_l = A * (X_{l-1} masked to its top-k entries) * W, with the
sparse aggregation A * (masked X) computed by the multiply engine. Backward
treats the mask as a constant and returns mask * (A^T * dL/dX_l * W^T), so
gradients flow only through the selected entries. A finite-difference
harness checks the backward pass against a fixed quadratic loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CsrMatrix, csr_from_dense, transpose
from .engine import SpgemmConfig, spgemm
from .errors import DimensionMismatch, MismatchError, SpgemmKitError

__all__ = [
    "TopKMask",
    "topk_mask",
    "forward",
    "forward_with_mask",
    "backward",
    "gradient_check",
]

SCOPES = ("row", "global")


@dataclass(frozen=True)
class TopKMask:
    """Binary keep-mask over a feature matrix.

    With scope "row" every row holds exactly min(k, n_cols) ones; with scope
    "global" the mask holds min(n_rows * k, size) ones placed matrix-wide.
    """

    values: np.ndarray
    k: int
    scope: str = "row"

    def __post_init__(self) -> None:
        if self.scope not in SCOPES:
            raise SpgemmKitError(f"mask scope must be one of {SCOPES}, got {self.scope!r}")
        values = np.asarray(self.values, dtype=bool)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise SpgemmKitError("mask must be two-dimensional")
        if self.scope == "row":
            want = min(self.k, values.shape[1])
            rowsums = values.sum(axis=1)
            if values.size and not (rowsums == want).all():
                raise SpgemmKitError(
                    f"row-scoped mask must hold exactly {want} ones per row")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _as_dense(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def topk_mask(x, k: int, scope: str = "row") -> TopKMask:
    """Mark each row's k largest entries (ties keep the smaller column).
    Scope "global" instead marks the n_rows*k largest entries matrix-wide,
    ties by row-major position."""
    x = _as_dense(x, "features")
    if k < 1:
        raise SpgemmKitError(f"k must be >= 1, got {k}")
    if scope not in SCOPES:
        raise SpgemmKitError(f"mask scope must be one of {SCOPES}, got {scope!r}")
    n, f = x.shape
    mask = np.zeros((n, f), dtype=bool)
    if scope == "row":
        kk = min(k, f)
        picked = np.argsort(-x, axis=1, kind="stable")[:, :kk]
        mask[np.arange(n)[:, None], picked] = True
    else:
        budget = min(n * k, x.size)
        flat = np.argsort(-x.ravel(), kind="stable")[:budget]
        mask.ravel()[flat] = True
    return TopKMask(values=mask, k=k, scope=scope)


def _check_shapes(a: CsrMatrix, x: np.ndarray, w: np.ndarray) -> None:
    if a.n_cols != x.shape[0]:
        raise DimensionMismatch(
            f"aggregation is {a.n_rows}x{a.n_cols} but features have {x.shape[0]} rows")
    if x.shape[1] != w.shape[0]:
        raise DimensionMismatch(
            f"features have {x.shape[1]} columns but weights have {w.shape[0]} rows")


def forward_with_mask(a: CsrMatrix, x_prev, w, mask: TopKMask,
                      config: SpgemmConfig | None = None) -> np.ndarray:
    """Forward pass with a caller-supplied (fixed) mask."""
    x_prev = _as_dense(x_prev, "features")
    w = _as_dense(w, "weights")
    _check_shapes(a, x_prev, w)
    if mask.shape != x_prev.shape:
        raise DimensionMismatch(
            f"mask shape {mask.shape} does not match features {x_prev.shape}")
    masked = np.where(mask.values, x_prev, 0.0)
    # Selected entries stay structural even when their value is exactly 0.
    masked_csr = csr_from_dense(masked, keep=mask.values)
    ax, _ = spgemm(a, masked_csr, config)
    return ax.to_dense() @ w


def forward(a: CsrMatrix, x_prev, w, k: int, scope: str = "row",
            config: SpgemmConfig | None = None) -> tuple[np.ndarray, TopKMask]:
    """Compute X_l = A * (top-k masked X_prev) * W; returns the new features
    and the mask for reuse in the backward pass."""
    x_prev = _as_dense(x_prev, "features")
    mask = topk_mask(x_prev, k, scope)
    return forward_with_mask(a, x_prev, w, mask, config), mask


def backward(a: CsrMatrix, dl_dxl, w, mask: TopKMask,
             config: SpgemmConfig | None = None) -> np.ndarray:
    """Gradient of the forward pass w.r.t. the pre-mask features:
    mask * (A^T * dL/dX_l * W^T), with the transpose product routed through
    the engine. Exactly zero wherever the mask is zero."""
    dl_dxl = _as_dense(dl_dxl, "upstream gradient")
    w = _as_dense(w, "weights")
    if a.n_rows != dl_dxl.shape[0]:
        raise DimensionMismatch(
            f"aggregation is {a.n_rows}x{a.n_cols} but the upstream gradient "
            f"has {dl_dxl.shape[0]} rows")
    if dl_dxl.shape[1] != w.shape[1]:
        raise DimensionMismatch(
            f"upstream gradient has {dl_dxl.shape[1]} columns but weights have "
            f"{w.shape[1]}")
    if mask.shape != (a.n_cols, w.shape[0]):
        raise DimensionMismatch(
            f"mask shape {mask.shape} does not match ({a.n_cols}, {w.shape[0]})")
    at = transpose(a)
    grad_csr, _ = spgemm(at, csr_from_dense(dl_dxl), config)
    grad = grad_csr.to_dense() @ w.T
    return np.where(mask.values, grad, 0.0)


def gradient_check(a: CsrMatrix, x_prev, w, k: int, step: float = 1e-6,
                   scope: str = "row",
                   config: SpgemmConfig | None = None) -> float:
    """Central-difference check of the backward pass under the fixed
    quadratic loss L = 0.5 * sum(X_l**2), holding the mask fixed.

    Returns the maximum relative error over masked coordinates and raises if
    the analytic gradient is nonzero anywhere the mask is zero.
    """
    if step <= 0:
        raise SpgemmKitError(f"step must be > 0, got {step}")
    x_prev = _as_dense(x_prev, "features")
    w = _as_dense(w, "weights")
    x_l, mask = forward(a, x_prev, w, k, scope, config)
    grad = backward(a, x_l, w, mask, config)

    off_mask = grad[~mask.values]
    if off_mask.size and float(np.abs(off_mask).max()) != 0.0:
        raise MismatchError("analytic gradient leaked outside the mask",
                            expected=0.0, actual=float(np.abs(off_mask).max()))

    def loss(x: np.ndarray) -> float:
        out = forward_with_mask(a, x, w, mask, config)
        return 0.5 * float(np.sum(out * out))

    worst = 0.0
    for i, j in np.argwhere(mask.values):
        bumped = x_prev.copy()
        bumped[i, j] = x_prev[i, j] + step
        up = loss(bumped)
        bumped[i, j] = x_prev[i, j] - step
        down = loss(bumped)
        fd = (up - down) / (2.0 * step)
        g = float(grad[i, j])
        # Relative with a unit absolute floor (the package-wide verification
        # scale): near-zero gradients are judged by absolute difference, so
        # the cancellation noise of the loss does not swamp the ratio.
        rel = abs(fd - g) / max(abs(fd), abs(g), 1.0)
        worst = max(worst, rel)
    return worst
