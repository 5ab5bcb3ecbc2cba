"""1-nearest-neighbor conditional resampling.

For each row of a query set, the Y value of the reference row whose Z is
closest in squared Euclidean distance is adopted, producing negative
samples that approximate p(x, z) p(y|z). Fully deterministic: ties break
toward the smallest reference row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import InputError, ShapeError

_CHUNK_ROWS = 256


@dataclass(frozen=True, eq=False)
class NeighborIndex:
    """Brute-force squared-l2 index over reference z rows."""

    reference: np.ndarray

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64)
        if ref.ndim != 2:
            raise ShapeError(f"reference must be 2-D, got ndim={ref.ndim}")
        if ref.shape[0] == 0:
            raise InputError("reference set is empty")
        object.__setattr__(self, "reference", ref)

    def query_many(self, z_rows: np.ndarray) -> np.ndarray:
        """Index of the nearest reference row for each query row."""
        z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
        if z_rows.shape[1] != self.reference.shape[1]:
            raise ShapeError(
                f"query width {z_rows.shape[1]} != reference width {self.reference.shape[1]}"
            )
        out = np.empty(z_rows.shape[0], dtype=np.intp)
        for lo in range(0, z_rows.shape[0], _CHUNK_ROWS):
            block = z_rows[lo:lo + _CHUNK_ROWS]
            diff = block[:, None, :] - self.reference[None, :, :]
            dist = np.einsum("qrd,qrd->qr", diff, diff)
            out[lo:lo + block.shape[0]] = np.argmin(dist, axis=1)
        return out

    def query(self, z: np.ndarray) -> int:
        return int(self.query_many(np.asarray(z, dtype=np.float64)[None, :])[0])


def one_nn_resample(v1: Dataset, v2: Dataset) -> Dataset:
    """Replace each Y in v2 by the Y of v1's nearest-Z row.

    Output keeps v2's X and Z blocks (shared arrays) and row order.
    """
    if v1.n == 0:
        raise InputError("reference dataset v1 is empty")
    if (v1.d_x, v1.d_y, v1.d_z) != (v2.d_x, v2.d_y, v2.d_z):
        raise ShapeError(
            f"dimension mismatch: v1 has ({v1.d_x},{v1.d_y},{v1.d_z}), "
            f"v2 has ({v2.d_x},{v2.d_y},{v2.d_z})"
        )
    idx = NeighborIndex(v1.z_block).query_many(v2.z_block)
    return Dataset(v2.x_block, v1.y_block[idx], v2.z_block, v2.z_roles)
