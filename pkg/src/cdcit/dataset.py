"""Row-major (X, Y, Z) sample container and its CSV form.

CSV schema: required header naming columns ``x0..``, ``y0..``, ``z0..``
(any column order, contiguous numbering per role); all values numeric.
Discrete variables are pre-encoded as +/-1. A dataset may have zero Y
columns (unlabeled (X, Z) sets used for sampler training).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParseError, ShapeError

CONTINUOUS = "continuous"
DISCRETE = "discrete"

_COLUMN_RE = re.compile(r"^([xyz])(\d+)$")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable-by-convention sample table with typed column blocks."""

    x_block: np.ndarray
    y_block: np.ndarray
    z_block: np.ndarray
    z_roles: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name in ("x_block", "y_block", "z_block"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
            object.__setattr__(self, name, arr)
        n = self.x_block.shape[0]
        if self.y_block.shape[0] != n or self.z_block.shape[0] != n:
            raise ShapeError(
                "blocks disagree on row count: "
                f"x={self.x_block.shape[0]} y={self.y_block.shape[0]} z={self.z_block.shape[0]}"
            )
        for name in ("x_block", "y_block", "z_block"):
            if not np.isfinite(getattr(self, name)).all():
                raise InputError(f"{name} contains non-finite entries")
        roles = tuple(self.z_roles) or (CONTINUOUS,) * self.d_z
        if len(roles) != self.d_z:
            raise ShapeError(f"z_roles length {len(roles)} != d_z {self.d_z}")
        if any(r not in (CONTINUOUS, DISCRETE) for r in roles):
            raise InputError(f"unknown column role in {roles}")
        object.__setattr__(self, "z_roles", roles)

    @property
    def n(self) -> int:
        return self.x_block.shape[0]

    @property
    def d_x(self) -> int:
        return self.x_block.shape[1]

    @property
    def d_y(self) -> int:
        return self.y_block.shape[1]

    @property
    def d_z(self) -> int:
        return self.z_block.shape[1]

    def take(self, rows) -> "Dataset":
        """Sub-dataset at the given row indices, order preserved."""
        idx = np.asarray(rows, dtype=np.intp)
        return Dataset(self.x_block[idx], self.y_block[idx], self.z_block[idx], self.z_roles)

    def with_x(self, x_block: np.ndarray) -> "Dataset":
        """Same Y and Z arrays (shared, not copied) with a replaced X block."""
        x = np.asarray(x_block, dtype=np.float64)
        if x.shape != self.x_block.shape:
            raise ShapeError(f"replacement X shape {x.shape} != {self.x_block.shape}")
        return Dataset(x, self.y_block, self.z_block, self.z_roles)

    def without_y(self) -> "Dataset":
        """(X, Z) view with an empty Y block, for sampler training."""
        return Dataset(self.x_block, np.empty((self.n, 0)), self.z_block, self.z_roles)

    def features(self) -> np.ndarray:
        """Per-row concatenation (x, y, z), shape (n, d_x + d_y + d_z)."""
        return np.concatenate([self.x_block, self.y_block, self.z_block], axis=1)


def _split_header(header: list[str], path: str) -> tuple[list[int], list[int], list[int]]:
    slots: dict[str, dict[int, int]] = {"x": {}, "y": {}, "z": {}}
    for col, name in enumerate(header):
        m = _COLUMN_RE.match(name.strip())
        if m is None:
            raise ParseError(f"{path}:1: column {col + 1} has invalid name {name!r} "
                             "(expected x<i>, y<i> or z<i>)")
        role, num = m.group(1), int(m.group(2))
        if num in slots[role]:
            raise ParseError(f"{path}:1: duplicate column {name!r}")
        slots[role][num] = col
    out = []
    for role in "xyz":
        nums = sorted(slots[role])
        if nums != list(range(len(nums))):
            raise ParseError(f"{path}:1: {role} columns must be numbered 0..{len(nums) - 1}")
        out.append([slots[role][i] for i in nums])
    return out[0], out[1], out[2]


def read_csv(path) -> Dataset:
    """Load a dataset; raises ParseError with file and line on bad input."""
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty file (header row required)")
    header = lines[0].split(",")
    if any(_COLUMN_RE.match(c.strip()) is None for c in header):
        raise ParseError(f"{path}:1: missing or invalid header row")
    x_cols, y_cols, z_cols = _split_header(header, path)
    if not x_cols or not z_cols:
        raise ParseError(f"{path}:1: need at least one x column and one z column")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}:2: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(table).all():
        raise InputError(f"{path}: non-finite values in data")
    return Dataset(table[:, x_cols], table[:, y_cols], table[:, z_cols])


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset using the x0../y0../z0.. header schema."""
    header = (
        [f"x{i}" for i in range(dataset.d_x)]
        + [f"y{i}" for i in range(dataset.d_y)]
        + [f"z{i}" for i in range(dataset.d_z)]
    )
    table = dataset.features()
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
