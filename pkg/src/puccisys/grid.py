"""Uniform box grids on [-R, R]^N and fields sampled on them.

Second derivatives use the standard 3-point stencil on the diagonal and
the 4-point cross stencil off the diagonal; both are exact on quadratics.
The cross stencil is not monotone, so only N = 1 gives a monotone scheme
for the Pucci operators.
"""
from __future__ import annotations

import csv
import struct
from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateRatio, InvalidArgument

BOUNDARY_KINDS = ("dirichlet-zero", "frozen")
MAX_NODES = 20_000_000

_MAGIC = b"GFLD"
_HEADER = struct.Struct("<4siid B")

RatioResult = namedtuple("RatioResult", "value floor count")


@dataclass(frozen=True)
class Grid:
    dim: int
    radius: float
    points_per_axis: int

    def __post_init__(self):
        if not 1 <= self.dim <= 3:
            raise InvalidArgument(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.radius <= 0:
            raise InvalidArgument(f"radius must be positive, got {self.radius}")
        M = self.points_per_axis
        if M < 3 or M % 2 == 0:
            raise InvalidArgument(f"points_per_axis must be odd and >= 3, got {M}")
        if M**self.dim > MAX_NODES:
            raise InvalidArgument(f"{M}^{self.dim} nodes exceeds the memory budget")

    @classmethod
    def from_spacing(cls, dim, radius, h):
        """Grid with spacing as close to ``h`` as an odd node count allows."""
        M = int(round(2 * radius / h)) + 1
        if M % 2 == 0:
            M += 1
        return cls(dim, float(radius), M)

    @property
    def h(self):
        return 2.0 * self.radius / (self.points_per_axis - 1)

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def size(self):
        return self.points_per_axis**self.dim

    @cached_property
    def axis(self):
        return np.linspace(-self.radius, self.radius, self.points_per_axis)

    @cached_property
    def coords(self):
        """Array of shape ``(N, M, ..., M)`` with node coordinates."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def r2(self):
        return np.sum(self.coords**2, axis=0)

    @property
    def interior(self):
        return (slice(1, -1),) * self.dim

    @cached_property
    def boundary_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        return mask

    @property
    def origin(self):
        return (self.points_per_axis // 2,) * self.dim

    def sample(self, func, boundary="dirichlet-zero"):
        """Sample ``func(coords)`` where ``coords`` has shape ``(N, M, ..., M)``."""
        vals = np.asarray(func(self.coords), dtype=float)
        vals = np.broadcast_to(vals, self.shape).copy()
        return GridField(self, vals, boundary).with_boundary()


@dataclass(frozen=True, eq=False)
class GridField:
    grid: Grid
    values: np.ndarray
    boundary: str = "dirichlet-zero"

    def __post_init__(self):
        if self.boundary not in BOUNDARY_KINDS:
            raise InvalidArgument(f"unknown boundary kind {self.boundary!r}")
        if self.values.shape != self.grid.shape:
            raise InvalidArgument(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @property
    def flat(self):
        return self.values.ravel()

    def replace(self, values):
        return GridField(self.grid, values, self.boundary)

    def with_boundary(self, reference=None):
        """Apply the boundary rule; ``frozen`` copies boundary values from ``reference``."""
        if self.boundary == "dirichlet-zero":
            vals = self.values.copy()
            vals[self.grid.boundary_mask] = 0.0
            return self.replace(vals)
        if reference is None:
            return self
        vals = self.values.copy()
        vals[self.grid.boundary_mask] = reference.values[self.grid.boundary_mask]
        return self.replace(vals)

    def __add__(self, other):
        other = other.values if isinstance(other, GridField) else other
        return self.replace(self.values + other)

    def __sub__(self, other):
        other = other.values if isinstance(other, GridField) else other
        return self.replace(self.values - other)

    def __mul__(self, c):
        return self.replace(self.values * c)

    __rmul__ = __mul__

    # -- serialization ------------------------------------------------------

    def to_csv(self, path):
        g = self.grid
        names = [f"x{k + 1}" for k in range(g.dim)]
        pts = g.coords.reshape(g.dim, -1)
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# gridfield v1 dim={g.dim} M={g.points_per_axis} "
                f"R={g.radius!r} boundary={self.boundary}\n"
            )
            w = csv.writer(fh)
            w.writerow(names + ["value"])
            for row in zip(*pts, self.flat):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            meta = dict(tok.split("=", 1) for tok in fh.readline().split()[3:])
            rows = list(csv.reader(fh))[1:]
        grid = Grid(int(meta["dim"]), float(meta["R"]), int(meta["M"]))
        vals = np.array([float(r[-1]) for r in rows]).reshape(grid.shape)
        return cls(grid, vals, meta["boundary"])

    def to_bytes(self):
        g = self.grid
        code = BOUNDARY_KINDS.index(self.boundary)
        head = _HEADER.pack(_MAGIC, g.dim, g.points_per_axis, g.radius, code)
        return head + self.flat.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        magic, dim, M, R, code = _HEADER.unpack_from(data)
        if magic != _MAGIC:
            raise InvalidArgument("not a gridfield binary dump")
        grid = Grid(dim, R, M)
        vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
        return cls(grid, vals.reshape(grid.shape), BOUNDARY_KINDS[code])

    def to_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# -- stencils ---------------------------------------------------------------


def _shift(values, offsets):
    """View of ``values`` on the interior, shifted by the integer offset vector."""
    idx = tuple(slice(1 + o, values.shape[k] - 1 + o or None) for k, o in enumerate(offsets))
    return values[idx]


def hessian_field(values, h):
    """Discrete Hessians at all interior nodes, shape ``interior + (N, N)``."""
    n = values.ndim
    center = _shift(values, (0,) * n)
    H = np.empty(center.shape + (n, n))
    h2 = h * h
    for j in range(n):
        e = [0] * n
        e[j] = 1
        plus = _shift(values, e)
        e[j] = -1
        minus = _shift(values, e)
        H[..., j, j] = (plus - 2.0 * center + minus) / h2
        for k in range(j + 1, n):
            def s(a, b):
                o = [0] * n
                o[j], o[k] = a, b
                return _shift(values, o)

            cross = (s(1, 1) + s(-1, -1) - s(1, -1) - s(-1, 1)) / (4.0 * h2)
            H[..., j, k] = cross
            H[..., k, j] = cross
    return H


def _check_interior(grid, node):
    node = tuple(int(i) for i in node)
    if len(node) != grid.dim:
        raise InvalidArgument(f"node {node} has wrong dimension for a {grid.dim}-d grid")
    if any(i < 1 or i > grid.points_per_axis - 2 for i in node):
        raise InvalidArgument(f"node {node} is not an interior node")
    return node


def hessian_at(f, node):
    """Discrete Hessian of field ``f`` at an interior multi-index."""
    node = _check_interior(f.grid, node)
    patch = f.values[tuple(slice(i - 1, i + 2) for i in node)]
    return hessian_field(patch, f.grid.h).reshape(f.grid.dim, f.grid.dim)


def upwind_drift_field(values, h, drift):
    """``drift . Dv`` at interior nodes with one-sided differences.

    Forward differences where a drift component is positive and backward
    ones where it is negative, so that ``v + dt * upwind_drift_field(...)``
    is a monotone update for ``dt * |drift_k| / h <= 1``. ``drift`` has shape
    ``(N,) + interior``.
    """
    n = values.ndim
    center = _shift(values, (0,) * n)
    out = np.zeros(center.shape)
    for k in range(n):
        e = [0] * n
        e[k] = 1
        fwd = (_shift(values, e) - center) / h
        e[k] = -1
        bwd = (center - _shift(values, e)) / h
        d = drift[k]
        out += np.where(d > 0, d * fwd, d * bwd)
    return out


def gradient_upwind_at(f, node, drift):
    """Upwinded ``drift . Df`` at one interior node (``drift`` is a length-N vector)."""
    node = _check_interior(f.grid, node)
    patch = f.values[tuple(slice(i - 1, i + 2) for i in node)]
    d = np.asarray(drift, dtype=float).reshape((f.grid.dim,) + (1,) * f.grid.dim)
    return float(upwind_drift_field(patch, f.grid.h, d).ravel()[0])


# -- norms ------------------------------------------------------------------


def sup_norm(f):
    vals = f.values if isinstance(f, GridField) else np.asarray(f)
    return float(np.max(np.abs(vals)))


def sup_ratio(f, g, floor=1e-12):
    """``max f/g`` over nodes where ``g >= floor``.

    Returns ``RatioResult(value, floor, count)`` with ``count`` the number of
    nodes that survived the floor.
    """
    fv = f.values if isinstance(f, GridField) else np.asarray(f)
    gv = g.values if isinstance(g, GridField) else np.asarray(g)
    if floor <= 0:
        raise InvalidArgument("floor must be positive")
    mask = gv >= floor
    if not mask.any():
        raise DegenerateRatio(f"no nodes with denominator >= {floor}")
    return RatioResult(float(np.max(fv[mask] / gv[mask])), floor, int(mask.sum()))
