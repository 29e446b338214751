"""Periodic grids, cell-averaged fields and the discrete operators shared by
the solver, the velocity catalogue and the transport engine.

The domain is the torus ``[-L/2, L/2)^d`` with ``d`` in ``{1, 2}``. Scalar
fields store one cell average per cell (array axis ``k`` is coordinate
``k``). Vector fields store, for every axis ``k``, the normal velocity on the
face between cell ``i`` and cell ``i + e_k``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from .errors import DimensionError, InvalidParameterError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "lq_norm",
    "weak_lp_quasinorm",
    "maximal_function",
    "default_radii",
    "apply_stencil",
    "laplacian",
    "upwind_divergence",
    "mollify",
    "bump_kernel",
    "coarsen",
    "block_average",
    "gaussian_density",
    "indicator_ball",
    "save_field",
    "load_field",
    "field_to_csv",
    "save_vector_field",
    "load_vector_field",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` cells per axis on a box of side ``L``."""

    dim: int
    n: int
    L: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DimensionError(f"dim must be 1 or 2, got {self.dim}")
        n = int(self.n)
        if n < 2 or n & (n - 1):
            raise InvalidParameterError(f"n must be a power of two >= 2, got {self.n}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise InvalidParameterError(f"side length L must be positive, got {self.L}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return self.L**self.dim

    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -0.5 * self.L + (np.arange(self.n) + 0.5) * self.h

    def centers(self) -> tuple:
        """Coordinate arrays (``indexing='ij'``) of all cell centers."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell centers as an ``(size, dim)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.centers()], axis=1)

    def face_centers(self, axis: int) -> tuple:
        """Coordinates of the faces carrying velocity component ``axis``."""
        c = list(self.centers())
        c[axis] = c[axis] + 0.5 * self.h
        return tuple(c)

    def wrap(self, x):
        """Map coordinates back into ``[-L/2, L/2)``."""
        return np.mod(np.asarray(x, dtype=float) + 0.5 * self.L, self.L) - 0.5 * self.L

    def periodic_offsets(self) -> np.ndarray:
        """Minimal-image displacement of every cell center from cell 0.

        Shape ``(dim,) + shape``; used to build convolution kernels.
        """
        idx = np.arange(self.n)
        d1 = np.where(idx <= self.n // 2, idx, idx - self.n) * self.h
        return np.stack(np.meshgrid(*([d1] * self.dim), indexing="ij"))

    def periodic_distance_from_origin(self) -> np.ndarray:
        return np.sqrt((self.periodic_offsets() ** 2).sum(axis=0))


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise DimensionError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell averages of a density on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size == self.grid.size:
                v = v.reshape(self.grid.shape)
            else:
                raise DimensionError(
                    f"values of shape {v.shape} do not conform to grid shape {self.grid.shape}"
                )
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, f) -> "ScalarField":
        """Sample ``f(*coords)`` at cell centers (midpoint quadrature)."""
        return cls(grid, np.broadcast_to(f(*grid.centers()), grid.shape))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def replace(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def shift(self, cells) -> "ScalarField":
        """Periodic shift by whole cells (one integer per axis)."""
        cells = np.atleast_1d(cells).astype(int)
        return self.replace(np.roll(self.values, tuple(cells), axis=tuple(range(self.grid.dim))))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _check_same_grid(self.grid, other.grid)
            return self.replace(self.values + other.values)
        return self.replace(self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            _check_same_grid(self.grid, other.grid)
            return self.replace(self.values - other.values)
        return self.replace(self.values - other)

    def __mul__(self, c):
        return self.replace(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.values)

    def __repr__(self):
        return f"ScalarField(grid={self.grid}, mass={self.mass():.6g})"


@dataclass(frozen=True, eq=False)
class VectorField:
    """Face-centered velocity: ``components[k][i]`` lives on the face between
    cell ``i`` and cell ``i + e_k``."""

    grid: Grid
    components: tuple = field(default=())

    def __post_init__(self):
        comps = tuple(np.array(c, dtype=float).reshape(self.grid.shape) for c in self.components)
        if len(comps) != self.grid.dim:
            raise DimensionError(
                f"expected {self.grid.dim} velocity components, got {len(comps)}"
            )
        for c in comps:
            if not np.all(np.isfinite(c)):
                raise InvalidParameterError("velocity components must be finite")
            c.flags.writeable = False
        object.__setattr__(self, "components", comps)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, tuple(np.zeros(grid.shape) for _ in range(grid.dim)))

    @classmethod
    def constant(cls, grid: Grid, c) -> "VectorField":
        c = np.broadcast_to(np.asarray(c, dtype=float), (grid.dim,))
        return cls(grid, tuple(np.full(grid.shape, ck) for ck in c))

    def cell_centered(self) -> np.ndarray:
        """Average of the two faces bounding each cell, shape ``(dim,) + shape``."""
        return np.stack(
            [0.5 * (c + np.roll(c, 1, axis=k)) for k, c in enumerate(self.components)]
        )

    def speed(self) -> np.ndarray:
        """Pointwise Euclidean norm of the cell-centered velocity."""
        return np.sqrt((self.cell_centered() ** 2).sum(axis=0))

    def max_abs(self) -> float:
        return float(max(np.abs(c).max() for c in self.components))

    def divergence(self) -> ScalarField:
        """Exact flux divergence of the face velocities."""
        h = self.grid.h
        div = sum((c - np.roll(c, 1, axis=k)) / h for k, c in enumerate(self.components))
        return ScalarField(self.grid, div)

    def _combine(self, other, op):
        if isinstance(other, VectorField):
            _check_same_grid(self.grid, other.grid)
            return VectorField(self.grid, tuple(op(a, b) for a, b in zip(self.components, other.components)))
        return VectorField(self.grid, tuple(op(a, other) for a in self.components))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return VectorField(self.grid, tuple(a * c for a in self.components))

    __rmul__ = __mul__

    def shift(self, cells) -> "VectorField":
        cells = tuple(np.atleast_1d(cells).astype(int))
        axes = tuple(range(self.grid.dim))
        return VectorField(self.grid, tuple(np.roll(c, cells, axis=axes) for c in self.components))


# --------------------------------------------------------------------------
# norms


def lq_norm(field: ScalarField, q: float) -> float:
    """Discrete ``L^q`` norm with midpoint quadrature; ``q = inf`` gives the max."""
    q = float(q)
    if not q >= 1:
        raise InvalidParameterError(f"q must be >= 1 or inf, got {q}")
    a = np.abs(field.values)
    if np.isinf(q):
        return float(a.max())
    if q == 1:
        return float(a.sum() * field.grid.cell_volume)
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * ((a / scale) ** q).sum() ** (1 / q) * field.grid.cell_volume ** (1 / q))


def weak_lp_quasinorm(field: ScalarField, p: float, strict: bool = False) -> float:
    """Weak Lebesgue quasi-norm ``sup_l (l^p |{|f| > l}|)^(1/p)``.

    With ``strict=False`` the supremum over ``l`` is approached from below
    each attained level, so level sets are ``{|f| >= l}``; this is the exact
    quasi-norm of the piecewise-constant field. ``strict=True`` evaluates
    ``{|f| > l}`` at the attained levels only, a lower bound that ignores the
    top cell of each level and tracks point samples of singular profiles
    more closely.
    """
    p = float(p)
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    a = np.sort(np.abs(field.values).ravel())
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    if np.isinf(p):
        return float(a[-1])
    first = np.searchsorted(a, a, side="right" if strict else "left")
    measure = (a.size - first) * field.grid.cell_volume
    return float(np.max(a * measure ** (1 / p)))


# --------------------------------------------------------------------------
# maximal function


def default_radii(grid: Grid) -> list:
    """Dyadic multiples of ``h`` up to ``L/2``, closed by the radius that
    covers the whole torus."""
    radii = []
    r = grid.h
    while r <= 0.5 * grid.L * (1 + 1e-12):
        radii.append(r)
        r *= 2
    full = 0.5 * grid.L * np.sqrt(grid.dim)
    if radii[-1] < full * (1 - 1e-12):
        radii.append(full)
    return radii


def _periodic_convolve(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular convolution; ``kernel`` is indexed by offset from cell 0."""
    axes = tuple(range(values.ndim))
    out = np.fft.irfftn(
        np.fft.rfftn(values, axes=axes) * np.fft.rfftn(kernel, axes=axes),
        s=values.shape,
        axes=axes,
    )
    return out


def maximal_function(field: ScalarField, radii=None) -> ScalarField:
    """Discrete Hardy-Littlewood maximal function.

    The supremum over ``R > 0`` is replaced by a maximum over the finite set
    ``radii``, so the result under-approximates the continuum operator. Balls
    contain every cell whose center lies within periodic distance ``R``.
    Balls smaller than a cell average to the cell value itself, so that
    value is always a candidate and ``Mf >= |f|`` holds cellwise.
    """
    grid = field.grid
    if radii is None:
        radii = default_radii(grid)
    radii = [float(r) for r in np.atleast_1d(radii)]
    if len(radii) == 0:
        raise InvalidParameterError("radii must be non-empty")
    if min(radii) < grid.h * (1 - 1e-12):
        raise InvalidParameterError(f"every radius must be >= h = {grid.h}")
    dist = grid.periodic_distance_from_origin()
    a = np.abs(field.values)
    best = a.copy()
    for r in radii:
        ball = (dist <= r * (1 + 1e-12)).astype(float)
        avg = _periodic_convolve(a, ball) / ball.sum()
        np.maximum(best, avg, out=best)
    return ScalarField(grid, best)


# --------------------------------------------------------------------------
# stencils


def _laplacian_values(v: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * v.ndim * v
    for k in range(v.ndim):
        out = out + np.roll(v, 1, axis=k) + np.roll(v, -1, axis=k)
    return out / h**2


def _upwind_divergence_values(v: np.ndarray, comps, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    for k, u in enumerate(comps):
        right = np.roll(v, -1, axis=k)
        flux = np.maximum(u, 0.0) * v + np.minimum(u, 0.0) * right
        out += flux - np.roll(flux, 1, axis=k)
    return out / h


def laplacian(field: ScalarField) -> ScalarField:
    """Three-point (per axis) periodic Laplacian."""
    return field.replace(_laplacian_values(field.values, field.grid.h))


def upwind_divergence(field: ScalarField, u: VectorField) -> ScalarField:
    """Flux-form divergence of ``u * field`` with first-order upwind faces."""
    _check_same_grid(field.grid, u.grid)
    return field.replace(_upwind_divergence_values(field.values, u.components, field.grid.h))


def apply_stencil(field: ScalarField, which: str, u: VectorField = None) -> ScalarField:
    """Apply ``"laplacian"`` or ``"upwind_divergence"`` (which needs ``u``)."""
    if which == "laplacian":
        return laplacian(field)
    if which == "upwind_divergence":
        if u is None:
            raise InvalidParameterError("upwind_divergence needs a velocity field")
        return upwind_divergence(field, u)
    raise InvalidParameterError(f"unknown stencil {which!r}")


def centered_gradient(values: np.ndarray, h: float) -> np.ndarray:
    """Centered differences along every axis, shape ``(dim,) + shape``."""
    return np.stack(
        [(np.roll(values, -1, axis=k) - np.roll(values, 1, axis=k)) / (2 * h) for k in range(values.ndim)]
    )


# --------------------------------------------------------------------------
# mollification and coarsening


def bump_kernel(grid: Grid, eps: float) -> np.ndarray:
    """Unit-sum samples of ``exp(-1 / (1 - (r/eps)^2))`` on periodic offsets."""
    r = grid.periodic_distance_from_origin() / eps
    k = np.zeros(grid.shape)
    inside = r < 1
    k[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return k / k.sum()


def mollify(field: ScalarField, eps: float) -> ScalarField:
    """Periodic convolution with a smooth compactly supported bump of radius ``eps``."""
    grid = field.grid
    if not eps >= grid.h * (1 - 1e-12):
        raise InvalidParameterError(f"eps must be >= h = {grid.h}, got {eps}")
    return field.replace(_periodic_convolve(field.values, bump_kernel(grid, eps)))


def coarsen(field: ScalarField, factor: int) -> ScalarField:
    """Block aggregation by ``factor`` cells per axis (mass preserving)."""
    grid = field.grid
    if factor < 1 or grid.n % factor:
        raise InvalidParameterError(f"factor {factor} must divide n = {grid.n}")
    m = grid.n // factor
    shape = []
    for _ in range(grid.dim):
        shape += [m, factor]
    v = field.values.reshape(shape).mean(axis=tuple(range(1, 2 * grid.dim, 2)))
    return ScalarField(Grid(grid.dim, m, grid.L), v)


def block_average(field: ScalarField, factor: int) -> ScalarField:
    """Piecewise-constant projection onto blocks of ``factor`` cells per axis,
    returned on the original grid."""
    coarse = coarsen(field, factor).values
    for k in range(field.grid.dim):
        coarse = np.repeat(coarse, factor, axis=k)
    return ScalarField(field.grid, coarse)


# --------------------------------------------------------------------------
# common profiles


def gaussian_density(grid: Grid, sigma: float, center=None, mass: float = 1.0, images: int = 2) -> ScalarField:
    """Exact cell averages of an isotropic Gaussian, wrapped periodically.

    ``images`` periodic copies on each side are summed, which is enough for
    any ``sigma`` well below ``L``.
    """
    if sigma <= 0:
        raise InvalidParameterError("sigma must be positive")
    center = np.zeros(grid.dim) if center is None else np.broadcast_to(np.asarray(center, float), (grid.dim,))
    h = grid.h
    edges = -0.5 * grid.L + np.arange(grid.n + 1) * h
    factors = []
    for k in range(grid.dim):
        avg = np.zeros(grid.n)
        for m in range(-images, images + 1):
            z = (edges - center[k] - m * grid.L) / (np.sqrt(2) * sigma)
            avg += 0.5 * np.diff(erf(z))
        factors.append(avg / h)
    v = factors[0]
    for f in factors[1:]:
        v = np.multiply.outer(v, f)
    return ScalarField(grid, mass * v)


def indicator_ball(grid: Grid, radius: float, center=None, value: float = 1.0) -> ScalarField:
    """``value`` on cells whose center is within ``radius`` of ``center``."""
    center = np.zeros(grid.dim) if center is None else np.broadcast_to(np.asarray(center, float), (grid.dim,))
    r2 = sum(grid.wrap(c - center[k]) ** 2 for k, c in enumerate(grid.centers()))
    return ScalarField(grid, np.where(r2 <= radius**2, float(value), 0.0))


# --------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct("<qqd")


def save_field(field: ScalarField, path) -> Path:
    """Binary container: little-endian ``(dim, n, L)`` then row-major float64."""
    path = Path(path)
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dim, g.n, g.L))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def load_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    dim, n, L = _HEADER.unpack_from(raw)
    grid = Grid(int(dim), int(n), float(L))
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if values.size != grid.size:
        raise DimensionError(f"{path}: expected {grid.size} values, found {values.size}")
    return ScalarField(grid, values.reshape(grid.shape))


def save_vector_field(u: VectorField, prefix) -> list:
    """One scalar container per component: ``<prefix>.u0.bin``, ``<prefix>.u1.bin``."""
    prefix = str(prefix)
    return [save_field(ScalarField(u.grid, c), f"{prefix}.u{k}.bin") for k, c in enumerate(u.components)]


def load_vector_field(prefix) -> VectorField:
    prefix = str(prefix)
    first = load_field(f"{prefix}.u0.bin")
    comps = [first.values]
    for k in range(1, first.grid.dim):
        comps.append(load_field(f"{prefix}.u{k}.bin").values)
    return VectorField(first.grid, tuple(comps))


def field_to_csv(field: ScalarField, path) -> Path:
    """Rows of ``index, x[, y], value`` for inspection."""
    path = Path(path)
    g = field.grid
    coords = [c.ravel() for c in g.centers()]
    names = ["x", "y"][: g.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *names, "value"])
        for i, v in enumerate(field.values.ravel()):
            w.writerow([i, *(repr(float(c[i])) for c in coords), repr(float(v))])
    return path
