"""Spatial grids, dispersal kernels and the discrete nonlocal operators.

All three boundary regimes share one dense matrix form

    (A u)_i = sum_j w_j kappa(x_j - x_i) u_j + m_i u_i

where ``m_i = -1`` for the Dirichlet-type and periodic regimes and
``m_i = -sum_j w_j kappa(x_j - x_i)`` for the Neumann-type regime.  The
dispersal rate nu is applied by the caller.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from lvnonlocal.errors import ValidationError


class Regime(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "dirichlet": cls.DIRICHLET,
            "dirichlettype": cls.DIRICHLET,
            "neumann": cls.NEUMANN,
            "neumanntype": cls.NEUMANN,
            "periodic": cls.PERIODIC,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown regime {value!r}", key="regime") from None


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred grid on the box prod_k [-L_k/2, L_k/2].

    Nodes are flattened in C order (last axis fastest).  For the periodic
    regime the extents are the spatial periods of the coefficients.
    """

    dimension: int
    extents: tuple
    shape: tuple
    regime: Regime
    coords: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.extents, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    def index_grid(self) -> np.ndarray:
        """Integer multi-index of every node, shape (N, d)."""
        axes = [np.arange(n) for n in self.shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def displacement(self, i: int, j: int) -> np.ndarray:
        """Vector x_j - x_i, using the minimal periodic image when periodic."""
        d = self.coords[j] - self.coords[i]
        if self.regime is Regime.PERIODIC:
            ext = np.asarray(self.extents)
            d = d - ext * np.round(d / ext)
        return d

    def distance(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.displacement(i, j)))

    def boundary_distance(self) -> np.ndarray:
        """Distance of each node to the box boundary (inf when periodic)."""
        if self.regime is Regime.PERIODIC:
            return np.full(self.size, np.inf)
        half = 0.5 * np.asarray(self.extents)
        return np.min(half - np.abs(self.coords), axis=1)


def build_grid(dimension, extents, nodes_per_axis, regime) -> Grid:
    if dimension not in (1, 2):
        raise ValidationError(f"dimension must be 1 or 2, got {dimension}", key="dimension")
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    shape = tuple(int(n) for n in np.atleast_1d(nodes_per_axis))
    if len(extents) != dimension or len(shape) != dimension:
        raise ValidationError("extents and nodes_per_axis need one entry per axis", key="extents")
    if any(not math.isfinite(e) or e <= 0 for e in extents):
        raise ValidationError(f"extents must be positive, got {extents}", key="extents")
    if any(n < 3 for n in shape):
        # 3 is allowed so the minimal periodic example still builds
        raise ValidationError(f"need at least 3 nodes per axis, got {shape}", key="nodes")
    regime = Regime.parse(regime)

    axes = [-0.5 * L + (np.arange(n) + 0.5) * (L / n) for L, n in zip(extents, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    h = np.prod([L / n for L, n in zip(extents, shape)])
    weights = np.full(coords.shape[0], h)
    coords.setflags(write=False)
    weights.setflags(write=False)
    return Grid(dimension, extents, shape, regime, coords, weights)


def _smooth_bump(s):
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _cosine(s):
    return np.where(s < 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(s, 1.0))), 0.0)


PROFILES = {"smooth_bump": _smooth_bump, "cosine": _cosine}


@dataclass(frozen=True, eq=False)
class Kernel:
    """Compactly supported radial kernel sampled on the grid lattice.

    ``matrix[i, j]`` holds kappa(x_j - x_i) (summed over periodic images),
    already divided by ``normalization`` so that the lattice quadrature of
    kappa over the whole space is one.
    """

    grid: Grid
    radius: float
    profile: str
    normalization: float
    lattice_offsets: np.ndarray = field(repr=False)
    lattice_values: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)

    def __call__(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        s = np.linalg.norm(z, axis=-1) / self.radius
        return PROFILES[self.profile](s) / self.normalization

    @property
    def mass(self) -> float:
        return float(self.lattice_values.sum() * self.grid.cell_volume)

    @property
    def support_nodes(self) -> int:
        return int(self.lattice_values.size)


def _profile_on_offsets(profile, spacing, radius, offsets):
    z = offsets * np.asarray(spacing)
    s = np.sqrt(np.sum(z * z, axis=-1)) / radius
    return PROFILES[profile](s)


def build_kernel(grid: Grid, r: float, profile: str = "smooth_bump") -> Kernel:
    if profile not in PROFILES:
        raise ValidationError(f"unknown kernel profile {profile!r}", key="profile")
    r = float(r)
    if not (r > 0 and r < min(grid.extents)):
        raise ValidationError(
            f"kernel radius must lie in (0, {min(grid.extents)}), got {r}", key="radius")
    if r <= max(grid.spacing):
        raise ValidationError(
            f"kernel radius {r} does not exceed the grid spacing {max(grid.spacing)}; "
            "the discrete kernel would have no off-centre support", key="radius")

    reach = [int(math.ceil(r / h)) for h in grid.spacing]
    lattice = np.array(list(itertools.product(*[range(-k, k + 1) for k in reach])))
    raw = _profile_on_offsets(profile, grid.spacing, r, lattice)
    keep = raw > 0
    lattice, raw = lattice[keep], raw[keep]
    norm = float(raw.sum() * grid.cell_volume)
    values = raw / norm

    idx = grid.index_grid()
    diff = idx[None, :, :] - idx[:, None, :]  # j - i
    if grid.regime is Regime.PERIODIC:
        mat = np.zeros((grid.size, grid.size))
        images = [range(-(k // n) - 1, (k // n) + 2) for k, n in zip(reach, grid.shape)]
        for shift in itertools.product(*images):
            off = diff + np.asarray(shift) * np.asarray(grid.shape)
            mat += _profile_on_offsets(profile, grid.spacing, r, off)
    else:
        mat = _profile_on_offsets(profile, grid.spacing, r, diff)
    mat /= norm
    for a in (lattice, values, mat):
        a.setflags(write=False)
    return Kernel(grid, r, profile, norm, lattice, values, mat)


@dataclass(frozen=True, eq=False)
class DispersalOperator:
    """Dense nonlocal dispersal operator with unit rate.

    ``m`` is the diagonal field of the local part; ``kernel_mass`` is the
    discrete value of the integral of kappa(y - x) over the domain.
    """

    grid: Grid
    kernel: Kernel
    regime: Regime
    matrix: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    kernel_mass: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, u):
        """Apply to a field of shape (N,) or a stack (..., N)."""
        return np.asarray(u) @ self.matrix.T

    def generator(self, nu, l=None):
        """Matrix of nu * A + diag(l) for a time-independent l."""
        G = nu * self.matrix
        if l is not None:
            G = G + np.diag(np.broadcast_to(np.asarray(l, dtype=float), (self.size,)))
        return G


def assemble_dispersal(grid: Grid, kernel: Kernel, regime=None) -> DispersalOperator:
    regime = grid.regime if regime is None else Regime.parse(regime)
    if kernel.grid is not grid:
        raise ValidationError("kernel was built on a different grid", key="kernel")
    if regime is not grid.regime:
        raise ValidationError(
            f"grid regime {grid.regime.value} does not match requested {regime.value}",
            key="regime")
    K = kernel.matrix * grid.weights[None, :]
    mass = K.sum(axis=1)
    if regime is Regime.NEUMANN:
        m = -mass
    else:
        m = -np.ones(grid.size)
    A = K.copy()
    A[np.diag_indices_from(A)] += m
    if regime is not Regime.DIRICHLET:
        # constants lie in the kernel; fold the residual rounding into the diagonal
        A[np.diag_indices_from(A)] -= A.sum(axis=1)
    for a in (A, m, mass):
        a.setflags(write=False)
    return DispersalOperator(grid, kernel, regime, A, m, mass)
