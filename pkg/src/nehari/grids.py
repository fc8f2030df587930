"""Radial and box grids with trapezoidal quadrature and a matching stiffness form.

The discrete Dirichlet form is assembled edge by edge (cell-midpoint
differences), and the node-wise negative Laplacian is defined as the
quadrature-weighted gradient of half that form.  This keeps the discrete
energy and its gradient exactly consistent, which the descent and the
finite-difference checks rely on.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn, idstn
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import splu, cg, LinearOperator


class GridMismatch(ValueError):
    pass


def sphere_area(N: int) -> float:
    """omega_{N-1} = 2 pi^{N/2} / Gamma(N/2); equals 2 for N = 1."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True)
class RadialGrid:
    N: int
    r_max: float
    m: int

    def __post_init__(self):
        if self.m < 4 or not self.r_max > 0:
            raise ValueError("radial grid needs m >= 4 nodes and r_max > 0")

    @classmethod
    def from_spacing(cls, N: int, r_max: float, h: float) -> "RadialGrid":
        return cls(N, float(r_max), int(round(r_max / h)) + 1)

    kind = "radial"

    @property
    def h(self) -> float:
        return self.r_max / (self.m - 1)

    @property
    def shape(self):
        return (self.m,)

    @property
    def spacing(self) -> float:
        return self.h

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.m) * self.h

    def radius(self) -> np.ndarray:
        return self.nodes

    @cached_property
    def weights(self) -> np.ndarray:
        h, N = self.h, self.N
        om = sphere_area(N)
        w = om * self.nodes ** (N - 1) * h
        w[-1] *= 0.5
        # origin node carries the ball of radius h/2 (equals the trapezoid end weight for N = 1)
        w[0] = om * (h / 2) ** N / N
        return w

    @cached_property
    def edge_coeff(self) -> np.ndarray:
        mid = (np.arange(self.m - 1) + 0.5) * self.h
        return sphere_area(self.N) * mid ** (self.N - 1) / self.h

    @cached_property
    def free(self) -> np.ndarray:
        f = np.ones(self.m, dtype=bool)
        f[-1] = False
        return f

    def kinetic(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.edge_coeff * np.diff(u) * np.diff(v)))

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        c = self.edge_coeff
        flux = c * np.diff(u)
        out = np.zeros_like(u)
        out[:-1] -= flux
        out[1:] += flux
        out /= self.weights
        out[~self.free] = 0.0
        return out

    def metric_solver(self, shift) -> "_RadialSolver":
        return _RadialSolver(self, np.broadcast_to(np.asarray(shift, float), self.shape))

    def shell_mask(self, frac: float = 0.9) -> np.ndarray:
        return self.nodes > frac * self.r_max

    def sample_radial(self, r, values, center=None) -> np.ndarray:
        if center is not None and np.any(np.asarray(center) != 0):
            raise ValueError("radial grids only hold fields centred at the origin")
        out = np.interp(self.nodes, r, values, right=0.0)
        out[~self.free] = 0.0
        return out

    def coords(self):
        return [self.nodes]

    def describe(self) -> dict:
        return {"kind": "radial", "N": self.N, "r_max": self.r_max, "m": self.m, "h": self.h}


class _RadialSolver:
    """Solves (S + W diag(shift)) d = W g on the free nodes (SPD tridiagonal)."""

    def __init__(self, grid: RadialGrid, shift: np.ndarray):
        self.grid = grid
        f = grid.free
        c = grid.edge_coeff
        n = int(f.sum())
        diag = np.zeros(grid.m)
        diag[:-1] += c
        diag[1:] += c
        diag = diag + grid.weights * shift
        ab = np.zeros((2, n))
        ab[1] = diag[f]
        ab[0, 1:] = -c[: n - 1]
        self.ab = ab

    def solve(self, g: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = np.zeros(grid.m)
        out[grid.free] = solveh_banded(self.ab, (grid.weights * g)[grid.free])
        return out


@dataclass(frozen=True)
class BoxGrid:
    N: int
    half_width: float
    n: int
    center: tuple = field(default=None)

    kind = "box"

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise ValueError("box grids support N in {1, 2, 3}")
        if self.n < 4:
            raise ValueError("box grid needs at least 4 nodes per axis")
        if self.n ** self.N > 2e7:
            raise ValueError("box grid too large for desk-scale runs")
        c = (0.0,) * self.N if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != self.N:
            raise ValueError("center must have N components")
        object.__setattr__(self, "center", c)

    @classmethod
    def from_spacing(cls, N: int, half_width: float, h: float, center=None) -> "BoxGrid":
        return cls(N, float(half_width), int(round(2 * half_width / h)) + 1, center)

    @property
    def h(self) -> float:
        return 2 * self.half_width / (self.n - 1)

    spacing = h

    @property
    def shape(self):
        return (self.n,) * self.N

    @cached_property
    def axes(self):
        base = -self.half_width + np.arange(self.n) * self.h
        return [c + base for c in self.center]

    @cached_property
    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def coords(self):
        return self.mesh

    @cached_property
    def _radius(self) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.mesh))

    def radius(self) -> np.ndarray:
        return self._radius

    @cached_property
    def weights(self) -> np.ndarray:
        w1 = np.full(self.n, self.h)
        w1[0] = w1[-1] = self.h / 2
        w = w1
        for _ in range(self.N - 1):
            w = np.multiply.outer(w, w1)
        return w

    @cached_property
    def free(self) -> np.ndarray:
        f = np.zeros(self.shape, dtype=bool)
        f[(slice(1, -1),) * self.N] = True
        return f

    def kinetic(self, u: np.ndarray, v: np.ndarray) -> float:
        tot = 0.0
        for ax in range(self.N):
            tot += float(np.sum(np.diff(u, axis=ax) * np.diff(v, axis=ax)))
        return tot * self.h ** (self.N - 2)

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        inner = (slice(1, -1),) * self.N
        acc = 2 * self.N * u[inner]
        for ax in range(self.N):
            lo = list(inner)
            hi = list(inner)
            lo[ax] = slice(0, -2)
            hi[ax] = slice(2, None)
            acc = acc - u[tuple(lo)] - u[tuple(hi)]
        out[inner] = acc / self.h ** 2
        return out

    @cached_property
    def _dst_eigs(self) -> np.ndarray:
        k = np.arange(1, self.n - 1)
        e1 = (2 - 2 * np.cos(np.pi * k / (self.n - 1))) / self.h ** 2
        e = e1
        for _ in range(self.N - 1):
            e = np.add.outer(e, e1)
        return e

    @cached_property
    def _laplacian_matrix(self):
        n = self.n - 2
        T = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / self.h ** 2
        eye = sp.identity(n)
        A = None
        for ax in range(self.N):
            mats = [eye] * self.N
            mats[ax] = T
            K = mats[0]
            for M in mats[1:]:
                K = sp.kron(K, M)
            A = K if A is None else A + K
        return A.tocsc()

    def metric_solver(self, shift) -> "_BoxSolver":
        return _BoxSolver(self, np.broadcast_to(np.asarray(shift, float), self.shape))

    def shell_mask(self, frac: float = 0.9) -> np.ndarray:
        d = np.zeros(self.shape)
        for x, c in zip(self.mesh, self.center):
            d = np.maximum(d, np.abs(x - c))
        return d > frac * self.half_width

    def sample_radial(self, r, values, center=None) -> np.ndarray:
        y = np.zeros(self.N) if center is None else np.asarray(center, float)
        if y.shape != (self.N,):
            raise ValueError("center must have N components")
        dist = np.sqrt(sum((x - c) ** 2 for x, c in zip(self.mesh, y)))
        out = np.interp(dist, r, values, right=0.0)
        out[~self.free] = 0.0
        return out

    def describe(self) -> dict:
        return {"kind": "box", "N": self.N, "half_width": self.half_width, "n": self.n,
                "h": self.h, "center": list(self.center)}


class _BoxSolver:
    """Solves (-Lap_h + shift) d = g with zero Dirichlet data.

    Constant shift: exact sine transform.  Variable shift: sparse LU for
    N <= 2, sine-transform preconditioned CG for N = 3.
    """

    def __init__(self, grid: BoxGrid, shift: np.ndarray):
        self.grid = grid
        inner = (slice(1, -1),) * grid.N
        s = np.ascontiguousarray(shift[inner])
        self.inner = inner
        self.const = bool(np.all(s == s.flat[0]))
        if self.const:
            self.denom = grid._dst_eigs + s.flat[0]
            return
        self.shape_in = s.shape
        A = grid._laplacian_matrix + sp.diags(s.ravel())
        if grid.N <= 2:
            self.lu = splu(A.tocsc())
        else:
            self.A = A.tocsr()
            denom = grid._dst_eigs + float(s.min())
            self.M = LinearOperator(A.shape, matvec=lambda x: idstn(
                dstn(x.reshape(self.shape_in), type=1) / denom, type=1).ravel())
            self.lu = None

    def solve(self, g: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        rhs = g[self.inner]
        if self.const:
            out[self.inner] = idstn(dstn(rhs, type=1) / self.denom, type=1)
        elif self.lu is not None:
            out[self.inner] = self.lu.solve(np.ascontiguousarray(rhs).ravel()).reshape(rhs.shape)
        else:
            x, _ = cg(self.A, rhs.ravel(), M=self.M, rtol=1e-12, maxiter=500)
            out[self.inner] = x.reshape(rhs.shape)
        return out


class Field:
    """Values of a real function on the nodes of a grid (zero on Dirichlet nodes)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise GridMismatch(f"values of shape {values.shape} do not fit grid shape {grid.shape}")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid, f) -> "Field":
        vals = np.asarray(f(*grid.coords()), dtype=float) * grid.free
        return cls(grid, vals)

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def abs(self) -> "Field":
        return Field(self.grid, np.abs(self.values))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def to_csv(self, path) -> None:
        write_field_csv(self, path)


def _values(f, grid=None):
    if isinstance(f, Field):
        if grid is not None and f.grid != grid:
            raise GridMismatch("fields live on different grids")
        return f.grid, f.values
    return grid, np.asarray(f, dtype=float)


def integrate(f, grid=None) -> float:
    """Trapezoidal integral of a field, or of a callable evaluated on the grid nodes."""
    if callable(f) and not isinstance(f, Field):
        if grid is None:
            raise ValueError("a grid is required to integrate a callable")
        vals = np.asarray(f(*grid.coords()), dtype=float)
        return float(np.sum(grid.weights * vals))
    grid, vals = _values(f, grid)
    if grid is None:
        raise ValueError("a grid is required to integrate raw values")
    if vals.shape != grid.shape:
        raise GridMismatch("values do not fit the grid")
    return float(np.sum(grid.weights * vals))


def h1_products(u: Field, v: Field) -> tuple[float, float]:
    """(int grad u . grad v, int u v)."""
    u._check(v)
    g = u.grid
    return g.kinetic(u.values, v.values), float(np.sum(g.weights * u.values * v.values))


def h1_norm_sq(u: Field, a_inf: float) -> float:
    d, l2 = h1_products(u, u)
    return d + a_inf * l2


def lp_norm(u: Field, s: float) -> float:
    if not s >= 1 or math.isinf(s):
        raise ValueError("lp_norm needs finite s >= 1")
    return float(np.sum(u.grid.weights * np.abs(u.values) ** s)) ** (1.0 / s)


def write_field_csv(u: Field, path) -> None:
    coords = [c.ravel() for c in u.grid.coords()]
    names = ["r"] if u.grid.kind == "radial" else ["x", "y", "z"][: u.grid.N]
    vals = u.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", *names, "value"])
        for i in range(vals.size):
            w.writerow([i, *(repr(float(c[i])) for c in coords), repr(float(vals[i]))])


def read_field_csv(path, grid) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    vals = np.array([float(r[-1]) for r in rows]).reshape(grid.shape)
    return Field(grid, vals)
