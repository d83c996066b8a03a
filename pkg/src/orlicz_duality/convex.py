"""Brute-force convex analysis on 1-D grids.

Every operation here is an exact finite computation over grid points, so the
results serve as an oracle for the closed-form and optimization routes used
elsewhere.  Discretization error against a continuous target is of order of
the grid spacing and is reported by the comparison helpers.

Extended reals use ``numpy.inf``.  Sums follow inf + finite = inf and any
attempt at inf - inf raises.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomain, ImproperFunction


class Convexity(str, enum.Enum):
    CONVEX = "convex"
    CONCAVE = "concave"


def ext_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Extended-real addition; raises on inf + (-inf)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if np.any(np.isinf(a) & np.isinf(b) & (np.sign(a) != np.sign(b))):
        raise ArithmeticError("inf - inf is undefined")
    return a + b


@dataclass(frozen=True)
class GridFunction:
    """Sampled function on a strictly increasing grid.

    For a convex function the infinite value is +inf, for a concave one
    -inf.  ``check`` verifies the second-difference sign of the finite run
    (set it to False for deliberately non-convex samples).
    """

    grid: np.ndarray
    values: np.ndarray
    convexity: Convexity = Convexity.CONVEX
    check: bool = True

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be 1-D of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "convexity", Convexity(self.convexity))
        bad = -np.inf if self.convexity is Convexity.CONVEX else np.inf
        if np.any(v == bad) or np.any(np.isnan(v)):
            raise ValueError("improper value for this convexity convention")
        finite = np.isfinite(v)
        if not finite.any():
            raise ImproperFunction("all values are infinite")
        if self.check:
            if finite.sum() < 3:
                raise ValueError("need at least 3 finite values")
            if not self._consistent():
                raise ValueError(f"values are not {self.convexity.value} on the grid")

    def _consistent(self, rtol: float = 1e-9) -> bool:
        fin = np.nonzero(np.isfinite(self.values))[0]
        if np.any(np.diff(fin) != 1):
            return False
        x, y = self.grid[fin], self.values[fin]
        slopes = np.diff(y) / np.diff(x)
        ds = np.diff(slopes)
        tol = rtol * (1.0 + np.abs(slopes[1:]) + np.abs(slopes[:-1]))
        return bool(np.all(ds >= -tol)) if self.convexity is Convexity.CONVEX else bool(np.all(ds <= tol))

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.grid)))

    @classmethod
    def sample(cls, f, grid, convexity=Convexity.CONVEX, check=True) -> "GridFunction":
        grid = np.asarray(grid, dtype=float)
        with np.errstate(all="ignore"):
            vals = np.asarray(f(grid), dtype=float)
        return cls(grid, vals, convexity, check)


def grid_conjugate(f: GridFunction, dual_grid) -> GridFunction:
    """Exact extremum of x y - f(x) over grid points, for each dual point.

    Convex input gives the convex conjugate sup_x {x y - f(x)}; concave input
    the concave conjugate inf_x {x y - f(x)}.
    """
    y = np.asarray(dual_grid, dtype=float)
    fin = f.finite
    if not fin.any():
        raise ImproperFunction("all values are infinite")
    x, fx = f.grid[fin], f.values[fin]
    vals = np.empty_like(y)
    # chunk to bound memory on large grids
    step = max(1, 4_000_000 // max(len(x), 1))
    for s in range(0, len(y), step):
        block = np.outer(y[s : s + step], x) - fx[None, :]
        vals[s : s + step] = block.max(axis=1) if f.convexity is Convexity.CONVEX else block.min(axis=1)
    return GridFunction(y, vals, f.convexity, check=False)


def _lower_hull(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Monotone chain lower convex hull of points sorted by x."""
    hx: list[float] = []
    hy: list[float] = []
    for xi, yi in zip(x, y):
        while len(hx) >= 2 and (hx[-1] - hx[-2]) * (yi - hy[-2]) - (hy[-1] - hy[-2]) * (xi - hx[-2]) <= 0:
            hx.pop()
            hy.pop()
        hx.append(xi)
        hy.append(yi)
    return np.array(hx), np.array(hy)


def closed_hull(f: GridFunction) -> GridFunction:
    """Closed convex (concave) envelope of the finite graph points.

    Outside the hull of the effective domain the value stays infinite.  On
    a grid this is the closure (lsc hull for convex, usc hull for concave)
    combined with convexification; for convex input it returns ``f``.
    """
    fin = f.finite
    x, y = f.grid[fin], f.values[fin]
    sign = 1.0 if f.convexity is Convexity.CONVEX else -1.0
    hx, hy = _lower_hull(x, sign * y)
    out = np.full_like(f.values, sign * np.inf)
    inside = (f.grid >= hx[0]) & (f.grid <= hx[-1])
    out[inside] = sign * np.interp(f.grid[inside], hx, hy)
    # keep exact sample values where they already lie on the hull
    on_hull = inside & fin & np.isclose(out, f.values, rtol=0, atol=0)
    out[on_hull] = f.values[on_hull]
    return GridFunction(f.grid, out, f.convexity, check=False)


lsc_hull = closed_hull


def default_dual_grid(f: GridFunction, n: int | None = None) -> np.ndarray:
    """Uniform grid over the range of chord slopes of the finite run."""
    fin = np.nonzero(f.finite)[0]
    x, y = f.grid[fin], f.values[fin]
    slopes = np.diff(y) / np.diff(x)
    lo, hi = float(slopes.min()), float(slopes.max())
    if hi - lo < 1e-9 * (1 + abs(lo)):
        # affine up to rounding
        return np.array([float(np.median(slopes))])
    return np.linspace(lo, hi, n or len(f.grid))


def biconjugate(f: GridFunction, dual_grid=None) -> GridFunction:
    dual = default_dual_grid(f) if dual_grid is None else np.asarray(dual_grid, float)
    fstar = grid_conjugate(f, dual)
    back = grid_conjugate(fstar, f.grid)
    return back


def biconjugate_check(f: GridFunction, dual_grid=None) -> float:
    """max |f** - f| over interior grid points where f is finite."""
    ff = biconjugate(f, dual_grid)
    fin = np.nonzero(f.finite)[0]
    interior = fin[1:-1] if len(fin) > 2 else fin
    return float(np.max(np.abs(ff.values[interior] - f.values[interior])))


def inf_convolution(f: GridFunction, g: GridFunction) -> GridFunction:
    """Exact grid infimal (supremal for concave) convolution.

    Both grids must be uniform with a shared spacing; the result lives on
    the Minkowski-sum grid of length len(f) + len(g) - 1.
    """
    if f.convexity is not g.convexity:
        raise ValueError("convolution needs matching convexity conventions")
    hf, hg = np.diff(f.grid), np.diff(g.grid)
    h = hf[0]
    if not (np.allclose(hf, h, rtol=1e-9, atol=0) and np.allclose(hg, h, rtol=1e-9, atol=0)):
        raise ValueError("grids must be uniform with a shared spacing")
    nf, ng = len(f.grid), len(g.grid)
    grid = f.grid[0] + g.grid[0] + h * np.arange(nf + ng - 1)
    convex = f.convexity is Convexity.CONVEX
    fill = np.inf if convex else -np.inf
    out = np.full(nf + ng - 1, fill)
    for j in range(ng):
        gj = g.values[j]
        if not np.isfinite(gj):
            continue
        cand = f.values + gj
        seg = out[j : j + nf]
        out[j : j + nf] = np.minimum(seg, cand) if convex else np.maximum(seg, cand)
    if not np.isfinite(out).any():
        raise EmptyDomain("convolution is identically infinite")
    return GridFunction(grid, out, f.convexity, check=False)


def conjugate_of_convolution_gap(f: GridFunction, g: GridFunction, dual_grid) -> float:
    """max |(f conv g)* - (f* + g*)| on ``dual_grid`` over points where both are finite."""
    lhs = grid_conjugate(inf_convolution(f, g), dual_grid).values
    rhs = ext_add(grid_conjugate(f, dual_grid).values, grid_conjugate(g, dual_grid).values)
    both = np.isfinite(lhs) & np.isfinite(rhs)
    if np.any(np.isfinite(lhs) != np.isfinite(rhs)):
        return float("inf")
    return float(np.max(np.abs(lhs[both] - rhs[both]))) if both.any() else 0.0
