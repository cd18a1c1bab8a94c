"""Domains, cell-centered grids, grid functions and discrete norms.

Grid functions live on interior cell centers only; the extension by zero
outside the domain is implicit everywhere in the package.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ProblemParams:
    """Exponents and parameter of the concave-convex critical problem."""

    n: int
    s: float
    p: float
    q: float
    lam: float = 0.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not 1.0 < self.q < self.p:
            raise ValueError(f"need 1 < q < p, got q={self.q}, p={self.p}")
        if not self.n > self.s * self.p:
            raise ValueError(f"need n > s*p, got n={self.n}, s*p={self.s * self.p}")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def p_star(self) -> float:
        return self.n * self.p / (self.n - self.s * self.p)

    def with_lambda(self, lam: float) -> "ProblemParams":
        return ProblemParams(self.n, self.s, self.p, self.q, lam)


@dataclass(frozen=True)
class Domain:
    """Interval ``(a, b)`` or axis-aligned rectangle ``(a, b) x (c, d)``."""

    bounds: tuple
    origin_interior: bool = False

    def __post_init__(self):
        b = tuple(tuple(float(v) for v in pair) for pair in self.bounds)
        if len(b) not in (1, 2):
            raise ValueError("only intervals and rectangles are supported")
        for lo, hi in b:
            if not hi > lo:
                raise ValueError(f"degenerate domain side ({lo}, {hi})")
        object.__setattr__(self, "bounds", b)
        if self.origin_interior and not all(lo < 0.0 < hi for lo, hi in b):
            raise ValueError("origin_interior set but 0 is not inside the domain")

    @classmethod
    def interval(cls, a: float, b: float, origin_interior: bool = False) -> "Domain":
        return cls(((a, b),), origin_interior)

    @classmethod
    def rectangle(cls, a, b, c, d, origin_interior: bool = False) -> "Domain":
        return cls(((a, b), (c, d)), origin_interior)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return math.prod(hi - lo for lo, hi in self.bounds)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds))

    def distance_to_boundary(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = np.full(pts.shape[0], np.inf)
        for k, (lo, hi) in enumerate(self.bounds):
            d = np.minimum(d, np.minimum(pts[:, k] - lo, hi - pts[:, k]))
        return d

    def to_dict(self) -> dict:
        kind = "interval" if self.dim == 1 else "rectangle"
        return {"kind": kind, "bounds": [list(b) for b in self.bounds],
                "origin_interior": self.origin_interior}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(tuple(tuple(b) for b in d["bounds"]), bool(d.get("origin_interior", False)))


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    N: int
    h: float
    nodes: np.ndarray = field(repr=False)
    d_omega: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.nodes**2, axis=1))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size))

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.size, float(c)))

    def function(self, f) -> "GridFunction":
        """Sample ``f(x)`` at the nodes; ``x`` has shape (size, n)."""
        return GridFunction(self, np.asarray(f(self.nodes), dtype=float).reshape(self.size))

    def manifest(self) -> dict:
        return {"domain": self.domain.to_dict(), "N": self.N, "h": self.h}


def build_grid(domain: Domain, N: int) -> Grid:
    """Uniform cell-centered grid with ``N`` cells per axis.

    The spacing is set by the first axis; rectangles need sides that are
    integer multiples of it.
    """
    if N < 4:
        raise ValueError(f"need N >= 4, got {N}")
    a0, b0 = domain.bounds[0]
    h = (b0 - a0) / N
    axes = []
    for lo, hi in domain.bounds:
        m = (hi - lo) / h
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ValueError("rectangle sides must be integer multiples of the spacing")
        m = int(round(m))
        axes.append(lo + (np.arange(m) + 0.5) * h)
    if len(axes) == 1:
        nodes = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
    d = domain.distance_to_boundary(nodes)
    w = np.full(nodes.shape[0], h**domain.dim)
    for arr in (nodes, d, w):
        arr.setflags(write=False)
    return Grid(domain, N, h, nodes, d, w)


class GridFunction:
    """Nodal values on a grid; zero outside the domain by convention."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid is not self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def positive_part(self) -> "GridFunction":
        return GridFunction(self.grid, np.maximum(self.values, 0.0))

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def __repr__(self):
        return f"GridFunction(size={self.grid.size}, max={self.values.max():.6g})"


def lr_norm(u: GridFunction, r: float) -> float:
    """Discrete L^r norm ``(sum_i w_i |u_i|^r)^(1/r)``."""
    if r < 1:
        raise ValueError(f"L^r norm needs r >= 1, got {r}")
    return float(np.sum(u.grid.weights * np.abs(u.values) ** r) ** (1.0 / r))


def lr_power(u: GridFunction, r: float, positive: bool = False) -> float:
    """``sum_i w_i |u_i|^r`` (or of ``u^+`` when ``positive``)."""
    v = np.maximum(u.values, 0.0) if positive else np.abs(u.values)
    return float(np.sum(u.grid.weights * v**r))


def cs0_norm(u: GridFunction, s: float) -> float:
    """Weighted sup-norm ``max |u| / d^s``."""
    return float(np.max(np.abs(u.values) / u.grid.d_omega**s))


def write_csv(u: GridFunction, path=None) -> str:
    """Serialize as ``x[,y],value`` rows in node order, 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["x", "y"][: u.grid.n] + ["value"]
    writer.writerow(cols)
    for x, v in zip(u.grid.nodes, u.values):
        writer.writerow([f"{c:.17g}" for c in x] + [f"{v:.17g}"])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
        Path(path).with_suffix(".json").write_text(json.dumps(u.grid.manifest(), indent=2) + "\n")
    return text


def read_csv(path, grid: Grid | None = None) -> GridFunction:
    path = Path(path)
    if grid is None:
        man = json.loads(path.with_suffix(".json").read_text())
        grid = build_grid(Domain.from_dict(man["domain"]), man["N"])
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if rows[0][-1] != "value" or len(rows[0]) != grid.n + 1:
        raise ValueError(f"unexpected CSV header {rows[0]}")
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    if data.shape[0] != grid.size or not np.allclose(data[:, :-1], grid.nodes, atol=1e-12):
        raise ValueError("CSV nodes do not match the grid")
    return GridFunction(grid, data[:, -1])
