"""Maximal monotone graphs on R and their resolvent / Yosida calculus.

A graph is stored in a canonical piecewise-affine form:

  * ``breakpoints``  strictly increasing abscissae b_0 < ... < b_{K-1}
  * ``jumps``        value interval [lo_i, hi_i] at each breakpoint (lo <= hi)
  * ``slopes``       affine slope on each segment (b_i, b_{i+1}), >= 0
  * ``tail_slopes``  affine slopes on (-inf, b_0) and (b_{K-1}, +inf), >= 0

Values chain continuously between jumps: the segment right of b_i starts at
hi_i and must reach lo_{i+1} at b_{i+1}, so vertical jumps exactly fill the
gaps and the graph is maximal monotone.  Every graph must contain (0, 0).

The resolvent (id + lam*theta)^(-1) is single-valued, nonexpansive and has a
closed form on each affine piece; the Yosida transform
theta_lam = (id - resolvent)/lam is the (1/lam)-Lipschitz single-valued
approximation used by the regularization pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Chaining / containment slack for graph validation.
_CHAIN_TOL = 1e-9

# ---------------------------------------------------------------------------
# Mollifier kernel: the standard C-infinity bump on (-1, 1), sampled at the
# midpoints of 16 equal subintervals and normalized so the discrete weights
# sum to exactly 1 (constants are then reproduced exactly).
# ---------------------------------------------------------------------------

_N_KERNEL = 16


def mollifier_nodes():
    """Return (nodes, weights) of the fixed 16-point midpoint kernel rule."""
    h = 2.0 / _N_KERNEL
    nodes = -1.0 + (np.arange(_N_KERNEL) + 0.5) * h
    raw = np.exp(-1.0 / (1.0 - nodes**2))
    weights = raw / raw.sum()
    return nodes, weights


# ---------------------------------------------------------------------------
# MonotoneGraph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotoneGraph:
    """Canonical piecewise-affine maximal monotone graph with 0 in theta(0)."""

    breakpoints: np.ndarray  # (K,)
    jumps: np.ndarray        # (K, 2) value intervals [lo, hi]
    slopes: np.ndarray       # (K-1,) interior segment slopes
    tail_slopes: tuple       # (left, right)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", np.asarray(self.breakpoints, dtype=float))
        object.__setattr__(self, "jumps", np.asarray(self.jumps, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=float))
        object.__setattr__(self, "tail_slopes", (float(self.tail_slopes[0]), float(self.tail_slopes[1])))
        self.validate()

    # -- validation --------------------------------------------------------

    def validate(self):
        b, j, s = self.breakpoints, self.jumps, self.slopes
        K = len(b)
        if j.shape != (K, 2):
            raise ValueError("jumps must have one [lo, hi] pair per breakpoint")
        if len(s) != max(K - 1, 0):
            raise ValueError("need one slope per interior segment")
        if K == 0:
            if self.tail_slopes[0] != self.tail_slopes[1]:
                raise ValueError("a graph without breakpoints is a single line; tail slopes must agree")
        if K and np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(j[:, 1] < j[:, 0]):
            raise ValueError("jump intervals need lo <= hi")
        if np.any(s < 0) or min(self.tail_slopes) < 0:
            raise ValueError("monotonicity requires nonnegative slopes")
        # segments must land exactly on the next jump's lower end (no holes)
        if K >= 2:
            landing = j[:-1, 1] + s * np.diff(b)
            if np.any(np.abs(landing - j[1:, 0]) > _CHAIN_TOL * np.maximum(1.0, np.abs(landing))):
                raise ValueError("segment values do not chain with the jump intervals")
        lo, hi = self.value_interval(0.0)
        if lo > _CHAIN_TOL or hi < -_CHAIN_TOL:
            raise ValueError("graph must contain (0, 0)")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def line(slope):
        """theta(u) = slope * u."""
        if slope < 0:
            raise ValueError("slope must be nonnegative")
        return MonotoneGraph(np.empty(0), np.empty((0, 2)), np.empty(0), (slope, slope))

    @staticmethod
    def identity():
        return MonotoneGraph.line(1.0)

    @staticmethod
    def sign(height=1.0, tail_slope=0.0):
        """The sign graph: jump [-height, height] at 0, flat tails by default."""
        return MonotoneGraph([0.0], [[-height, height]], [], (tail_slope, tail_slope))

    @staticmethod
    def sign_plus_identity(height=1.0):
        """theta(u) = u + height * Sgn(u); strictly increasing with one jump."""
        return MonotoneGraph([0.0], [[-height, height]], [], (1.0, 1.0))

    @staticmethod
    def from_knots(knots, tail_slopes):
        """Build a jump-free graph through (u, v) knots with affine pieces."""
        knots = np.asarray(knots, dtype=float)
        b = knots[:, 0]
        v = knots[:, 1]
        slopes = np.diff(v) / np.diff(b)
        jumps = np.stack([v, v], axis=1)
        return MonotoneGraph(b, jumps, slopes, tail_slopes)

    # -- evaluation ----------------------------------------------------------

    def value_interval(self, u):
        """Value set at scalar u as a closed interval (lo, hi)."""
        lo, hi = self.eval(np.asarray([u], dtype=float))
        return float(lo[0]), float(hi[0])

    def eval(self, u):
        """Vectorized value set: returns (lo, hi) arrays; lo == hi off jumps."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        b, j, s = self.breakpoints, self.jumps, self.slopes
        K = len(b)
        if K == 0:
            v = self.tail_slopes[0] * u
            return v, v.copy()
        idx = np.searchsorted(b, u, side="left")
        lo = np.empty_like(u)
        hi = np.empty_like(u)
        at_bp = (idx < K) & (u == b[np.minimum(idx, K - 1)])
        lo[at_bp] = j[idx[at_bp], 0]
        hi[at_bp] = j[idx[at_bp], 1]
        off = ~at_bp
        i = idx[off]
        uo = u[off]
        val = np.empty_like(uo)
        left = i == 0
        val[left] = j[0, 0] + self.tail_slopes[0] * (uo[left] - b[0])
        right = i == K
        val[right] = j[K - 1, 1] + self.tail_slopes[1] * (uo[right] - b[K - 1])
        mid = ~(left | right)
        im = i[mid] - 1
        val[mid] = j[im, 1] + s[im] * (uo[mid] - b[im])
        lo[off] = val
        hi[off] = val
        return lo, hi

    def minimal_selection(self, u):
        """Element of least modulus in theta(u) (vectorized)."""
        lo, hi = self.eval(u)
        out = np.where(lo > 0.0, lo, np.where(hi < 0.0, hi, 0.0))
        return float(out[0]) if np.ndim(u) == 0 else out

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "jumps": self.jumps.tolist(),
            "tail_slopes": list(self.tail_slopes),
        }

    @staticmethod
    def from_dict(d):
        return MonotoneGraph(d["breakpoints"], d["jumps"], d["slopes"], tuple(d["tail_slopes"]))

    def scaled(self, c):
        """Graph of u -> c * theta(u) for c > 0 (values scaled, abscissae kept)."""
        if c <= 0:
            raise ValueError("coefficient must be positive")
        g = MonotoneGraph.__new__(MonotoneGraph)
        object.__setattr__(g, "breakpoints", self.breakpoints)
        object.__setattr__(g, "jumps", self.jumps * c)
        object.__setattr__(g, "slopes", self.slopes * c)
        object.__setattr__(g, "tail_slopes", (self.tail_slopes[0] * c, self.tail_slopes[1] * c))
        return g


# ---------------------------------------------------------------------------
# Resolvent and Yosida transform
# ---------------------------------------------------------------------------


def resolvent(graph, lam, w):
    """Solve w in u + lam*theta(u): closed form on each affine piece.

    Vectorized over w; nonexpansive in w for every lam > 0.
    """
    if lam <= 0:
        raise ValueError("resolvent needs lam > 0")
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    b, j, s = graph.breakpoints, graph.jumps, graph.slopes
    K = len(b)
    if K == 0:
        u = w / (1.0 + lam * graph.tail_slopes[0])
        return float(u[0]) if scalar else u
    # images of the breakpoints under u + lam*theta(u)
    w_lo = b + lam * j[:, 0]
    w_hi = b + lam * j[:, 1]
    edges = np.empty(2 * K)
    edges[0::2] = w_lo
    edges[1::2] = w_hi
    pos = np.searchsorted(edges, w, side="right")
    u = np.empty_like(w)

    on_jump = pos % 2 == 1
    u[on_jump] = b[(pos[on_jump] - 1) // 2]

    seg = ~on_jump
    i = pos[seg] // 2 - 1  # segment index; -1 = left tail, K-1 = right tail
    ws = w[seg]
    us = np.empty_like(ws)
    left = i < 0
    us[left] = b[0] + (ws[left] - w_lo[0]) / (1.0 + lam * graph.tail_slopes[0])
    right = i == K - 1
    us[right] = b[K - 1] + (ws[right] - w_hi[K - 1]) / (1.0 + lam * graph.tail_slopes[1])
    mid = ~(left | right)
    im = i[mid]
    us[mid] = b[im] + (ws[mid] - w_hi[im]) / (1.0 + lam * s[im])
    u[seg] = us
    return float(u[0]) if scalar else u


def resolvent_bisect(graph, lam, w, tol=1e-12):
    """Bisection fallback/oracle for the resolvent (scalar w)."""
    w = float(w)
    lo, hi = w - 1.0, w + 1.0

    def above(u):
        vlo, vhi = graph.value_interval(u)
        return u + lam * vlo > w

    def below(u):
        vlo, vhi = graph.value_interval(u)
        return u + lam * vhi < w

    while below(hi):
        hi += max(1.0, abs(hi))
    while above(lo):
        lo -= max(1.0, abs(lo))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if above(mid):
            hi = mid
        elif below(mid):
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def yosida(graph, lam, w):
    """Yosida approximation theta_lam(w) = (w - resolvent(w)) / lam."""
    r = resolvent(graph, lam, w)
    return (np.asarray(w, dtype=float) - r) / lam if np.ndim(w) else (float(w) - r) / lam


# ---------------------------------------------------------------------------
# Graph inversion
# ---------------------------------------------------------------------------


def invert_graph(graph):
    """Swap the roles of u and v: jumps become plateaus and vice versa.

    Requires strictly positive tail slopes so the inverse is defined on all
    of R.  Zero-slope interior segments are allowed and become jumps.
    """
    tl, tr = graph.tail_slopes
    if tl <= 0 or tr <= 0:
        raise ValueError("inverse over all of R needs positive tail slopes")
    b, j, s = graph.breakpoints, graph.jumps, graph.slopes
    K = len(b)
    if K == 0:
        return MonotoneGraph.line(1.0 / tl)
    # graph polyline vertices with axes swapped: (value, abscissa)
    pts = []
    for i in range(K):
        pts.append((j[i, 0], b[i]))
        if j[i, 1] > j[i, 0]:
            pts.append((j[i, 1], b[i]))
    # group vertices sharing a value: each group is a breakpoint of the inverse
    new_b, new_j = [], []
    for v, u in pts:
        if new_b and v - new_b[-1] <= 1e-12 * max(1.0, abs(v)):
            new_j[-1][1] = u
        else:
            new_b.append(v)
            new_j.append([u, u])
    new_b = np.asarray(new_b)
    new_j = np.asarray(new_j, dtype=float)
    # slope between consecutive inverse breakpoints from the swapped polyline
    dv = np.diff(new_b)
    du = new_j[1:, 0] - new_j[:-1, 1]
    new_s = du / dv
    return _canonical(MonotoneGraph(new_b, new_j, new_s, (1.0 / tl, 1.0 / tr)))


def _canonical(graph):
    """Drop breakpoints that carry no jump and no slope change."""
    b, j, s = graph.breakpoints, graph.jumps, graph.slopes
    K = len(b)
    if K == 0:
        return graph
    slope_in = np.concatenate([[graph.tail_slopes[0]], s])
    slope_out = np.concatenate([s, [graph.tail_slopes[1]]])
    keep = (j[:, 1] > j[:, 0]) | (slope_in != slope_out)
    if keep.all():
        return graph
    if not keep.any():
        return MonotoneGraph.line(graph.tail_slopes[0])
    kept = np.flatnonzero(keep)
    nb = b[kept]
    nj = j[kept]
    ns = slope_out[kept[:-1]]
    return MonotoneGraph(nb, nj, ns, graph.tail_slopes)


def graph_fn(graph):
    """Vectorized callable for a single-valued graph (all jumps degenerate)."""
    if len(graph.breakpoints) and np.any(graph.jumps[:, 1] > graph.jumps[:, 0]):
        raise ValueError("graph is multivalued; no function evaluation")

    def f(u):
        lo, _ = graph.eval(np.asarray(u, dtype=float))
        return lo

    return f


# ---------------------------------------------------------------------------
# Graph composition
# ---------------------------------------------------------------------------


def _inner_preimage(inner, z):
    """Point u with z in inner(u) on a strictly increasing piece, else None.

    Values attained inside inner's jumps are the caller's business (the
    composed jump at that abscissa absorbs them already).
    """
    b, j, s = inner.breakpoints, inner.jumps, inner.slopes
    K = len(b)
    if z < j[0, 0]:
        tl = inner.tail_slopes[0]
        return b[0] + (z - j[0, 0]) / tl if tl > 0 else None
    if z > j[K - 1, 1]:
        tr = inner.tail_slopes[1]
        return b[K - 1] + (z - j[K - 1, 1]) / tr if tr > 0 else None
    for i in range(K - 1):
        if j[i, 1] < z < j[i + 1, 0]:
            return b[i] + (z - j[i, 1]) / s[i]
    return None


def compose_graphs(outer, inner):
    """Piecewise-affine graph of the composition u -> outer(inner(u)).

    Both arguments are maximal monotone; so is the composition, unless a
    genuine jump of ``outer`` sits exactly at the value of a flat piece of
    ``inner`` (the composition would be multivalued on a whole interval).
    That degenerate pairing is rejected.
    """
    if len(outer.breakpoints) == 0:
        c = outer.tail_slopes[0]
        return inner.scaled(c) if c > 0 else MonotoneGraph.line(0.0)
    ib, ij, islo = inner.breakpoints, inner.jumps, inner.slopes
    if len(ib) == 0:
        sig = inner.tail_slopes[0]
        if sig == 0:
            lo, hi = outer.value_interval(0.0)
            if hi > lo:
                raise ValueError("outer jump at the constant value of the inner graph")
            return MonotoneGraph.line(0.0)
        return MonotoneGraph(
            outer.breakpoints / sig,
            outer.jumps,
            outer.slopes * sig,
            (outer.tail_slopes[0] * sig, outer.tail_slopes[1] * sig),
        )

    cands = {}

    def add(u, lo, hi):
        for uu in list(cands):
            if abs(uu - u) <= 1e-12 * max(1.0, abs(uu)):
                a, c = cands[uu]
                cands[uu] = (min(a, lo), max(c, hi))
                return
        cands[u] = (lo, hi)

    # inner jumps: composed value interval is the filled image under outer
    for i in range(len(ib)):
        add(ib[i], outer.value_interval(ij[i, 0])[0], outer.value_interval(ij[i, 1])[1])

    # values where inner is flat (a genuine outer jump there is fatal)
    flat_vals = []
    if inner.tail_slopes[0] == 0:
        flat_vals.append(ij[0, 0])
    if inner.tail_slopes[1] == 0:
        flat_vals.append(ij[-1, 1])
    flat_vals += [ij[i, 1] for i in range(len(islo)) if islo[i] == 0]

    for k in range(len(outer.breakpoints)):
        z = outer.breakpoints[k]
        olo, ohi = outer.jumps[k]
        if ohi > olo and any(abs(z - fv) <= 1e-12 * max(1.0, abs(z)) for fv in flat_vals):
            raise ValueError("outer graph jumps at a plateau value of the inner graph")
        if any(ij[i, 0] <= z <= ij[i, 1] for i in range(len(ib))):
            continue  # absorbed by the composed jump at that inner breakpoint
        u_star = _inner_preimage(inner, z)
        if u_star is not None:
            add(u_star, olo, ohi)

    us = sorted(cands)
    b = np.asarray(us, dtype=float)
    jm = np.asarray([cands[u] for u in us], dtype=float)
    slopes = np.maximum((jm[1:, 0] - jm[:-1, 1]) / np.diff(b), 0.0) if len(b) > 1 else np.empty(0)

    def point_val(u):
        return outer.value_interval(inner.value_interval(u)[0])[0]

    tl = max((point_val(b[0] - 1.0) - point_val(b[0] - 2.0)) / 1.0, 0.0)
    tr = max((point_val(b[-1] + 2.0) - point_val(b[-1] + 1.0)) / 1.0, 0.0)
    return MonotoneGraph(b, jm, slopes, (tl, tr))


# ---------------------------------------------------------------------------
# Sampled strictly increasing functions (regularized graphs live here)
# ---------------------------------------------------------------------------


@dataclass
class SmoothMonotoneFn:
    """Strictly increasing function sampled on a uniform grid.

    Evaluation is linear interpolation, extended linearly beyond the grid
    with the edge slopes, so the function stays strictly increasing and
    surjective; the inverse is the exact inverse of that interpolant.
    """

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) < 2:
            raise ValueError("need at least two samples")
        self.du = (self.hi - self.lo) / (len(self.values) - 1)
        dv = np.diff(self.values)
        if np.any(dv <= 0):
            raise ValueError("samples must be strictly increasing")
        self._slopes = dv / self.du

    @staticmethod
    def from_function(fn, lo, hi, n=4097):
        grid = np.linspace(lo, hi, n)
        return SmoothMonotoneFn(lo, hi, np.asarray(fn(grid), dtype=float))

    @property
    def grid(self):
        return self.lo + self.du * np.arange(len(self.values))

    @property
    def lipschitz(self):
        return float(self._slopes.max())

    @property
    def margin(self):
        """Smallest sampled slope; > 0 certifies strict monotonicity."""
        return float(self._slopes.min())

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        t = (np.atleast_1d(u) - self.lo) / self.du
        i = np.clip(np.floor(t).astype(int), 0, len(self.values) - 2)
        out = self.values[i] + (t - i) * (self.values[i + 1] - self.values[i])
        return float(out[0]) if scalar else out

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        scalar = v.ndim == 0
        vv = np.atleast_1d(v)
        i = np.clip(np.searchsorted(self.values, vv, side="right") - 1, 0, len(self.values) - 2)
        u = self.lo + self.du * (i + (vv - self.values[i]) / (self.values[i + 1] - self.values[i]))
        return float(u[0]) if scalar else u


# ---------------------------------------------------------------------------
# ThetaField: x-indexed family of graphs theta(x, .) = c(x) * g(u)
# ---------------------------------------------------------------------------


@dataclass
class ThetaField:
    """Per-cell monotone graphs on a 1D grid of cell centers.

    Three coefficient layouts: constant, piecewise constant in x, smooth in x.
    All share the separable form c(x) * g(u) with c > 0, which keeps
    0 in theta(x, 0) automatically.
    """

    x_centers: np.ndarray
    graph: MonotoneGraph
    kind: str  # "const" | "pwc" | "smooth" | "rows"
    cell_c: np.ndarray
    c_fn: object = None           # smooth coefficient callable
    x_breaks: np.ndarray = None   # pwc region boundaries
    region_c: np.ndarray = None   # pwc region values

    @staticmethod
    def homogeneous(x_centers, graph):
        x = np.asarray(x_centers, dtype=float)
        return ThetaField(x, graph, "const", np.ones_like(x))

    @staticmethod
    def separable_pwc(x_centers, graph, x_breaks, region_c):
        """c(x) piecewise constant: region_c[k] on (x_breaks[k-1], x_breaks[k])."""
        x = np.asarray(x_centers, dtype=float)
        xb = np.asarray(x_breaks, dtype=float)
        rc = np.asarray(region_c, dtype=float)
        if len(rc) != len(xb) + 1:
            raise ValueError("need one region value more than break count")
        if np.any(rc <= 0):
            raise ValueError("coefficients must be positive")
        cell = rc[np.searchsorted(xb, x, side="right")]
        return ThetaField(x, graph, "pwc", cell, x_breaks=xb, region_c=rc)

    @staticmethod
    def separable_smooth(x_centers, graph, c_fn):
        x = np.asarray(x_centers, dtype=float)
        cell = np.asarray(c_fn(x), dtype=float)
        if np.any(cell <= 0):
            raise ValueError("coefficients must be positive")
        return ThetaField(x, graph, "smooth", cell, c_fn=c_fn)

    @staticmethod
    def explicit(x_centers, graph, cell_c):
        """One coefficient per cell, no x-smoothing (interface tables)."""
        x = np.asarray(x_centers, dtype=float)
        cell = np.asarray(cell_c, dtype=float)
        if np.any(cell <= 0):
            raise ValueError("coefficients must be positive")
        return ThetaField(x, graph, "rows", cell)

    @property
    def smooth_in_x(self):
        return self.kind in ("const", "smooth")

    def c_at(self, x):
        """Coefficient at arbitrary positions (used by the mollifier)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.ones_like(x)
        if self.kind == "pwc":
            return self.region_c[np.searchsorted(self.x_breaks, x, side="right")]
        if self.kind == "rows":
            idx = np.clip(np.searchsorted(self.x_centers, x), 0,
                          len(self.x_centers) - 1)
            return self.cell_c[idx]
        return np.asarray(self.c_fn(x), dtype=float)

    def eval(self, i, u):
        """Value set of theta(x_i, .) at u."""
        lo, hi = self.graph.eval(np.asarray(u, dtype=float))
        c = self.cell_c[i]
        return lo * c, hi * c

    def distinct_rows(self):
        """(row index per cell, coefficient per row): shared-table layout."""
        if self.kind == "const":
            return np.zeros(len(self.x_centers), dtype=int), np.array([1.0])
        if self.kind == "pwc":
            rows = np.searchsorted(self.x_breaks, self.x_centers, side="right")
            return rows, self.region_c
        if self.kind == "rows":
            uniq, inv = np.unique(self.cell_c, return_inverse=True)
            return inv, uniq
        return np.arange(len(self.x_centers)), self.cell_c


# ---------------------------------------------------------------------------
# Regularization: Yosida (lam = 1/sqrt(j)) + mollification (radius 1/j)
# + zero-normalization theta_j(x, 0) = 0.
# ---------------------------------------------------------------------------


@dataclass
class ThetaRegularization:
    """Sampled theta_j(x, .) per cell, shared across cells where possible."""

    field: ThetaField
    j: int
    u_lo: float
    u_hi: float
    table: np.ndarray       # (n_rows, n_samples) strictly increasing rows
    cell_rows: np.ndarray   # (n_cells,) row index per cell

    def __post_init__(self):
        self.n_samples = self.table.shape[1]
        self.du = (self.u_hi - self.u_lo) / (self.n_samples - 1)
        self._row_slopes = np.diff(self.table, axis=1) / self.du
        if np.any(self._row_slopes <= 0):
            raise ValueError("regularized theta lost strict monotonicity; widen the sample grid")

    @property
    def u_grid(self):
        return self.u_lo + self.du * np.arange(self.n_samples)

    @property
    def lipschitz(self):
        return float(self._row_slopes.max())

    @property
    def margin(self):
        return float(self._row_slopes.min())

    def fn(self, cell):
        return SmoothMonotoneFn(self.u_lo, self.u_hi, self.table[self.cell_rows[cell]])

    def _interp(self, rows, u):
        t = (np.asarray(u, dtype=float) - self.u_lo) / self.du
        i = np.clip(np.floor(t).astype(int), 0, self.n_samples - 2)
        T = self.table
        return T[rows, i] + (t - i) * (T[rows, i + 1] - T[rows, i])

    def v_of_u(self, u_cells):
        """theta_j(x_i, u_i) for a per-cell state vector (or S x n matrix)."""
        u = np.asarray(u_cells, dtype=float)
        rows = self.cell_rows if u.ndim == 1 else self.cell_rows[None, :]
        return self._interp(np.broadcast_to(rows, u.shape), u)

    def theta_of(self, u_value):
        """theta_j(x_i, u) for one scalar u across all cells."""
        return self._interp(self.cell_rows, np.full(len(self.cell_rows), float(u_value)))

    def eta_cells(self, v_value):
        """Inverse: u with theta_j(x_i, u) = v, one scalar v across all cells."""
        T = self.table[self.cell_rows]
        i = np.clip((T < v_value).sum(axis=1) - 1, 0, self.n_samples - 2)
        rows = np.arange(T.shape[0])
        lo, hi = T[rows, i], T[rows, i + 1]
        return self.u_lo + self.du * (i + (v_value - lo) / (hi - lo))

    def u_of_v(self, v_cells):
        """Inverse per cell for a per-cell v vector (or S x n matrix)."""
        v = np.asarray(v_cells, dtype=float)
        mat = v.ndim == 2
        V = v if mat else v[None, :]
        out = np.empty_like(V)
        T = self.table
        for s in range(V.shape[0]):
            Trow = T[self.cell_rows]
            i = np.clip((Trow < V[s][:, None]).sum(axis=1) - 1, 0, self.n_samples - 2)
            rows = np.arange(Trow.shape[0])
            lo, hi = Trow[rows, i], Trow[rows, i + 1]
            out[s] = self.u_lo + self.du * (i + (V[s] - lo) / (hi - lo))
        return out if mat else out[0]


def regularize_theta(field, j, u_lo, u_hi, n_samples=1025, outer=None):
    """Yosida transform with lam = 1/sqrt(j) rescaled by (1 + lam),
    mollification with radius 1/j in u (and in x for smooth coefficient
    fields), then zero-normalization so that theta_j(x, 0) = 0 exactly.

    The Yosida transform shrinks slope-1 affine branches by 1/(1 + lam);
    the (1 + lam) factor undoes that, so the identity graph is reproduced
    exactly for every j while the lam -> 0 limit is unchanged.

    ``outer`` composes an extra monotone graph on top of each cell's scaled
    graph before regularizing (used to absorb flux jumps: outer = U^{-1}).
    """
    if j < 1:
        raise ValueError("regularization index j must be >= 1")
    lam = 1.0 / math.sqrt(j)
    r = 1.0 / j
    nodes, weights = mollifier_nodes()
    grid = np.linspace(u_lo, u_hi, n_samples)
    # evaluation points for the u-convolution, plus u = 0 for normalization
    pts = np.concatenate([grid, [0.0]])[:, None] - r * nodes[None, :]  # (n+1, 16)

    def u_mollified_yosida(graph, scaled_lam):
        vals = resolvent(graph, scaled_lam, pts.ravel()).reshape(pts.shape)
        yos = (pts - vals) / scaled_lam
        # row-wise kernel sum: rows with identical content reduce to
        # bit-identical values, so the appended u = 0 row normalizes the
        # 0 node of the table to exactly 0
        return (yos * weights).sum(axis=1)

    def cell_column(c):
        if outer is None:
            # theta = c*g: resolvent at lam*c, Yosida scaled back by c
            return (1.0 + lam) * c * u_mollified_yosida(field.graph, lam * c)
        return (1.0 + lam) * u_mollified_yosida(
            compose_graphs(outer, field.graph.scaled(c)), lam)

    if field.kind in ("const", "pwc", "rows"):
        cell_rows, row_c = field.distinct_rows()
        table = np.empty((len(row_c), n_samples))
        for k, c in enumerate(row_c):
            col = cell_column(c)
            table[k] = col[:-1] - col[-1]
        return ThetaRegularization(field, j, u_lo, u_hi, table, cell_rows)

    # smooth coefficient: additional convolution across x with the same kernel
    x = field.x_centers
    table = np.empty((len(x), n_samples))
    for i in range(len(x)):
        cvals = field.c_at(x[i] - r * nodes)
        acc = np.zeros(n_samples + 1)
        for p in range(_N_KERNEL):
            acc += weights[p] * cell_column(cvals[p])
        table[i] = acc[:-1] - acc[-1]
    return ThetaRegularization(field, j, u_lo, u_hi, table, np.arange(len(x)))


# ---------------------------------------------------------------------------
# Inverse convergence check (sampled sequence against a limit graph)
# ---------------------------------------------------------------------------


def check_inverse_convergence(seq, limit, compact, n_grid=1000):
    """Sup distance of seq_n^{-1} to the limit's inverse on a compact window.

    ``seq`` is a list of SmoothMonotoneFn; ``limit`` a MonotoneGraph whose
    inverse must be continuous (no interior plateaus of the limit map turn
    into jumps inside the window).  Returns one sup-error per member.
    """
    a, b = compact
    inv = invert_graph(limit)
    inside = (inv.breakpoints >= a) & (inv.breakpoints <= b)
    if np.any(inside & (inv.jumps[:, 1] > inv.jumps[:, 0])):
        raise ValueError("limit inverse is discontinuous on the window")
    ys = np.linspace(a, b, n_grid)
    ref_lo, _ = inv.eval(ys)
    errors = []
    for fn in seq:
        if fn.margin <= 0:
            raise ValueError("sequence member is not strictly increasing (not surjective)")
        errors.append(float(np.abs(fn.inverse(ys) - ref_lo).max()))
    return errors
