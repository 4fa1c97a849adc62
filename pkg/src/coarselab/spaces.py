"""Finite windows of quasi-lattices: construction, metrics, growth, certification.

A Window is a finite metric ball of radius W around a base point in one of the
supported spaces (integer lattices with l1/linf word metrics, the discrete
Heisenberg group with its {x, y} word metric, the 3-regular tree with the graph
metric).  Points are indexed 0..N-1 in a deterministic order; all distances are
integer valued and exact.

The margin m marks the set of "safe" points, those at distance <= W - m from
the base.  Operations that sum over neighbourhoods declare the radius they
consume and raise MarginError instead of silently truncating at the edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import MarginError, PointNotInWindowError, WindowError

MAX_POINTS_DEFAULT = 200_000

# poly-vs-exponential growth verdict: flag exponential when the exponential
# fit residual beats the polynomial one by this factor
EXP_FIT_FACTOR = 2.0

_ZD_METRICS = ("l1", "linf")


def _heis_mul(a, b, c, A, B, C):
    # (a,b,c)*(A,B,C) in the normal form x^a y^b z^c, z central
    return (a + A, b + B, c + C + a * B)


def _heis_inv(a, b, c):
    return (-a, -b, a * b - c)


class Window:
    """Finite window of a quasi-lattice.  Immutable after construction."""

    def __init__(self, kind: str, W: int, margin: int, metric: str,
                 dim: int | None = None, max_points: int = MAX_POINTS_DEFAULT):
        if W < 1:
            raise WindowError(f"spaces.make_window: W must be >= 1, got {W}")
        if margin < 0 or margin > W:
            raise WindowError(
                f"spaces.make_window: need 0 <= margin <= W, got margin={margin}, W={W}")
        self.kind = kind
        self.W = int(W)
        self.margin = int(margin)
        self.metric = metric
        self.dim = dim
        self._max_points = max_points
        self._wordlen = None      # heisenberg: dict (a,b,c) -> word length, radius 2W
        self._fill_cache = {}     # used by the filler; safe under the GIL

        if kind == "zd":
            if dim is None or dim < 1:
                raise WindowError("spaces.make_window: kind 'zd' needs dim >= 1")
            if metric not in _ZD_METRICS:
                raise WindowError(
                    f"spaces.make_window: zd metric must be one of {_ZD_METRICS}")
            self._build_zd()
        elif kind == "interval_z":
            self.dim = 1
            self.metric = "l1"
            self._build_zd()
        elif kind == "heisenberg3":
            self.metric = "word"
            self._build_heisenberg()
        elif kind == "tree3":
            self.metric = "graph"
            self._build_tree()
        else:
            raise WindowError(
                f"spaces.make_window: unsupported kind {kind!r} "
                "(supported: zd, interval_z, heisenberg3, tree3)")

        self.n_points = len(self.dist_to_base)
        self.safe_mask = self.dist_to_base <= self.W - self.margin
        self.safe_points = np.flatnonzero(self.safe_mask)

    # -- construction ----------------------------------------------------

    def _build_zd(self):
        d, W = self.dim, self.W
        if (2 * W + 1) ** d > 8 * self._max_points:
            raise WindowError(
                f"spaces.make_window: zd window W={W}, dim={d} exceeds the "
                f"memory budget of {self._max_points} points")
        axes = [np.arange(-W, W + 1)] * d
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        if self.metric == "l1":
            norms = np.abs(grid).sum(axis=1)
        else:
            norms = np.abs(grid).max(axis=1)
        coords = grid[norms <= W]
        order = np.lexsort(coords.T[::-1])
        self.coords = np.ascontiguousarray(coords[order], dtype=np.int64)
        if len(self.coords) > self._max_points:
            raise WindowError(
                f"spaces.make_window: window has {len(self.coords)} points, "
                f"budget is {self._max_points}")
        self._index = {tuple(p): i for i, p in enumerate(self.coords)}
        self.base = self._index[(0,) * d]
        self.dist_to_base = self._zd_norm(self.coords)

    def _zd_norm(self, v):
        if self.metric == "linf":
            return np.abs(v).max(axis=1)
        return np.abs(v).sum(axis=1)

    def _build_heisenberg(self):
        W = self.W
        gens = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
        lengths = {(0, 0, 0): 0}
        frontier = deque([(0, 0, 0)])
        while frontier:
            g = frontier.popleft()
            dg = lengths[g]
            if dg == W:
                continue
            for s in gens:
                h = _heis_mul(*g, *s)
                if h not in lengths:
                    if len(lengths) >= self._max_points:
                        raise WindowError(
                            f"spaces.make_window: heisenberg3 window W={W} exceeds "
                            f"the memory budget of {self._max_points} points")
                    lengths[h] = dg + 1
                    frontier.append(h)
        pts = sorted(lengths, key=lambda g: (lengths[g],) + g)
        self.coords = np.array(pts, dtype=np.int64)
        self._index = {p: i for i, p in enumerate(pts)}
        self.base = self._index[(0, 0, 0)]
        self.dist_to_base = np.array([lengths[p] for p in pts], dtype=np.int64)

    def _heis_wordlen_table(self):
        # word lengths out to radius 2W so that p^{-1}q is always resolvable
        if self._wordlen is None:
            gens = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
            lengths = {(0, 0, 0): 0}
            frontier = deque([(0, 0, 0)])
            lim = 2 * self.W
            while frontier:
                g = frontier.popleft()
                dg = lengths[g]
                if dg == lim:
                    continue
                for s in gens:
                    h = _heis_mul(*g, *s)
                    if h not in lengths:
                        lengths[h] = dg + 1
                        frontier.append(h)
            self._wordlen = lengths
        return self._wordlen

    def _build_tree(self):
        W = self.W
        n_est = 1 + 3 * (2 ** W - 1)
        if n_est > self._max_points:
            raise WindowError(
                f"spaces.make_window: tree3 window W={W} has {n_est} points, "
                f"budget is {self._max_points}")
        paths = [()]
        parent = [-1]
        depth = [0]
        frontier = deque([0])
        while frontier:
            i = frontier.popleft()
            if depth[i] == W:
                continue
            n_children = 3 if i == 0 else 2
            for c in range(n_children):
                paths.append(paths[i] + (c,))
                parent.append(i)
                depth.append(depth[i] + 1)
                frontier.append(len(paths) - 1)
        self._paths = paths
        self.parent = np.array(parent, dtype=np.int64)
        self.coords = None
        self._index = {p: i for i, p in enumerate(paths)}
        self.base = 0
        self.dist_to_base = np.array(depth, dtype=np.int64)

    # -- point access ------------------------------------------------------

    def label(self, i: int):
        """Coordinates of point i: int tuple for lattices, node path for trees."""
        if self.kind == "tree3":
            return self._paths[i]
        return tuple(int(x) for x in self.coords[i])

    def index_of(self, label) -> int:
        try:
            return self._index[tuple(label)]
        except KeyError:
            raise PointNotInWindowError(
                f"spaces: point {label!r} is not in the {self.kind} window "
                f"(W={self.W})") from None

    def check_point(self, i: int):
        if not (0 <= i < self.n_points):
            raise PointNotInWindowError(
                f"spaces: point id {i} out of range for window with "
                f"{self.n_points} points")

    # -- metric ------------------------------------------------------------

    def dist(self, i: int, j: int) -> int:
        self.check_point(i)
        self.check_point(j)
        if self.kind in ("zd", "interval_z"):
            return int(self._zd_norm((self.coords[i] - self.coords[j])[None, :])[0])
        if self.kind == "heisenberg3":
            table = self._heis_wordlen_table()
            p = self.coords[i]
            q = self.coords[j]
            rel = _heis_mul(*_heis_inv(*p), *q)
            return table[rel]
        # tree: walk to the least common ancestor
        di, dj = int(self.dist_to_base[i]), int(self.dist_to_base[j])
        d = 0
        while di > dj:
            i = self.parent[i]
            di -= 1
            d += 1
        while dj > di:
            j = self.parent[j]
            dj -= 1
            d += 1
        while i != j:
            i = self.parent[i]
            j = self.parent[j]
            d += 2
        return d

    def dist_many(self, ii, jj) -> np.ndarray:
        """Vectorized pairwise distances for parallel index arrays ii, jj."""
        ii = np.asarray(ii, dtype=np.int64)
        jj = np.asarray(jj, dtype=np.int64)
        if self.kind in ("zd", "interval_z"):
            return self._zd_norm(self.coords[ii] - self.coords[jj])
        return np.array([self.dist(int(a), int(b)) for a, b in zip(ii, jj)],
                        dtype=np.int64)

    def dist_cross(self, rows, cols) -> np.ndarray:
        """Distance block D[a, b] = d(rows[a], cols[b])."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.kind in ("zd", "interval_z"):
            diff = self.coords[rows][:, None, :] - self.coords[cols][None, :, :]
            if self.metric == "linf":
                return np.abs(diff).max(axis=2)
            return np.abs(diff).sum(axis=2)
        out = np.empty((len(rows), len(cols)), dtype=np.int64)
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                out[a, b] = self.dist(int(i), int(j))
        return out

    def tuple_length(self, tup) -> int:
        """Max pairwise distance within a point tuple (0 for singletons)."""
        m = len(tup)
        best = 0
        for a in range(m):
            for b in range(a + 1, m):
                dd = self.dist(tup[a], tup[b])
                if dd > best:
                    best = dd
        return best

    def tuple_lengths(self, tuples: np.ndarray) -> np.ndarray:
        """Vectorized tuple_length over an (S, m) index array."""
        tuples = np.asarray(tuples, dtype=np.int64)
        S, m = tuples.shape
        if m == 1:
            return np.zeros(S, dtype=np.int64)
        out = np.zeros(S, dtype=np.int64)
        for a in range(m):
            for b in range(a + 1, m):
                np.maximum(out, self.dist_many(tuples[:, a], tuples[:, b]), out=out)
        return out

    # -- margin discipline ---------------------------------------------------

    def require_margin(self, radius: int, what: str):
        if radius > self.margin:
            raise MarginError(
                f"{what} requires margin >= {radius}, but the window "
                f"(kind={self.kind}, W={self.W}) declares margin={self.margin}")

    def is_safe(self, i: int) -> bool:
        return bool(self.safe_mask[i])

    def check_tuple_safe(self, tup, what: str):
        for p in tup:
            if not self.safe_mask[p]:
                raise MarginError(
                    f"{what}: tuple {tuple(int(x) for x in tup)} contains point "
                    f"{self.label(int(p))} at distance {int(self.dist_to_base[p])} "
                    f"from the base, outside the safe radius "
                    f"{self.W - self.margin} (W={self.W}, margin={self.margin})")

    # -- descriptor ----------------------------------------------------------

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "W": self.W, "margin": self.margin,
             "metric": self.metric}
        if self.kind == "zd":
            d["dim"] = self.dim
        return d

    def __repr__(self):
        return (f"Window(kind={self.kind!r}, W={self.W}, margin={self.margin}, "
                f"metric={self.metric!r}, points={self.n_points})")


def make_window(kind: str, W: int, margin: int = 0, metric: str | None = None,
                dim: int | None = None,
                max_points: int = MAX_POINTS_DEFAULT) -> Window:
    """Build a window; see Window.  Metric defaults: l1 / word / graph."""
    if metric is None:
        metric = {"zd": "l1", "interval_z": "l1",
                  "heisenberg3": "word", "tree3": "graph"}.get(kind, "l1")
    return Window(kind, W, margin, metric, dim=dim, max_points=max_points)


def window_from_descriptor(d: dict, max_points: int = MAX_POINTS_DEFAULT) -> Window:
    return make_window(d["kind"], d["W"], d.get("margin", 0),
                       d.get("metric"), dim=d.get("dim"), max_points=max_points)


# -- measurements -------------------------------------------------------------

def distance(w: Window, p: int, q: int) -> int:
    """Window metric; raises PointNotInWindowError on bad ids."""
    return w.dist(p, q)


def ball_volume(w: Window, center: int, R: int) -> int:
    """Exact cardinality of the radius-R ball, which must fit in the window."""
    w.check_point(center)
    reach = int(w.dist_to_base[center]) + R
    if reach > w.W:
        raise MarginError(
            f"spaces.ball_volume: ball of radius {R} around point "
            f"{w.label(center)} reaches distance {reach} > W={w.W}; "
            f"the center is only safe for radius {w.W - int(w.dist_to_base[center])}")
    if center == w.base:
        return int(np.count_nonzero(w.dist_to_base <= R))
    d = w.dist_cross([center], np.arange(w.n_points))[0]
    return int(np.count_nonzero(d <= R))


@dataclass
class GrowthFit:
    """Power-law envelope vol B_R <= D * R^M with fit diagnostics."""
    D: float
    M: float
    residual: float
    exponential_flag: bool
    volumes: np.ndarray = field(repr=False, default=None)

    def as_dict(self):
        return {"D": self.D, "M": self.M, "residual": self.residual,
                "exponential_flag": self.exponential_flag}


def fit_growth(w: Window) -> GrowthFit:
    """Fit the volume growth of balls around the base point.

    The exponent comes from a log-log least-squares fit over the upper half of
    the measured radii (small radii are polluted by lower-order terms); the
    coefficient D is then inflated so vol B_R <= D * R^M holds pointwise for
    every measured R >= 1.  An exponential fit is run over the same range and
    the exponential_flag is set when its residual wins by EXP_FIT_FACTOR.
    """
    if w.W < 4:
        raise WindowError("spaces.fit_growth: window radius must be >= 4")
    if w.n_points < 2:
        raise WindowError("spaces.fit_growth: degenerate single-point window")
    R = np.arange(1, w.W + 1, dtype=float)
    vol = np.array([np.count_nonzero(w.dist_to_base <= r) for r in range(1, w.W + 1)],
                   dtype=float)
    lo = max(1, w.W // 2)
    sel = R >= lo
    logR, logV = np.log(R[sel]), np.log(vol[sel])
    A = np.vstack([np.ones_like(logR), logR]).T
    (logD, M), *_ = np.linalg.lstsq(A, logV, rcond=None)
    poly_res = float(np.sqrt(np.mean((logV - A @ [logD, M]) ** 2)))
    B = np.vstack([np.ones_like(logR), R[sel]]).T
    coef_exp, *_ = np.linalg.lstsq(B, logV, rcond=None)
    exp_res = float(np.sqrt(np.mean((logV - B @ coef_exp) ** 2)))
    # inflate D until the bound holds on every measured radius
    D = max(float(np.exp(logD)), float(np.max(vol / R ** M)))
    return GrowthFit(D=D, M=float(M), residual=poly_res,
                     exponential_flag=exp_res * EXP_FIT_FACTOR < poly_res,
                     volumes=vol)


def quasi_lattice_check(w: Window, subset) -> tuple[float, dict]:
    """Certify the two quasi-lattice conditions of a subset on the window.

    Returns (c, K_table): c is the max over margin-safe window points of the
    distance to the subset; K_table[r] is the max over subset points of the
    number of subset points within distance r, for r = 1..W.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if len(subset) == 0:
        raise WindowError("spaces.quasi_lattice_check: empty subset")
    for p in subset:
        w.check_point(int(p))
    D = w.dist_cross(subset, w.safe_points)
    c = float(D.min(axis=0).max()) if D.size else 0.0
    Dss = w.dist_cross(subset, subset)
    K_table = {}
    for r in range(1, w.W + 1):
        K_table[r] = int((Dss <= r).sum(axis=1).max())
    return c, K_table
