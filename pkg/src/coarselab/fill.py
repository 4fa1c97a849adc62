"""Constructive filling of point tuples by chains of the Kuhn triangulation.

The Kuhn (Freudenthal) triangulation of the integer lattice has vertex set
Z^d, edges v -> v + 1_S for nonempty subsets S of the axes, and in 2-D the two
triangle families [v, v+e0, v+(1,1)] and [v, v+e1, v+(1,1)].  Windows built by
make_window order lattice points lexicographically, so sorting a simplex by
point id is the same as sorting by coordinates; simplices are stored sorted
with the sorting parity folded into the coefficient.

The filler:
  degree 0   vertex itself
  degree 1   single Kuhn edge when the pair spans one, otherwise the
             axis-ordered staircase path (axis 0 first, then axis 1, ...)
  degree 2   cone of the first point over the staircase of the opposite edge
             (columns of lattice squares), plus a one-triangle correction per
             diagonal face pair.  This reproduces unit simplices identically,
             which makes the roundtrip on simplicial chains the identity.

Boundary compatibility d(fill(y0..yq)) = sum_j (-1)^j fill(.. without yj ..)
holds exactly in integer arithmetic; degree 2 is supported on 1-D and 2-D
lattice windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FillError, MarginError, PreconditionError
from .spaces import GrowthFit, Window, fit_growth
from .ufchain import UfChain, norm_inf_n, shell_norm
from .cochain import _fit_power, ControlFit


def _parity_sorted(tup):
    """Sort a tuple, returning (sorted, sign of permutation, degenerate?)."""
    arr = list(tup)
    sign = 1
    for i in range(1, len(arr)):
        j = i
        while j > 0 and arr[j - 1] > arr[j]:
            arr[j - 1], arr[j] = arr[j], arr[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(arr)):
        if arr[i] == arr[i - 1]:
            return tuple(arr), 0, True
    return tuple(arr), sign, False


class SimplicialChain:
    """Integer/complex chain over oriented simplices of the Kuhn triangulation."""

    __slots__ = ("window", "degree", "support")

    def __init__(self, window: Window, degree: int, terms=None):
        self.window = window
        self.degree = degree
        self.support: dict[tuple, object] = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for simplex, coeff in items:
                self.add_simplex(simplex, coeff)

    def add_simplex(self, simplex, coeff):
        """Accumulate an (arbitrarily ordered) simplex with orientation sign.

        Degenerate simplices vanish; anything that is not a simplex of the
        triangulation is rejected.
        """
        if coeff == 0:
            return
        key, sign, degenerate = _parity_sorted(tuple(int(p) for p in simplex))
        if degenerate:
            return
        if key not in self.support and not is_kuhn_simplex(self.window, key):
            raise FillError(
                f"fill.SimplicialChain: {tuple(self.window.label(p) for p in key)} "
                "is not a simplex of the triangulation")
        acc = self.support.get(key, 0) + sign * coeff
        if acc == 0:
            self.support.pop(key, None)
        else:
            self.support[key] = acc

    def accumulate(self, other: "SimplicialChain", scalar=1):
        for key, coeff in other.support.items():
            acc = self.support.get(key, 0) + scalar * coeff
            if acc == 0:
                self.support.pop(key, None)
            else:
                self.support[key] = acc

    def scale(self, z) -> "SimplicialChain":
        out = SimplicialChain(self.window, self.degree)
        if z != 0:
            out.support = {k: z * v for k, v in self.support.items()}
        return out

    def __add__(self, other):
        out = SimplicialChain(self.window, self.degree)
        out.support = dict(self.support)
        out.accumulate(other)
        return out

    def __sub__(self, other):
        out = SimplicialChain(self.window, self.degree)
        out.support = dict(self.support)
        out.accumulate(other, -1)
        return out

    def __eq__(self, other):
        return (isinstance(other, SimplicialChain) and self.degree == other.degree
                and self.support == other.support)

    def __len__(self):
        return len(self.support)

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.support.values()), default=0.0)

    def vertices(self):
        out = set()
        for key in self.support:
            out.update(key)
        return out

    def __repr__(self):
        return f"SimplicialChain(degree={self.degree}, simplices={len(self.support)})"


def simplicial_boundary(s: SimplicialChain) -> SimplicialChain:
    """Alternating face sum; faces of sorted simplices stay sorted."""
    out = SimplicialChain(s.window, s.degree - 1)
    for key, coeff in s.support.items():
        for j in range(len(key)):
            face = key[:j] + key[j + 1:]
            acc = out.support.get(face, 0) + (-coeff if j % 2 else coeff)
            if acc == 0:
                out.support.pop(face, None)
            else:
                out.support[face] = acc
    return out


def is_kuhn_simplex(window: Window, key) -> bool:
    """Is the sorted id tuple a genuine simplex of the triangulation?"""
    coords = [window.label(p) for p in key]
    q = len(key) - 1
    if q == 0:
        return True
    if q == 1:
        d = np.array(coords[1]) - np.array(coords[0])
        return bool(np.all((d == 0) | (d == 1)) and np.any(d != 0))
    if q == 2 and window.dim == 2:
        v0, v1, v2 = (np.array(c) for c in coords)
        d1, d2 = v1 - v0, v2 - v1
        steps = {tuple(d1), tuple(d2)}
        return steps in ({(1, 0), (0, 1)}, {(0, 1), (1, 0)}) and tuple(d1 + d2) == (1, 1)
    return False


# -- the filler -----------------------------------------------------------------

def _require_lattice(window: Window, what: str):
    if window.kind not in ("zd", "interval_z"):
        raise FillError(f"{what}: fillers are defined on lattice windows only, "
                        f"got kind={window.kind!r}")


def _bbox_check(window: Window, tup, what: str):
    coords = np.array([window.label(p) for p in tup], dtype=np.int64)
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), -1).reshape(-1, len(lo))
    for corner in corners:
        if int(window._zd_norm(corner[None, :])[0]) > window.W:
            labels = tuple(window.label(int(p)) for p in tup)
            raise MarginError(
                f"{what}: filling of tuple {labels} needs the box corner "
                f"{tuple(int(x) for x in corner)} at distance "
                f"{int(window._zd_norm(corner[None, :])[0])} > W={window.W}; "
                "enlarge the window or its margin")


def _staircase_steps(ca, cb):
    """Oriented unit steps of the axis-ordered lattice path ca -> cb."""
    cur = list(ca)
    for axis in range(len(ca)):
        step = 1 if cb[axis] > cur[axis] else -1
        while cur[axis] != cb[axis]:
            tail = tuple(cur)
            cur[axis] += step
            yield tail, tuple(cur), axis, step


def _staircase_chain(window, ca, cb) -> SimplicialChain:
    out = SimplicialChain(window, 1)
    for tail, head, _axis, _step in _staircase_steps(ca, cb):
        out.add_simplex((window.index_of(tail), window.index_of(head)), 1)
    return out


def _square_chain(window, v) -> SimplicialChain:
    """Q(v): low triangle minus high triangle; boundary is the ccw square loop."""
    a, b = v
    out = SimplicialChain(window, 2)
    i = window.index_of
    out.add_simplex((i((a, b)), i((a + 1, b)), i((a + 1, b + 1))), 1)
    out.add_simplex((i((a, b)), i((a, b + 1)), i((a + 1, b + 1))), -1)
    return out


def _cone_edge(window, pc, u, axis, step) -> SimplicialChain:
    """Cone of point pc over the oriented unit step (u -> u + step*e_axis).

    Boundary is (step edge) - staircase(pc, head) + staircase(pc, tail).
    Steps along the last axis cone to zero; x-steps sweep a column of squares
    between the heights of pc and u.
    """
    out = SimplicialChain(window, 2)
    if len(pc) == 1 or axis == 1:
        return out
    # canonical +x edge at x = min; fold the step direction into the sign
    ux = u[0] if step > 0 else u[0] - 1
    sign = 1 if step > 0 else -1
    py, uy = pc[1], u[1]
    if uy > py:
        for b in range(py, uy):
            out.accumulate(_square_chain(window, (ux, b)), -sign)
    elif uy < py:
        for b in range(uy, py):
            out.accumulate(_square_chain(window, (ux, b)), sign)
    return out


def _diag_correction(window, ca, cb) -> SimplicialChain:
    """K(a, b) with boundary fill1(a,b) - staircase(a,b); nonzero for diagonals."""
    out = SimplicialChain(window, 2)
    if len(ca) != 2:
        return out
    dx, dy = cb[0] - ca[0], cb[1] - ca[1]
    i = window.index_of
    if (dx, dy) == (1, 1):
        a, b = ca
        out.add_simplex((i((a, b)), i((a + 1, b)), i((a + 1, b + 1))), -1)
    elif (dx, dy) == (-1, -1):
        a, b = cb
        out.add_simplex((i((a, b)), i((a, b + 1)), i((a + 1, b + 1))), 1)
    return out


def _fill1(window, ca, cb) -> SimplicialChain:
    if len(ca) == 2:
        dx, dy = cb[0] - ca[0], cb[1] - ca[1]
        if (dx, dy) in ((1, 1), (-1, -1)):
            # the pair spans a diagonal Kuhn edge; orientation handled by parity
            out = SimplicialChain(window, 1)
            out.add_simplex((window.index_of(ca), window.index_of(cb)), 1)
            return out
    return _staircase_chain(window, ca, cb)


def fill_tuple(window: Window, tup) -> SimplicialChain:
    """Fill an (i+1)-tuple of point ids by a degree-i chain, i <= 2.

    The boundary of the result is exactly the alternating sum of the fillings
    of the tuple's faces, and all vertices stay inside the bounding box of the
    tuple's coordinates (so within tuple-length of the first point).
    """
    tup = tuple(int(p) for p in tup)
    _require_lattice(window, "fill.fill_tuple")
    degree = len(tup) - 1
    if degree > 2:
        raise FillError("fill.fill_tuple: degrees above 2 are outside the core "
                        "build (documented extension point)")
    if degree == 2 and window.dim not in (1, 2):
        raise FillError("fill.fill_tuple: degree-2 fillings are implemented for "
                        "1-D and 2-D lattice windows")
    cached = window._fill_cache.get(tup)
    if cached is not None:
        return cached
    _bbox_check(window, tup, "fill.fill_tuple")
    coords = [window.label(p) for p in tup]
    if degree == 0:
        out = SimplicialChain(window, 0, {(tup[0],): 1})
    elif degree == 1:
        # diagonal pair fills to the Kuhn edge, else to the staircase;
        # coincident points fill to zero
        out = _fill1(window, coords[0], coords[1])
    else:
        y0, y1, y2 = coords
        out = SimplicialChain(window, 2)
        for tail, head, axis, step in _staircase_steps(y1, y2):
            out.accumulate(_cone_edge(window, y0, tail, axis, step))
        out.accumulate(_diag_correction(window, y1, y2), 1)
        out.accumulate(_diag_correction(window, y0, y2), -1)
        out.accumulate(_diag_correction(window, y0, y1), 1)
    window._fill_cache[tup] = out
    return out


def fill_chain(c: UfChain) -> SimplicialChain:
    """Linear extension of fill_tuple; a chain map in exact arithmetic."""
    out = SimplicialChain(c.window, c.degree)
    for tup, coeff in c.support.items():
        out.accumulate(fill_tuple(c.window, tup), coeff)
    return out


def inclusion(s: SimplicialChain) -> UfChain:
    """View a simplicial chain as a uniformly finite chain on its vertex tuples."""
    return UfChain(s.window, s.degree,
                   {key: coeff for key, coeff in s.support.items()},
                   _validated=True)


def roundtrip_identity(s: SimplicialChain) -> bool:
    """fill_chain(inclusion(s)) == s, exactly."""
    return fill_chain(inclusion(s)) == s


def fill_radius(window: Window, tup) -> int:
    """Max distance from a filling vertex to the tuple's first point."""
    chain = fill_tuple(window, tup)
    verts = chain.vertices() or {tup[0]}
    verts = np.fromiter(verts, dtype=np.int64)
    return int(window.dist_cross([int(tup[0])], verts)[0].max(initial=0))


# -- measured contractibility and the main estimate ------------------------------

def contractibility_profile(window: Window, degree: int, samples: int = 50,
                            rmax: int | None = None, seed: int = 0) -> ControlFit:
    """Fit S'(R) = max filling radius over sampled tuples of length <= R.

    Samples at least `samples` tuples per length bucket R = 1..rmax and
    tightens the power-law coefficient so S'(R) <= C * R^N holds pointwise.
    """
    _require_lattice(window, "fill.contractibility_profile")
    if rmax is None:
        rmax = max(2, (window.W // 3))
    rng = np.random.default_rng(seed)
    anchors = np.flatnonzero(window.dist_to_base <= window.W - 2 * rmax)
    if len(anchors) == 0:
        raise PreconditionError(
            "fill.contractibility_profile: window too small for rmax="
            f"{rmax}; no anchor is safe for radius {2 * rmax}")
    per_bucket = {R: 0 for R in range(1, rmax + 1)}
    prof = {R: 0 for R in range(1, rmax + 1)}
    for R in range(1, rmax + 1):
        tries = 0
        while per_bucket[R] < samples and tries < 100 * samples:
            tries += 1
            a = int(anchors[rng.integers(len(anchors))])
            near = np.flatnonzero(
                window.dist_cross([a], np.arange(window.n_points))[0] <= R)
            tup = (a,) + tuple(int(near[rng.integers(len(near))])
                               for _ in range(degree))
            ln = window.tuple_length(tup)
            if ln > R:
                continue
            per_bucket[R] += 1
            prof[R] = max(prof[R], fill_radius(window, tup))
        if per_bucket[R] < samples:
            raise PreconditionError(
                f"fill.contractibility_profile: insufficient samples in "
                f"bucket R={R} ({per_bucket[R]} < {samples})")
    running = 0
    for R in range(1, rmax + 1):
        running = max(running, prof[R])
        prof[R] = running
    fit = _fit_power(list(prof), [prof[R] for R in prof])
    fit.profile = prof
    return fit


@dataclass
class FillingReport:
    """Both sides of the sup-norm filling estimate with measured constants."""
    s_profile: dict
    C: float
    N: float
    D: float
    M: float
    q: int
    n: float
    lhs: float
    rhs: float
    passed: bool
    chain_norm: float = 0.0

    def as_dict(self):
        return {"C": self.C, "N": self.N, "D": self.D, "M": self.M, "q": self.q,
                "n": self.n, "lhs": self.lhs, "rhs": self.rhs,
                "passed": self.passed, "chain_norm": self.chain_norm}


def verify_crucial_estimate(c: UfChain, growth: GrowthFit | None = None,
                            profile: ControlFit | None = None) -> FillingReport:
    """Check the filling sup-norm bound with measured constants.

    Uses the measured growth envelope (D, M), the measured contractibility fit
    (C, N), the derived exponent n = M*q*(N+1) + 2, and compares the sup norm
    of the filled chain against D^(q+1) * C^M * (2^n pi^2/6 + 1) * ||c||_{inf,n}.
    """
    window = c.window
    if growth is None:
        growth = fit_growth(window)
    if profile is None:
        profile = contractibility_profile(window, c.degree)
    q = c.degree
    n = growth.M * q * (profile.N + 1) + 2
    chain_norm = norm_inf_n(c, n)
    lhs = fill_chain(c).sup_norm()
    rhs = (growth.D ** (q + 1)) * (profile.C ** growth.M) \
        * (2.0 ** n * math.pi ** 2 / 6.0 + 1.0) * chain_norm
    return FillingReport(s_profile=dict(profile.profile or {}), C=profile.C,
                         N=profile.N, D=growth.D, M=growth.M, q=q, n=n,
                         lhs=lhs, rhs=rhs,
                         passed=bool(lhs <= rhs * (1 + 1e-12) + 1e-12),
                         chain_norm=chain_norm)


def coefficient_sum_bound(c: UfChain, profile: ControlFit) -> tuple[float, float]:
    """Shell-summed counting bound on the filled chain's sup norm.

    rhs = sum_R shell(c,R) * vol B_{S'(R)} * (vol B_R - vol B_{R-1}) *
          (vol B_R)^(q-1); the balls are measured around the base point.
    """
    w = c.window
    q = c.degree
    vols = {}

    def vol(r):
        r = int(min(max(r, 0), w.W))
        if r not in vols:
            vols[r] = int(np.count_nonzero(w.dist_to_base <= r))
        return vols[r]

    prof = profile.profile or {}
    rmax = int(max((w.tuple_length(t) for t in c.support), default=0))
    rhs = 0.0
    for R in range(1, rmax + 1):
        s = shell_norm(c, R)
        if s == 0:
            continue
        sprime = prof.get(R)
        if sprime is None:
            sprime = math.ceil(profile.C * R ** profile.N)
        rhs += s * vol(sprime) * (vol(R) - vol(R - 1)) * vol(R) ** max(q - 1, 0)
    lhs = fill_chain(c).sup_norm()
    return lhs, rhs
