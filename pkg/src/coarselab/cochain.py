"""Coarse cochains, the Alexander-Spanier coboundary, rough maps, pairing.

Cochains are intensional expression trees (jumps, finite tables, pullbacks,
sums/scalings, coboundaries) so the near-diagonal support condition stays
checkable as windows grow.  Two coboundary conventions exist: "full" sums the
alternating faces from index 0 (this one is adjoint to the chain boundary and
is the default), "from1" starts at index 1; both square to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeError, MarginError, PointNotInWindowError, PreconditionError
from .spaces import Window
from .ufchain import UfChain, norm_inf_n

CONVENTIONS = ("full", "from1")


class CoarseCochain:
    """Base expression node; subclasses implement value()."""

    degree: int

    def value(self, window: Window, tup) -> complex:
        raise NotImplementedError

    def coboundary(self, convention: str = "full") -> "CoarseCochain":
        return Coboundary(self, convention)

    def __add__(self, other):
        return Sum(self, other)

    def __rmul__(self, z):
        return Scale(z, self)


class Jump(CoarseCochain):
    """Degree-1 jump across a coordinate hyperplane on a lattice window.

    value(y0, y1) = h(y1) - h(y0) with h the indicator of
    coordinate[axis] >= threshold.  Closed for the full coboundary.
    """

    def __init__(self, axis: int = 0, threshold: int = 0):
        self.degree = 1
        self.axis = axis
        self.threshold = threshold

    def _h(self, window, p):
        return 1 if window.coords[p][self.axis] >= self.threshold else 0

    def value(self, window, tup):
        if window.coords is None:
            raise PreconditionError("cochain.Jump: needs a lattice window")
        return self._h(window, tup[1]) - self._h(window, tup[0])

    def __repr__(self):
        return f"Jump(axis={self.axis}, threshold={self.threshold})"


class Table(CoarseCochain):
    """Explicit finite tuple -> value map; evaluates to 0 off its table."""

    def __init__(self, degree: int, entries: dict):
        self.degree = degree
        self.entries = {tuple(int(p) for p in t): v for t, v in entries.items()
                        if v != 0}
        for t in self.entries:
            if len(t) != degree + 1:
                raise DegreeError(
                    f"cochain.Table: tuple {t} has arity {len(t)}, "
                    f"degree {degree} needs {degree + 1}")

    def value(self, window, tup):
        return self.entries.get(tuple(tup), 0)

    def __repr__(self):
        return f"Table(degree={self.degree}, entries={len(self.entries)})"


class Indicator(CoarseCochain):
    """Degree-0 indicator of a point set (by ids or by a coordinate predicate)."""

    def __init__(self, points=None, predicate=None):
        self.degree = 0
        self.points = frozenset(int(p) for p in points) if points is not None else None
        self.predicate = predicate

    def value(self, window, tup):
        p = tup[0]
        if self.points is not None:
            return 1 if p in self.points else 0
        return 1 if self.predicate(window.label(p)) else 0


class Sum(CoarseCochain):
    def __init__(self, left: CoarseCochain, right: CoarseCochain):
        if left.degree != right.degree:
            raise DegreeError("cochain.Sum: degree mismatch")
        self.degree = left.degree
        self.left, self.right = left, right

    def value(self, window, tup):
        return self.left.value(window, tup) + self.right.value(window, tup)


class Scale(CoarseCochain):
    def __init__(self, z, child: CoarseCochain):
        self.degree = child.degree
        self.z, self.child = z, child

    def value(self, window, tup):
        return self.z * self.child.value(window, tup)


class Coboundary(CoarseCochain):
    """Alexander-Spanier coboundary node for either convention."""

    def __init__(self, child: CoarseCochain, convention: str = "full"):
        if convention not in CONVENTIONS:
            raise PreconditionError(
                f"cochain.Coboundary: convention must be one of {CONVENTIONS}")
        self.degree = child.degree + 1
        self.child = child
        self.convention = convention

    def value(self, window, tup):
        lo = 0 if self.convention == "full" else 1
        total = 0
        for i in range(lo, len(tup)):
            face = tup[:i] + tup[i + 1:]
            v = self.child.value(window, face)
            total = total + (-v if i % 2 else v)
        return total


class Pullback(CoarseCochain):
    """(f* phi)(y0..yq) = phi(f(y0), .., f(yq)) along a rough map."""

    def __init__(self, rough_map: "RoughMap", child: CoarseCochain):
        self.degree = child.degree
        self.f = rough_map
        self.child = child

    def value(self, window, tup):
        image = tuple(self.f.apply(p) for p in tup)
        return self.child.value(self.f.target, image)


def evaluate(phi: CoarseCochain, window: Window, tup) -> complex:
    """Evaluate the expression tree on a tuple of point ids."""
    tup = tuple(int(p) for p in tup)
    if len(tup) != phi.degree + 1:
        raise DegreeError(
            f"cochain.evaluate: tuple arity {len(tup)} does not match "
            f"degree {phi.degree}")
    for p in tup:
        window.check_point(p)
    return phi.value(window, tup)


def coboundary(phi: CoarseCochain, convention: str = "full") -> CoarseCochain:
    return Coboundary(phi, convention)


# -- support certification ------------------------------------------------------

@dataclass
class SupportSlice:
    R: int
    count: int
    diameter: int
    unbounded_within_window: bool


def support_check(phi: CoarseCochain, window: Window, Rmax: int) -> dict[int, SupportSlice]:
    """Measure supp(phi) intersected with tuples of length <= R, per R <= Rmax.

    The diameter is taken in the product metric.  When the support touches the
    boundary of the margin-safe region the slice is flagged as unbounded within
    the window (boundedness cannot be certified from this window alone).
    """
    window.require_margin(Rmax, "cochain.support_check")
    q = phi.degree
    safe = window.safe_points
    safe_limit = window.W - window.margin
    # enumerate support tuples of length <= Rmax among safe points
    supported = []
    if q == 0:
        for p in safe:
            if phi.value(window, (int(p),)) != 0:
                supported.append(((int(p),), 0))
    else:
        ball = {int(p): [int(x) for x in safe[
            window.dist_cross([int(p)], safe)[0] <= Rmax]] for p in safe}

        def extend(partial):
            if len(partial) == q + 1:
                if phi.value(window, partial) != 0:
                    supported.append((partial, window.tuple_length(partial)))
                return
            for nxt in ball[partial[0]]:
                ok = all(window.dist(p, nxt) <= Rmax for p in partial)
                if ok:
                    extend(partial + (nxt,))

        for p in safe:
            extend((int(p),))
    report = {}
    for R in range(1, Rmax + 1):
        tuples = [t for t, ln in supported if ln <= R]
        if not tuples:
            report[R] = SupportSlice(R, 0, 0, False)
            continue
        arr = np.array(tuples, dtype=np.int64)
        diam = 0
        for j in range(q + 1):
            col = np.unique(arr[:, j])
            diam = max(diam, int(window.dist_cross(col, col).max()))
        touches = bool((window.dist_to_base[arr] >= safe_limit).any())
        report[R] = SupportSlice(R, len(tuples), diam, touches)
    return report


# -- pairing ---------------------------------------------------------------------

def pair(phi: CoarseCochain, c: UfChain, check_margin: bool = True) -> complex:
    """<phi, c> = sum over the chain support of phi(tuple) * coefficient.

    Margin-safety is enforced for contributing tuples (nonzero cochain value
    against nonzero coefficient); vacuous tuples may live near the edge.
    """
    if phi.degree != c.degree:
        raise DegreeError(
            f"cochain.pair: cochain degree {phi.degree} vs chain degree {c.degree}")
    w = c.window
    total = 0
    for tup, val in c.support.items():
        v = phi.value(w, tup)
        if v == 0:
            continue
        if check_margin:
            w.check_tuple_safe(tup, "cochain.pair")
        total = total + v * val
    return total


# -- rough maps -------------------------------------------------------------------

class RoughMap:
    """Sampled map between windows with fitted forward/backward controls."""

    def __init__(self, source: Window, target: Window, mapping: np.ndarray):
        self.source = source
        self.target = target
        self.mapping = np.asarray(mapping, dtype=np.int64)

    @classmethod
    def from_callable(cls, source: Window, target: Window, fn) -> "RoughMap":
        """Tabulate fn over margin-safe source points; label -> label."""
        mapping = np.full(source.n_points, -1, dtype=np.int64)
        for p in source.safe_points:
            image = fn(source.label(int(p)))
            try:
                mapping[p] = target.index_of(image)
            except PointNotInWindowError:
                raise PointNotInWindowError(
                    f"cochain.RoughMap: image {image!r} of point "
                    f"{source.label(int(p))} lies outside the target window") from None
        return cls(source, target, mapping)

    @classmethod
    def identity(cls, w: Window) -> "RoughMap":
        return cls(w, w, np.arange(w.n_points, dtype=np.int64))

    def apply(self, p: int) -> int:
        j = int(self.mapping[p])
        if j < 0:
            raise MarginError(
                f"cochain.RoughMap: map undefined at point {self.source.label(int(p))} "
                "(outside the margin-safe sampling region)")
        return j

    def compose(self, other: "RoughMap") -> "RoughMap":
        """self after other (other: X->Y, self: Y->Z)."""
        mapping = np.full(other.source.n_points, -1, dtype=np.int64)
        for p in range(other.source.n_points):
            j = other.mapping[p]
            if j >= 0 and self.mapping[j] >= 0:
                mapping[p] = self.mapping[j]
        return RoughMap(other.source, self.target, mapping)


def pullback(f: RoughMap, phi: CoarseCochain) -> CoarseCochain:
    return Pullback(f, phi)


@dataclass
class ControlFit:
    C: float
    N: float
    residual: float
    profile: dict = field(repr=False, default=None)


@dataclass
class RoughCheckReport:
    s_plus: ControlFit
    s_minus: ControlFit
    passed: bool
    warnings: list


def _fit_power(Rs, Ss):
    Rs = np.asarray(Rs, float)
    Ss = np.asarray(Ss, float)
    sel = (Rs >= 1) & (Ss > 0)
    if sel.sum() < 2:
        return ControlFit(C=max(1.0, float(Ss.max(initial=1.0))), N=0.0, residual=0.0)
    logR, logS = np.log(Rs[sel]), np.log(Ss[sel])
    A = np.vstack([np.ones_like(logR), logR]).T
    (logC, N), *_ = np.linalg.lstsq(A, logS, rcond=None)
    res = float(np.sqrt(np.mean((logS - A @ [logC, N]) ** 2)))
    C = max(float(np.exp(logC)), float(np.max(Ss[sel] / Rs[sel] ** N)))
    return ControlFit(C=C, N=float(N), residual=res)


def rough_check(f: RoughMap, pairs_per_bucket: int = 100, seed: int = 0,
                rmax: int | None = None,
                residual_threshold: float = 0.5) -> RoughCheckReport:
    """Empirical forward/backward distance controls of a sampled map.

    Samples >= pairs_per_bucket point pairs per source-distance bucket
    R = 1..rmax, measures S+(R) = max image distance over pairs at source
    distance <= R and S-(R) = max source distance over pairs at image
    distance <= R, and fits both to C * R^N.  The check fails when a fit
    residual exceeds the threshold or when the backward control saturates at
    the window scale (far points collapsing to nearby images).
    """
    rng = np.random.default_rng(seed)
    src = f.source
    defined = np.flatnonzero(f.mapping >= 0)
    if len(defined) < 2:
        raise PreconditionError("cochain.rough_check: map defined on < 2 points")
    if rmax is None:
        rmax = max(1, 2 * (src.W - src.margin))
    d_src_all = []
    d_img_all = []
    for R in range(1, rmax + 1):
        got = 0
        attempts = 0
        while got < pairs_per_bucket and attempts < 50 * pairs_per_bucket:
            attempts += 1
            a = int(defined[rng.integers(len(defined))])
            near = defined[src.dist_cross([a], defined)[0] <= R]
            if len(near) == 0:
                continue
            b = int(near[rng.integers(len(near))])
            d_src_all.append(src.dist(a, b))
            d_img_all.append(f.target.dist(f.apply(a), f.apply(b)))
            got += 1
        if got < pairs_per_bucket:
            raise PreconditionError(
                f"cochain.rough_check: could not sample {pairs_per_bucket} "
                f"pairs in distance bucket R={R}")
    d_src = np.array(d_src_all)
    d_img = np.array(d_img_all)
    Rs = np.arange(1, rmax + 1)
    s_plus = np.array([d_img[d_src <= R].max(initial=0) for R in Rs])
    s_minus = np.array([d_src[d_img <= R].max(initial=0) for R in Rs])
    fit_p = _fit_power(Rs, s_plus)
    fit_p.profile = {int(R): int(s) for R, s in zip(Rs, s_plus)}
    fit_m = _fit_power(Rs, s_minus)
    fit_m.profile = {int(R): int(s) for R, s in zip(Rs, s_minus)}
    warnings = []
    diam = int(d_src.max(initial=0))
    if diam > 2 and s_minus[0] >= 0.5 * diam:
        warnings.append(
            "backward control saturates at the window scale: far points map close")
    if fit_p.residual > residual_threshold:
        warnings.append(f"forward fit residual {fit_p.residual:.3f} above threshold")
    if fit_m.residual > residual_threshold and not warnings:
        warnings.append(f"backward fit residual {fit_m.residual:.3f} above threshold")
    return RoughCheckReport(fit_p, fit_m, passed=not warnings, warnings=warnings)


# -- continuity sweep --------------------------------------------------------------

@dataclass
class SweepRow:
    trial: int
    pairing: complex
    norm: float
    ratio: float


@dataclass
class SweepResult:
    max_ratio: float
    rows: list
    trivial: int


def continuity_sweep(phi: CoarseCochain, chain_sampler, n: float,
                     trials: int, seed: int = 0) -> SweepResult:
    """Max of |<phi, sigma>| / ||sigma||_{inf,n} over seeded random chains.

    chain_sampler(trial_seed) must return a UfChain of matching degree.
    Chains with zero norm are counted as trivial and skipped.
    """
    rows = []
    trivial = 0
    best = 0.0
    for t in range(trials):
        sigma = chain_sampler(seed + t)
        norm = norm_inf_n(sigma, n)
        if norm == 0:
            trivial += 1
            continue
        p = complex(pair(phi, sigma))
        ratio = abs(p) / norm
        rows.append(SweepRow(t, p, norm, ratio))
        best = max(best, ratio)
    return SweepResult(best, rows, trivial)
