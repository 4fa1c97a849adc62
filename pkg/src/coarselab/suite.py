"""Index demos and the acceptance suite behind the command-line front end.

Every check returns a CheckResult whose `details` carry the measured
constants and residuals; a reported pass always corresponds to an inequality
evaluated in the sound (certified-lower against certified-upper) direction or
to an exact identity.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import cochain, cyclic, fill, opalg, spaces, ufchain
from .errors import CoarselabError, MarginError, PreconditionError

DEFAULT_CONFIG = {
    "seed": 7,
    "boundary_instances": 500,
    "adjointness_instances": 200,
    "chain_map_trials": 200,
    "cyclic_instances": 100,
    "product_pairs": 100,
    "power_ops": 50,
    "neumann_ops": 50,
    "fill_instances": 200,
    "crucial_chains": 200,
    "winding_W": 28,
    "winding_margin": 20,
    "heisenberg_W": 16,
    "sweep_trials": 500,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict
    elapsed: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        keys = ", ".join(f"{k}={v}" for k, v in self.details.items()
                         if not isinstance(v, (list, dict)))
        return f"[{status}] {self.name} ({self.elapsed:.2f}s) {keys}"


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"command": self.command, "config": self.config,
                "wall_clock": self.wall_clock,
                "passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "elapsed": c.elapsed, "details": _plain(c.details)}
                           for c in self.checks]}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        name, passed, details = fn(*args, **kwargs)
        return CheckResult(name, passed, details, time.perf_counter() - t0)
    return wrapper


# -- exact linear algebra for the index oracle -----------------------------------

def _exact_kernel_basis(M):
    """Kernel basis of an integer matrix, exact over the rationals."""
    m, n = M.shape
    A = [[Fraction(int(M[i, j])) for j in range(n)] for i in range(m)]
    pivots = {}
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        pivots[c] = r
        r += 1
    basis = []
    for c in range(n):
        if c in pivots:
            continue
        v = [Fraction(0)] * n
        v[c] = Fraction(1)
        for pc, pr in pivots.items():
            v[pc] = -A[pr][c]
        basis.append(v)
    return basis


def _exact_cokernel_rows(M):
    """Row indices whose standard vectors complete the column space.

    Column-eliminates the matrix over the rationals, tracking which rows end
    up holding a pivot; the pivot-free rows represent the cokernel.
    """
    m = M.shape[0]
    A = [[Fraction(int(M[i, j])) for j in range(M.shape[1])] for i in range(m)]
    used_rows = set()
    for c in range(M.shape[1]):
        piv = next((i for i in range(m)
                    if i not in used_rows and A[i][c] != 0), None)
        if piv is None:
            continue
        used_rows.add(piv)
        for c2 in range(M.shape[1]):
            if c2 != c and A[piv][c2] != 0:
                f = A[piv][c2] / A[piv][c]
                for i in range(m):
                    A[i][c2] -= f * A[i][c]
    return sorted(set(range(m)) - used_rows)


def toeplitz_index_oracle(compressed: np.ndarray, near_size: int) -> int:
    """Fredholm index extracted from a finite compression by exact ranks.

    The square compression of a half-space operator always has equal kernel
    and cokernel dimensions (edge modes at the two ends of the interval); the
    index of the half-infinite operator is the count of kernel modes localized
    in the first `near_size` sites minus the count of cokernel modes there.
    """
    ker = _exact_kernel_basis(compressed)
    coker_rows = _exact_cokernel_rows(compressed)
    ker_near = 0
    for v in ker:
        support = [i for i, x in enumerate(v) if x != 0]
        if support and max(support) < near_size:
            ker_near += 1
    coker_near = sum(1 for r in coker_rows if r < near_size)
    return ker_near - coker_near


# -- demos -------------------------------------------------------------------------

@dataclass
class WindingReport:
    k: int
    pairing_raw: complex
    pairing_stripped: complex
    oracle_index: int
    ratio: complex | None


def demo_winding(k: int, W: int, margin: int) -> WindingReport:
    """Pair the jump cochain against the odd character of a k-fold shift and
    compare with the exact Toeplitz index of the half-window compression."""
    if margin < 4 * abs(k) + 4:
        raise MarginError(
            f"cli.demo_winding: margin {margin} is below the required "
            f"4|k| + 4 = {4 * abs(k) + 4}")
    w = spaces.make_window("zd", W, margin, dim=1)
    u = opalg.winding_unitary(w, k)
    if k == 0:
        return WindingReport(0, 0j, 0j, 0, None)
    tensor = cyclic.chern1(u, 0)
    pairing = cyclic.character_pairing(cochain.Jump(0, 0), tensor)
    nonneg = [p for p in range(w.n_points) if w.coords[p][0] >= 0]
    nonneg.sort(key=lambda p: w.coords[p][0])
    sub = u.mat.toarray()[np.ix_(nonneg, nonneg)]
    oracle = toeplitz_index_oracle(np.real(sub).astype(np.int64),
                                   near_size=len(nonneg) // 2)
    ratio = pairing.stripped / oracle if oracle != 0 else None
    return WindingReport(k, pairing.raw, pairing.stripped, oracle, ratio)


def demo_degree0(window: spaces.Window, e: opalg.BandedOperator,
                 phi: cochain.CoarseCochain) -> complex:
    """<phi, chi(e)> = sum over points of phi(y) times the local trace of e."""
    tensor = cyclic.CyclicTensor(0, [(1.0, (e,))])
    return complex(cochain.pair(phi, cyclic.chi(tensor)))


@dataclass
class TreeDemoReport:
    tree_exact: bool
    tree_max_coeff: float
    z_expected_fail: bool
    z_witness_coeff: float


def demo_tree_fundamental_class(W: int) -> TreeDemoReport:
    """Bound the 0-cycle of all vertices on the 3-regular tree window.

    Routes one unit of flow from every vertex toward infinity (away from the
    root), splitting equally over children; the resulting 1-chain has exact
    rational coefficients bounded by 1 and boundary equal to the sum of all
    margin-safe vertices.  The analogous rightward routing on an integer
    interval is the expected-fail witness: its coefficients grow linearly with
    the window radius.
    """
    if W < 4:
        raise PreconditionError("cli.demo_tree: needs W >= 4")
    w = spaces.make_window("tree3", W, 1)
    flow_in = {0: Fraction(0)}
    terms = {}
    order = np.argsort(w.dist_to_base, kind="stable")
    children = {}
    for p in range(1, w.n_points):
        children.setdefault(int(w.parent[p]), []).append(p)
    for p in order:
        p = int(p)
        kids = children.get(p, [])
        if not kids:
            continue
        out_flow = (flow_in[p] + 1) / len(kids)
        for c in kids:
            flow_in[c] = out_flow
            terms[(c, p)] = out_flow
    t = ufchain.UfChain(w, 1, terms, _validated=True)
    bt = ufchain.boundary(t)
    ok = True
    for p in w.safe_points:
        if bt.coefficient((int(p),)) != 1:
            ok = False
            break
    max_coeff = max((float(v) for v in terms.values()), default=0.0)

    wz = spaces.make_window("zd", W, 1, dim=1)
    acc = 0
    zmax = 0
    for x in range(-W, W):
        acc += 1                       # vertices at or left of x route rightward
        zmax = max(zmax, acc)
    return TreeDemoReport(tree_exact=ok, tree_max_coeff=max_coeff,
                          z_expected_fail=zmax >= wz.n_points - 1,
                          z_witness_coeff=float(zmax))


# -- acceptance checks --------------------------------------------------------------

def _mixed_windows():
    return [spaces.make_window("zd", 16, 4, dim=1),
            spaces.make_window("zd", 10, 3, dim=2)]


@_timed
def check_boundary_identities(config) -> tuple:
    rng = np.random.default_rng(config["seed"])
    windows = _mixed_windows()
    n = config["boundary_instances"]
    chains_ok = True
    for q in (1, 2, 3):
        for i in range(n):
            w = windows[i % len(windows)]
            c = ufchain.random_chain(w, q, n_terms=6, max_len=4,
                                     seed=int(rng.integers(2 ** 31)), coeff="int")
            bc = ufchain.boundary(c)
            if q == 1:
                # the boundary map on degree 0 is zero; its image must have
                # vanishing augmentation
                if sum(v for _, v in bc.terms()) != 0:
                    chains_ok = False
            elif len(ufchain.boundary(bc)) != 0:
                chains_ok = False
    cob_ok = {"full": True, "from1": True}
    for q in (0, 1, 2):
        for i in range(n):
            w = windows[i % len(windows)]
            pts = w.safe_points
            tbl = {tuple(int(pts[rng.integers(len(pts))]) for _ in range(q + 1)):
                   int(rng.integers(-5, 6)) for _ in range(5)}
            phi = cochain.Table(q, tbl)
            tup = tuple(int(pts[rng.integers(len(pts))]) for _ in range(q + 3))
            for conv in ("full", "from1"):
                dd = cochain.coboundary(cochain.coboundary(phi, conv), conv)
                if cochain.evaluate(dd, w, tup) != 0:
                    cob_ok[conv] = False
    passed = chains_ok and all(cob_ok.values())
    return ("boundary_identities", passed,
            {"chains_exact": chains_ok, "coboundary_full": cob_ok["full"],
             "coboundary_from1": cob_ok["from1"], "instances": n})


@_timed
def check_pairing_adjointness(config) -> tuple:
    rng = np.random.default_rng(config["seed"] + 1)
    windows = _mixed_windows()
    n = config["adjointness_instances"]
    adj_ok = True
    descent_ok = True
    for i in range(n):
        w = windows[i % len(windows)]
        q = int(rng.integers(0, 3))
        pts = w.safe_points
        tbl = {tuple(int(pts[rng.integers(len(pts))]) for _ in range(q + 1)):
               int(rng.integers(-5, 6)) for _ in range(6)}
        phi = cochain.Table(q, tbl)
        safe_r = w.margin + 3
        c = ufchain.random_chain(w, q + 1, n_terms=6, max_len=3,
                                 seed=int(rng.integers(2 ** 31)), coeff="int",
                                 safe_radius=safe_r)
        lhs = cochain.pair(cochain.coboundary(phi), c)
        rhs = cochain.pair(phi, ufchain.boundary(c))
        if lhs != rhs:
            adj_ok = False
        closed = cochain.coboundary(phi)
        b = ufchain.random_chain(w, q + 2, n_terms=4, max_len=3,
                                 seed=int(rng.integers(2 ** 31)), coeff="int",
                                 safe_radius=safe_r)
        c2 = ufchain.random_chain(w, q + 1, n_terms=5, max_len=3,
                                  seed=int(rng.integers(2 ** 31)), coeff="int",
                                  safe_radius=safe_r)
        with_b = cochain.pair(closed, c2 + ufchain.boundary(b))
        without = cochain.pair(closed, c2)
        if with_b != without:
            descent_ok = False
    return ("pairing_adjointness", adj_ok and descent_ok,
            {"adjoint_exact": adj_ok, "descent_exact": descent_ok,
             "instances": n})


@_timed
def check_chain_map(config) -> tuple:
    trials = config["chain_map_trials"]
    seed = config["seed"] + 2
    worst = 0.0
    windows = [spaces.make_window("zd", 32, 12, dim=1),
               spaces.make_window("zd", 32, 12, dim=2)]
    count = 0
    for w in windows:
        for degree in (1, 2):
            for i in range(trials):
                ops = tuple(
                    opalg.random_banded(w, (seed, count, j), prop=2,
                                        decay=0.7, density=0.3)
                    for j in range(degree + 1))
                t = cyclic.CyclicTensor(degree, [(1.0, ops)])
                worst = max(worst, cyclic.chain_map_check(t))
                count += 1
    return ("chain_map_identity", worst < 1e-9,
            {"max_residual": worst, "tensors": count})


@_timed
def check_cyclic_invariance(config) -> tuple:
    n_inst = config["cyclic_instances"]
    seed = config["seed"] + 3
    w = spaces.make_window("zd", 32, 12, dim=1)
    wsmall = spaces.make_window("zd", 12, 8, dim=1)
    exact = True
    tested = 0
    for degree, window, count in ((1, w, n_inst), (2, w, n_inst),
                                  (3, wsmall, max(10, n_inst // 5))):
        for i in range(count):
            ops = tuple(opalg.random_banded(window, (seed, degree, i, j),
                                            prop=2, density=0.4, integer=True)
                        for j in range(degree + 1))
            t = cyclic.CyclicTensor(degree, [(1.0, ops)])
            c1 = cyclic.chi(t)
            c2 = cyclic.chi(cyclic.lambda_op(t))
            if c1.support != c2.support:
                exact = False
            tested += 1
    return ("cyclic_invariance", exact, {"tensors": tested, "exact": exact})


@_timed
def check_product_estimate(config) -> tuple:
    pairs = config["product_pairs"]
    seed = config["seed"] + 4
    w = spaces.make_window("zd", 32, 16, dim=1)
    all_ok = True
    worst_gap = np.inf
    for i in range(pairs):
        A = opalg.random_banded(w, (seed, i, 0), prop=3, decay=0.6)
        B = opalg.random_banded(w, (seed, i, 1), prop=3, decay=0.6)
        tab = opalg.check_product_estimate(A, B, 16)
        if not tab.passed:
            all_ok = False
        for r in tab.rows:
            if r.rhs > 0:
                worst_gap = min(worst_gap, r.rhs - r.lhs)
    return ("product_estimate", all_ok,
            {"pairs": pairs, "min_slack": worst_gap})


@_timed
def check_power_estimate(config) -> tuple:
    n_ops = config["power_ops"]
    seed = config["seed"] + 5
    w = spaces.make_window("zd", 32, 16, dim=1)
    all_ok = True
    for i in range(n_ops):
        A = opalg.random_banded(w, (seed, i), prop=2, decay=0.5)
        A = A.scale(0.95 / max(opalg.op_norm(A), 1e-12))
        if not opalg.check_power_estimate(A, 4, 16).passed:
            all_ok = False
    return ("power_estimate", all_ok, {"operators": n_ops, "nmax": 4})


@_timed
def check_neumann(config) -> tuple:
    n_ops = config["neumann_ops"]
    seed = config["seed"] + 6
    w = spaces.make_window("zd", 32, 16, dim=1)
    all_ok = True
    worst = 0.0
    for n in (1, 2, 3):
        for i in range(n_ops):
            B = opalg.random_banded(w, (seed, n, i), prop=2, decay=0.5)
            target = 0.8 / (2 ** (n + 1) * 5)
            B = B.scale(target / max(opalg.op_norm(B), 1e-12))
            _, rep = opalg.neumann_inverse(B, n)
            if not rep.passed:
                all_ok = False
            worst = max(worst, rep.measured - rep.bound)
    return ("neumann_inverse_bound", all_ok,
            {"operators_per_n": n_ops, "max_excess": worst})


@_timed
def check_fill_chain_map(config) -> tuple:
    n_inst = config["fill_instances"]
    seed = config["seed"] + 7
    rng = np.random.default_rng(seed)
    w1 = spaces.make_window("zd", 20, 4, dim=1)
    w2 = spaces.make_window("zd", 14, 4, dim=2)
    chain_ok = True
    round_ok = True
    for i in range(n_inst):
        w = (w1, w2)[i % 2]
        q = 1 + (i // 2) % 2
        c = ufchain.random_chain(w, q, n_terms=4, max_len=4,
                                 seed=int(rng.integers(2 ** 31)), coeff="int",
                                 safe_radius=min(w.margin + 8, w.W - 1))
        lhs = fill.simplicial_boundary(fill.fill_chain(c))
        rhs = fill.fill_chain(ufchain.boundary(c))
        if not (lhs == rhs):
            chain_ok = False
        # roundtrip on random unit chains
        s = _random_unit_chain(w, q, rng)
        if not fill.roundtrip_identity(s):
            round_ok = False
    return ("fill_chain_map", chain_ok and round_ok,
            {"instances": n_inst, "chain_map_exact": chain_ok,
             "roundtrip_exact": round_ok})


def _random_unit_chain(w, q, rng):
    s = fill.SimplicialChain(w, q)
    pts = w.safe_points
    tries = 0
    while len(s.support) < 5 and tries < 200:
        tries += 1
        p = int(pts[rng.integers(len(pts))])
        c = w.label(p)
        i = w.index_of
        try:
            if q == 0:
                s.add_simplex((p,), int(rng.integers(1, 4)))
            elif q == 1:
                if w.dim == 1:
                    verts = (p, i((c[0] + 1,)))
                else:
                    choices = [(1, 0), (0, 1), (1, 1)]
                    dx, dy = choices[rng.integers(3)]
                    verts = (p, i((c[0] + dx, c[1] + dy)))
                s.add_simplex(verts, int(rng.integers(1, 4)))
            elif w.dim == 2:
                if rng.random() < 0.5:
                    verts = (p, i((c[0] + 1, c[1])), i((c[0] + 1, c[1] + 1)))
                else:
                    verts = (p, i((c[0], c[1] + 1)), i((c[0] + 1, c[1] + 1)))
                s.add_simplex(verts, int(rng.integers(1, 4)))
        except Exception:
            continue
    return s


@_timed
def check_crucial_estimate(config) -> tuple:
    n_chains = config["crucial_chains"]
    seed = config["seed"] + 8
    rng = np.random.default_rng(seed)
    w = spaces.make_window("zd", 24, 4, dim=2)
    growth = spaces.fit_growth(w)
    profiles = {q: fill.contractibility_profile(w, q, samples=50, rmax=8,
                                                seed=seed) for q in (1, 2)}
    all_ok = True
    worst_ratio = 0.0
    for i in range(n_chains):
        q = 1 + i % 2
        c = ufchain.random_chain(w, q, n_terms=5, max_len=4,
                                 seed=int(rng.integers(2 ** 31)),
                                 safe_radius=9)
        rep = fill.verify_crucial_estimate(c, growth, profiles[q])
        if not rep.passed:
            all_ok = False
        if rep.rhs > 0:
            worst_ratio = max(worst_ratio, rep.lhs / rep.rhs)
    return ("crucial_estimate", all_ok,
            {"chains": n_chains, "D": growth.D, "M": growth.M,
             "C1": profiles[1].C, "N1": profiles[1].N,
             "C2": profiles[2].C, "N2": profiles[2].N,
             "max_lhs_over_rhs": worst_ratio})


@_timed
def check_winding(config) -> tuple:
    W = config["winding_W"]
    margin = config["winding_margin"]
    reports = [demo_winding(k, W, margin) for k in (1, 2, 3, 4)]
    ratios = [r.ratio for r in reports]
    spread = max(abs(r - ratios[0]) for r in ratios)
    k1 = reports[0]
    raw_ok = abs(k1.pairing_stripped - (-1)) < 1e-10
    idx_ok = [r.oracle_index == -r.k for r in reports]
    passed = spread < 1e-9 and raw_ok and all(idx_ok)
    return ("winding_index_demo", passed,
            {"ratio_spread": spread, "k1_stripped": k1.pairing_stripped,
             "oracle_indices": [r.oracle_index for r in reports]})


@_timed
def check_growth_fits(config) -> tuple:
    w1 = spaces.make_window("zd", 16, 0, dim=1)
    w2 = spaces.make_window("zd", 16, 0, dim=2)
    wh = spaces.make_window("heisenberg3", config["heisenberg_W"], 0)
    wt = spaces.make_window("tree3", 7, 0)
    f1 = spaces.fit_growth(w1)
    f2 = spaces.fit_growth(w2)
    fh = spaces.fit_growth(wh)
    ft = spaces.fit_growth(wt)
    ok = (abs(f1.M - 1) <= 0.2 and abs(f2.M - 2) <= 0.2
          and 3.2 <= fh.M <= 4.8 and ft.exponential_flag
          and not f1.exponential_flag and not f2.exponential_flag)
    return ("growth_fits", ok,
            {"M_z1": f1.M, "M_z2": f2.M, "M_heis": fh.M,
             "tree_exponential": ft.exponential_flag})


@_timed
def check_continuity_trend(config) -> tuple:
    trials = config["sweep_trials"]
    seed = config["seed"] + 9
    phi = cochain.Jump(0, 0)
    maxima = {}
    for W in (16, 24, 32):
        w = spaces.make_window("zd", W, 4, dim=1)

        def sampler(s, _w=w):
            return ufchain.random_chain(_w, 1, n_terms=40, max_len=6, seed=s,
                                        coeff="complex", safe_radius=7)

        res = cochain.continuity_sweep(phi, sampler, n=3, trials=trials,
                                       seed=seed)
        maxima[W] = res.max_ratio
    ok = maxima[32] <= 1.2 * maxima[16]
    return ("pairing_continuity_trend", ok,
            {"max_ratio_W16": maxima[16], "max_ratio_W24": maxima[24],
             "max_ratio_W32": maxima[32]})


ALL_CHECKS = [
    check_boundary_identities,
    check_pairing_adjointness,
    check_chain_map,
    check_cyclic_invariance,
    check_product_estimate,
    check_power_estimate,
    check_neumann,
    check_fill_chain_map,
    check_crucial_estimate,
    check_winding,
    check_growth_fits,
    check_continuity_trend,
]


def run_suite(config: dict | None = None, echo=print) -> RunReport:
    """Run every acceptance check with seeds from the config."""
    cfg = dict(DEFAULT_CONFIG)
    if config:
        unknown = set(config) - set(cfg)
        if unknown:
            raise PreconditionError(
                f"cli.run_suite: unknown config keys {sorted(unknown)}")
        cfg.update(config)
    report = RunReport(command="suite run", config=cfg)
    t0 = time.perf_counter()
    for chk in ALL_CHECKS:
        t1 = time.perf_counter()
        try:
            result = chk(cfg)
        except CoarselabError as exc:
            # precondition violations surface as clean per-check failures
            name = chk.__name__.removeprefix("check_")
            result = CheckResult(name, False, {"error": str(exc)},
                                 time.perf_counter() - t1)
        report.checks.append(result)
        if echo:
            echo(result.line())
    report.wall_clock = time.perf_counter() - t0
    return report
