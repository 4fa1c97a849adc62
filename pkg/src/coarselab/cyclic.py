"""Chain-level cyclic homology over window operators and the rough character.

A CyclicTensor is a formal complex-weighted sum of (n+1)-tuples of operators
sharing one window and fiber dimension, together with a symbolic power of
(2 pi i) kept separate so index integrality stays visible after stripping it.

The rough character chi sends a tensor to a uniformly finite chain by
antisymmetrized local traces: for point projections P_y,

  chi(A_0 ... A_n)(y_0..y_n) = 1/(n+1)! sum_sigma sign(sigma)
        tr(A_0 P_{y_sigma(0)} ... A_n P_{y_sigma(n)})

and on the finite window each trace is the block trace of
A_0[z_n, z_0] A_1[z_0, z_1] ... A_n[z_{n-1}, z_n].  Antisymmetrization is
computed exactly for n <= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from ._accel import coalesce, path_products_deg2
from .cochain import CoarseCochain, pair
from .errors import DegreeError, MarginError, PreconditionError
from .opalg import BandedOperator, identity, op_norm, safe_projector
from .spaces import Window
from .ufchain import UfChain, boundary_arrays

TWO_PI_I = 2j * math.pi
MAX_DEGREE = 3


def _perm_sign(p) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j = i
        clen = 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


@dataclass
class CyclicTensor:
    """Formal sum of weighted operator tuples of fixed arity degree+1."""
    degree: int
    terms: list          # list of (complex weight, tuple of BandedOperator)
    tau_power: int = 0   # symbolic (2 pi i)^tau_power common prefactor
    window: Window = field(init=False, default=None)
    fiber: int = field(init=False, default=1)

    def __post_init__(self):
        if self.degree < 0:
            raise DegreeError("cyclic: tensor degree must be >= 0")
        if self.degree > MAX_DEGREE:
            raise DegreeError(
                f"cyclic: degrees above {MAX_DEGREE} are outside the desk-scale "
                "build (exact antisymmetrization cap)")
        cleaned = []
        for w, ops in self.terms:
            ops = tuple(ops)
            if len(ops) != self.degree + 1:
                raise DegreeError(
                    f"cyclic: term arity {len(ops)} does not match degree "
                    f"{self.degree}")
            if self.window is None:
                self.window = ops[0].window
                self.fiber = ops[0].fiber
            for A in ops:
                if A.window is not self.window or A.fiber != self.fiber:
                    raise DegreeError(
                        "cyclic: all operators in a tensor must share one "
                        "window and fiber dimension")
            if w != 0:
                cleaned.append((complex(w), ops))
        self.terms = cleaned

    def total_propagation(self) -> int:
        return max((sum(A.propagation for A in ops) for _, ops in self.terms),
                   default=0)

    def numeric_prefactor(self) -> complex:
        return TWO_PI_I ** self.tau_power


def lambda_op(t: CyclicTensor) -> CyclicTensor:
    """Signed cyclic rotation: (a_0 .. a_n) -> (-1)^n (a_n a_0 .. a_{n-1})."""
    sign = -1 if t.degree % 2 else 1
    terms = [(sign * w, (ops[-1],) + ops[:-1]) for w, ops in t.terms]
    return CyclicTensor(t.degree, terms, t.tau_power)


def hochschild_b(t: CyclicTensor) -> CyclicTensor:
    """Hochschild boundary; degree drops by one."""
    if t.degree == 0:
        raise DegreeError("cyclic.hochschild_b: degree 0 tensors have no boundary")
    n = t.degree
    out = []
    for w, ops in t.terms:
        for j in range(n):
            sign = -1 if j % 2 else 1
            merged = ops[:j] + (ops[j] @ ops[j + 1],) + ops[j + 2:]
            out.append((sign * w, merged))
        sign = -1 if n % 2 else 1
        out.append((sign * w, (ops[-1] @ ops[0],) + ops[1:-1]))
    return CyclicTensor(n - 1, out, t.tau_power)


# -- Chern characters ------------------------------------------------------------

def chern0(e: BandedOperator, n: int) -> CyclicTensor:
    """Even character of an idempotent: (2n)!/n! (2 pi i)^n e ox .. ox e."""
    defect = op_norm((e @ e) - e)
    if defect >= 1e-8:
        raise PreconditionError(
            f"cyclic.chern0: ||e^2 - e||_op = {defect:.2e} is not an idempotent")
    weight = math.factorial(2 * n) / math.factorial(n)
    return CyclicTensor(2 * n, [(weight, (e,) * (2 * n + 1))], tau_power=n)


def chern1(u: BandedOperator, n: int,
           u_inv: BandedOperator | None = None) -> CyclicTensor:
    """Odd character of an invertible: alternating (u^-1 - 1) ox (u - 1) tuple."""
    if u_inv is None:
        u_inv = u.adjoint()
    P = safe_projector(u.window)
    defect = op_norm(P @ ((u @ u_inv) - identity(u.window, u.fiber)) @ P)
    if defect >= 1e-8:
        raise PreconditionError(
            f"cyclic.chern1: ||u u^-1 - id||_op = {defect:.2e} on the "
            "margin-safe core; not an invertible/inverse pair")
    one = identity(u.window, u.fiber)
    a = u_inv - one
    b = u - one
    weight = math.factorial(2 * n + 1) / math.factorial(n + 1)
    return CyclicTensor(2 * n + 1, [(weight, (a, b) * (n + 1))],
                        tau_power=n + 1)


# -- the rough character ----------------------------------------------------------

def _antisymmetrize(tuples: np.ndarray, values: np.ndarray, arity: int):
    parts_t = []
    parts_v = []
    for tau in permutations(range(arity)):
        parts_t.append(tuples[:, list(tau)])
        parts_v.append(_perm_sign(tau) * values)
    t, v = coalesce(np.ascontiguousarray(np.concatenate(parts_t)),
                    np.concatenate(parts_v))
    return t, v / math.factorial(arity)


def _paths_scalar(ops) -> tuple[np.ndarray, np.ndarray]:
    """Index tuples and values of the identity-order local trace products."""
    n = len(ops) - 1
    if n == 0:
        diag = ops[0].mat.diagonal()
        idx = np.flatnonzero(diag)
        return idx[:, None].astype(np.int64), diag[idx]
    if n == 1:
        P = (ops[0].mat.T.multiply(ops[1].mat)).tocoo()
        return (np.stack([P.row, P.col], axis=1).astype(np.int64),
                P.data.astype(np.complex128))
    if n == 2:
        A1 = ops[1].mat.tocoo()
        A2 = ops[2].mat.tocsr()
        A0c = ops[0].mat.tocsc()
        return path_products_deg2(
            A1.row.astype(np.int64), A1.col.astype(np.int64),
            A1.data.astype(np.complex128),
            A2.indptr.astype(np.int64), A2.indices.astype(np.int64),
            A2.data.astype(np.complex128),
            A0c.indptr.astype(np.int64), A0c.indices.astype(np.int64),
            A0c.data.astype(np.complex128))
    # n == 3: join A1, A2, A3 rows then close through A0's columns
    A1 = ops[1].mat.tocoo()
    A2 = ops[2].mat.tocsr()
    A3 = ops[3].mat.tocsr()
    A0c = ops[0].mat.tocsc()
    tuples = []
    values = []
    for u, v, d1 in zip(A1.row, A1.col, A1.data):
        for iw in range(A2.indptr[v], A2.indptr[v + 1]):
            w = A2.indices[iw]
            d12 = d1 * A2.data[iw]
            xs3 = A3.indices[A3.indptr[w]:A3.indptr[w + 1]]
            ds3 = A3.data[A3.indptr[w]:A3.indptr[w + 1]]
            xs0 = A0c.indices[A0c.indptr[u]:A0c.indptr[u + 1]]
            ds0 = A0c.data[A0c.indptr[u]:A0c.indptr[u + 1]]
            common, i3, i0 = np.intersect1d(xs3, xs0, assume_unique=True,
                                            return_indices=True)
            for x, a3, a0 in zip(common, ds3[i3], ds0[i0]):
                tuples.append((u, v, w, x))
                values.append(a0 * d12 * a3)
    if not tuples:
        return np.empty((0, 4), dtype=np.int64), np.empty(0, np.complex128)
    return np.array(tuples, dtype=np.int64), np.array(values, np.complex128)


def _paths_block(ops) -> tuple[np.ndarray, np.ndarray]:
    """Generic (any fiber) path products via explicit block walks."""
    n = len(ops) - 1
    f = ops[0].fiber
    blocks = []
    rows = []
    for A in ops:
        coo = A.mat.tocoo()
        blk = {}
        for r, c, v in zip(coo.row, coo.col, coo.data):
            blk.setdefault((r // f, c // f),
                           np.zeros((f, f), np.complex128))[r % f, c % f] = v
        by_row = {}
        for (p, q) in blk:
            by_row.setdefault(p, []).append(q)
        blocks.append(blk)
        rows.append(by_row)
    out_t = []
    out_v = []
    if n == 0:
        for (p, q), blk in blocks[0].items():
            if p == q:
                val = complex(np.trace(blk))
                if val != 0:
                    out_t.append((p,))
                    out_v.append(val)
    else:
        def extend(chain, prod):
            # chain holds z_0..z_k with A_1..A_k multiplied into prod
            k = len(chain) - 1
            if k == n:
                b0 = blocks[0].get((chain[-1], chain[0]))
                if b0 is not None:
                    val = complex(np.trace(b0 @ prod))
                    if val != 0:
                        out_t.append(tuple(chain))
                        out_v.append(val)
                return
            for q in rows[k + 1].get(chain[-1], ()):
                extend(chain + [q], prod @ blocks[k + 1][(chain[-1], q)])

        for (p, q), blk in blocks[1].items():
            extend([p, q], blk)
    if not out_t:
        return (np.empty((0, n + 1), dtype=np.int64),
                np.empty(0, dtype=np.complex128))
    return np.array(out_t, dtype=np.int64), np.array(out_v, np.complex128)


def chi_arrays(t: CyclicTensor, apply_prefactor: bool = True):
    """Raw (tuples, values) arrays of the character chain of a tensor."""
    w = t.window
    if w is None:
        raise DegreeError("cyclic.chi: empty tensor has no window")
    total_prop = t.total_propagation()
    if total_prop > w.margin:
        raise MarginError(
            f"cyclic.chi: total operator propagation {total_prop} exceeds the "
            f"window margin {w.margin}")
    arity = t.degree + 1
    parts_t = [np.empty((0, arity), dtype=np.int64)]
    parts_v = [np.empty(0, dtype=np.complex128)]
    for weight, ops in t.terms:
        if t.fiber == 1:
            tt, vv = _paths_scalar(ops)
        else:
            tt, vv = _paths_block(ops)
        if len(vv):
            parts_t.append(tt)
            parts_v.append(weight * vv)
    tuples = np.concatenate(parts_t)
    values = np.concatenate(parts_v)
    tuples, values = _antisymmetrize(tuples, values, arity)
    if apply_prefactor and t.tau_power:
        values = values * t.numeric_prefactor()
    return tuples, values


def chi(t: CyclicTensor) -> UfChain:
    """Rough character chain of a cyclic tensor (numeric weights applied)."""
    tuples, values = chi_arrays(t)
    return UfChain.from_arrays(t.window, t.degree, tuples, values)


def chain_map_check(t: CyclicTensor) -> float:
    """Sup residual of boundary(chi(t)) - chi(hochschild_b(t)) on safe tuples."""
    w = t.window
    total_prop = t.total_propagation()
    w.require_margin(2 * total_prop, "cyclic.chain_map_check")
    if t.degree == 0:
        raise DegreeError("cyclic.chain_map_check: needs degree >= 1")
    t1, v1 = chi_arrays(t, apply_prefactor=False)
    bt1, bv1 = boundary_arrays(w, t.degree, t1, v1)
    t2, v2 = chi_arrays(hochschild_b(t), apply_prefactor=False)
    dt, dv = coalesce(np.concatenate([bt1, t2]), np.concatenate([bv1, -v2]))
    if len(dv) == 0:
        return 0.0
    safe = w.safe_mask[dt].all(axis=1)
    if not safe.any():
        return 0.0
    return float(np.abs(dv[safe]).max())


@dataclass
class PairingResult:
    raw: complex
    tau_power: int
    stripped: complex

    def __repr__(self):
        return (f"PairingResult(raw={self.raw:.6g}, "
                f"stripped={self.stripped:.6g}, tau_power={self.tau_power})")


def character_pairing(phi: CoarseCochain, t: CyclicTensor) -> PairingResult:
    """<phi, chi(t)>, reported both raw and with (2 pi i)^tau stripped."""
    chain = chi(t)
    raw = complex(pair(phi, chain))
    stripped = raw / (TWO_PI_I ** t.tau_power) if t.tau_power else raw
    return PairingResult(raw=raw, tau_power=t.tau_power, stripped=stripped)


def local_trace_sum(e: BandedOperator) -> complex:
    """Sum of local traces of a degree-0 character over margin-safe points."""
    tuples, values = chi_arrays(CyclicTensor(0, [(1.0, (e,))]))
    if len(values) == 0:
        return 0j
    safe = e.window.safe_mask[tuples[:, 0]]
    return complex(values[safe].sum())
