"""Finite-setting steering: measurement axes, honest steering parameter,
local-hidden-state cheating bounds, and the (mu, p) region classifier.

A cheating (untrusted) party holding a hidden variable can do no better than
send the trusted side a pure qubit state ``w`` and answer a chosen subset of
settings with fixed signs. For a signed subset ``s`` with ``m`` nonzero
entries the best ``w`` is aligned with the resultant ``sum_k s_k u_k``, so the
correlation summed over answered settings is ``D(m) = max ||sum_k s_k u_k||``.
Mixing such deterministic strategies with a silent one gives the bound at any
reporting rate.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .qmat import DensityOperator, bloch_operator, expectation, kron

PHI = (1 + math.sqrt(5)) / 2
SUPPORTED_N = (6, 10, 16)


def _cyclic(v):
    a, b, c = v
    return [(a, b, c), (c, a, b), (b, c, a)]


def icosahedron_axes() -> np.ndarray:
    """Six axes through antipodal vertex pairs of the icosahedron ``(0, +-1, +-phi)``."""
    pts = _cyclic((0, 1, PHI)) + _cyclic((0, -1, PHI))
    a = np.array(pts, dtype=float)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def dodecahedron_axes() -> np.ndarray:
    """Ten axes of the dodecahedron dual to :func:`icosahedron_axes`.

    The vertices ``(+-1, +-1, +-1)`` and cyclic ``(0, +-phi, +-1/phi)`` sit on
    the face centres of that icosahedron.
    """
    pts = [(1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1)]
    pts += _cyclic((0, PHI, 1 / PHI)) + _cyclic((0, -PHI, 1 / PHI))
    a = np.array(pts, dtype=float)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class MeasurementAxes:
    axes: np.ndarray

    def __post_init__(self):
        a = np.array(self.axes, dtype=float)
        if a.ndim != 2 or a.shape[1] != 3 or len(a) == 0:
            raise ValueError("axes must be an (n, 3) array")
        if np.max(np.abs(np.linalg.norm(a, axis=1) - 1)) > 1e-12:
            raise ValueError("axes must be unit vectors")
        g = np.abs(a @ a.T) - np.eye(len(a))
        if np.max(g) > 1 - 1e-9:
            raise ValueError("axes must be pairwise non-collinear")
        a.setflags(write=False)
        object.__setattr__(self, "axes", a)

    @property
    def n(self) -> int:
        return len(self.axes)

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.axes)


def measurement_axes(n: int) -> MeasurementAxes:
    """Platonic-solid axis sets: 6 (icosahedron), 10 (dodecahedron), 16 (both)."""
    if n == 6:
        return MeasurementAxes(icosahedron_axes())
    if n == 10:
        return MeasurementAxes(dodecahedron_axes())
    if n == 16:
        return MeasurementAxes(np.vstack([icosahedron_axes(), dodecahedron_axes()]))
    raise ValueError(f"unsupported number of settings n={n}; choose from {SUPPORTED_N}")


def _as_axes(axes) -> MeasurementAxes:
    if isinstance(axes, MeasurementAxes):
        return axes
    if isinstance(axes, (int, np.integer)):
        return measurement_axes(int(axes))
    return MeasurementAxes(axes)


# ---------------------------------------------------------------------------
# honest steering parameter


def _qubit_block(state: DensityOperator) -> np.ndarray:
    """Two-qubit block of a ``2 (x) 3`` state, normalized (Bob's qubit present)."""
    t = state.matrix.reshape(2, 3, 2, 3)[:, :2, :, :2].reshape(4, 4)
    w = np.trace(t).real
    if w <= 0:
        raise ValueError("state has no population in Bob's qubit subspace")
    return t / w


def honest_steering_parameter(
    state: DensityOperator,
    axes,
    steering_party: str = "alice",
    post_select_qubit: bool = True,
) -> float:
    """Steering parameter for honest parties measuring the same axis.

    The untrusted party announces the negated outcome, so singlet
    anticorrelation gives positive ``S``. On a ``2 (x) 3`` state the rounds in
    which Bob holds the vacuum are dropped: by the trusted Bob when
    ``post_select_qubit`` is set, and always when Bob is the untrusted party
    (he has nothing to report). With a trusted Bob who does not post-select,
    vacuum rounds count with zero correlation.
    """
    ax = _as_axes(axes)
    party = steering_party.lower()
    if party not in ("alice", "bob"):
        raise ValueError(f"steering_party must be 'alice' or 'bob', got {steering_party!r}")
    if state.dims == (2, 2):
        rho = state.matrix
    elif state.dims == (2, 3):
        if post_select_qubit or party == "bob":
            rho = _qubit_block(state)
        else:
            rho = state.matrix.reshape(2, 3, 2, 3)[:, :2, :, :2].reshape(4, 4)
    else:
        raise ValueError(f"expected a 2x2 or 2x3 state, got dims {state.dims}")
    total = 0.0
    for u in ax:
        s = bloch_operator(u)
        total -= expectation(rho, kron(s, s))
    return total / ax.n


# ---------------------------------------------------------------------------
# cheating bounds


def exhaustive_resultants(axes) -> np.ndarray:
    """``D(m)`` for ``m = 0..n`` by brute force over ``{-1, 0, +1}^n``.

    Memory grows as ``3^n``; intended as an oracle for ``n <= 12``.
    """
    u = _as_axes(axes).axes
    n = len(u)
    signs = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=float)
    norms = np.linalg.norm(signs @ u, axis=1)
    counts = np.abs(signs).sum(axis=1).astype(int)
    out = np.zeros(n + 1)
    np.maximum.at(out, counts, norms)
    return out


def _incumbent(u: np.ndarray, m: int) -> tuple[float, np.ndarray]:
    """Good signed subset of size ``m`` by top-``m`` projection onto trial directions."""
    n = len(u)
    trial = [u]
    for i, j in itertools.combinations(range(n), 2):
        for s in (1.0, -1.0):
            v = u[i] + s * u[j]
            trial.append(v[None] / np.linalg.norm(v))
    dirs = np.vstack(trial)
    best, best_s = -1.0, None
    for _ in range(3):
        proj = dirs @ u.T
        idx = np.argsort(-np.abs(proj), axis=1, kind="stable")[:, :m]
        sg = np.sign(np.take_along_axis(proj, idx, axis=1))
        sg[sg == 0] = 1.0
        res = np.einsum("ck,ckd->cd", sg, u[idx])
        norms = np.linalg.norm(res, axis=1)
        k = int(np.argmax(norms))
        if norms[k] > best:
            best = float(norms[k])
            best_s = np.zeros(n)
            best_s[idx[k]] = sg[k]
        dirs = res / np.where(norms > 0, norms, 1.0)[:, None]
    return best, best_s


def _branch_and_bound(u: np.ndarray, m: int, floor: float, known: Sequence[float]):
    """Exact max of ``||sum s_k u_k||`` over signed subsets with ``m`` nonzeros.

    Depth-first over axes in order with the first nonzero sign fixed to +1
    (antipodal symmetry). A node with partial resultant ``r`` and ``k`` picks
    left is pruned when ``|r|^2 + 2 * top_k |r . u_j| + known[k]^2`` cannot beat
    the incumbent; ``known[k]`` bounds any ``k``-subset's resultant norm.
    """
    n = len(u)
    rows = [tuple(map(float, v)) for v in u]
    best = [floor, None]
    signs = [0] * n

    def rec(i, rx, ry, rz, c, first):
        k = m - c
        if k == 0:
            val = math.sqrt(rx * rx + ry * ry + rz * rz)
            if val > best[0]:
                best[0] = val
                best[1] = list(signs)
            return
        if n - i < k:
            return
        rr = rx * rx + ry * ry + rz * rz
        if rr > 0:
            dots = sorted((abs(rx * a + ry * b + rz * d) for a, b, d in rows[i:]), reverse=True)
            t = sum(dots[:k])
        else:
            t = 0.0
        if rr + 2 * t + known[k] ** 2 <= best[0] ** 2:
            return
        a, b, d = rows[i]
        signs[i] = 1
        rec(i + 1, rx + a, ry + b, rz + d, c + 1, False)
        if not first:
            signs[i] = -1
            rec(i + 1, rx - a, ry - b, rz - d, c + 1, False)
        signs[i] = 0
        rec(i + 1, rx, ry, rz, c, first)

    rec(0, 0.0, 0.0, 0.0, 0, True)
    return best[0], np.array(best[1], dtype=float)


@dataclass(frozen=True)
class SignedSubset:
    """Deterministic cheat: answer ``signs[k]`` on setting ``k`` (0 = stay silent)
    while preparing the trusted side in the pure state with Bloch vector ``hidden``."""

    signs: np.ndarray
    hidden: np.ndarray
    resultant: float

    @property
    def m(self) -> int:
        return int(np.count_nonzero(self.signs))


def _resultant_table(u: np.ndarray) -> list[SignedSubset]:
    n = len(u)
    known = [0.0] + [float(k) for k in range(1, n + 1)]
    table = [SignedSubset(np.zeros(n), np.array([0.0, 0.0, 1.0]), 0.0)]
    for m in range(1, n + 1):
        inc, _ = _incumbent(u, m)
        val, s = _branch_and_bound(u, m, inc * (1 - 1e-12) - 1e-12, known)
        known[m] = val
        r = s @ u
        table.append(SignedSubset(s, r / np.linalg.norm(r), val))
    return table


@lru_cache(maxsize=32)
def _cached_table(key: bytes, n: int) -> tuple[SignedSubset, ...]:
    u = np.frombuffer(key, dtype=float).reshape(n, 3)
    return tuple(_resultant_table(u))


def optimal_subsets(axes) -> tuple[SignedSubset, ...]:
    """Optimal signed subset for every response count ``m = 0..n``."""
    u = _as_axes(axes).axes
    return _cached_table(np.ascontiguousarray(u).tobytes(), len(u))


def max_resultants(axes) -> np.ndarray:
    """``D(m)`` for ``m = 0..n`` via branch and bound."""
    return np.array([t.resultant for t in optimal_subsets(axes)])


@dataclass(frozen=True)
class CheatBound:
    """Best local-hidden-state steering parameter at reporting rate ``eta``.

    ``strategy`` lists ``(probability, SignedSubset)`` pairs; whatever
    probability is left over goes to the never-respond strategy.
    """

    n: int
    eta: float
    value: float
    strategy: tuple[tuple[float, SignedSubset], ...] = field(repr=False)

    @property
    def silent_probability(self) -> float:
        return max(0.0, 1.0 - sum(w for w, _ in self.strategy))


def _mix(n: int, eta: float, per_m: np.ndarray):
    """Solve the mixing LP over response counts.

    maximize sum R_m f_m / eta  s.t.  sum R_m = eta,  sum R_m n/m <= 1,  R >= 0
    where ``R_m`` is the probability of playing count ``m`` times its response
    rate ``m/n``. Optimal vertices use one count, or two with both
    constraints tight.
    """
    best_val, best_sup = -1.0, None
    tol = 1e-12
    for m in range(1, n + 1):
        if eta * n / m <= 1 + tol and per_m[m] > best_val:
            best_val, best_sup = per_m[m], ((m, eta),)
    for m1 in range(1, n + 1):
        for m2 in range(m1 + 1, n + 1):
            a1, a2 = n / m1, n / m2
            # r1 + r2 = eta ; r1 a1 + r2 a2 = 1
            r1 = (1 - eta * a2) / (a1 - a2)
            r2 = eta - r1
            if r1 < -tol or r2 < -tol:
                continue
            r1, r2 = max(r1, 0.0), max(r2, 0.0)
            val = (r1 * per_m[m1] + r2 * per_m[m2]) / eta
            if val > best_val + 1e-15:
                best_val, best_sup = val, ((m1, r1), (m2, r2))
    return best_val, best_sup


def deterministic_bound(axes, eta: float) -> CheatBound:
    """Optimal cheating bound ``C_n(eta)`` for the given axes."""
    eta = float(eta)
    if not 0 < eta <= 1:
        raise ValueError(f"eta={eta!r} must lie in (0, 1]")
    subsets = optimal_subsets(axes)
    n = len(subsets) - 1
    per_m = np.array([0.0] + [s.resultant / s.m for s in subsets[1:]])
    value, support = _mix(n, eta, per_m)
    strategy = tuple((r * n / m, subsets[m]) for m, r in support if r > 0)
    return CheatBound(n=n, eta=eta, value=float(min(value, 1.0)), strategy=strategy)


def bound_table(axes, etas) -> np.ndarray:
    return np.array([deterministic_bound(axes, e).value for e in etas])


def asymptotic_bound(eta):
    """Continuum-of-settings bound ``1 - eta/2``.

    The optimal cheat answers when ``|u . w| >= 1 - eta`` (a pair of polar caps
    holding fraction ``eta`` of uniformly random axes); the conditional mean
    of ``|u . w|`` on those caps is ``1 - eta/2``.
    """
    e = np.asarray(eta, dtype=float)
    if np.any(e <= 0) or np.any(e > 1):
        raise ValueError("eta must lie in (0, 1]")
    out = 1 - e / 2
    return float(out) if out.ndim == 0 else out


def asymptotic_bound_mc(eta: float, n_axes: int = 10_000, seed: int = 0) -> float:
    """Monte Carlo estimate of the spherical-cap cheat over random axes."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n_axes, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = np.abs(u[:, 2])
    k = max(1, int(round(eta * n_axes)))
    return float(np.sort(t)[::-1][:k].mean())


# ---------------------------------------------------------------------------
# regions


class Region(str, enum.Enum):
    TWO_WAY = "TWO_WAY"
    ONE_WAY_PROJECTIVE = "ONE_WAY_PROJECTIVE"
    ONE_WAY_POVM = "ONE_WAY_POVM"
    NO_PROJECTIVE_STEERING = "NO_PROJECTIVE_STEERING"


@dataclass(frozen=True)
class RegionVerdict:
    label: Region
    mu: float
    p: float

    @property
    def p_proj(self) -> float:
        return 2 * self.mu - 1

    @property
    def p_povm(self) -> float:
        return (2 * self.mu + 1) / 3


def classify(mu: float, p_total: float) -> RegionVerdict:
    """Steering regime of the lossy Werner state.

    ``p_total`` is the full probability that Bob's qubit is replaced by the
    vacuum; composing it from filter loss and detector efficiency is left to
    the caller.
    """
    mu, p = float(mu), float(p_total)
    if not (0 <= mu <= 1 and 0 <= p <= 1):
        raise ValueError(f"(mu, p)=({mu}, {p}) outside the unit square")
    if mu <= 0.5:
        label = Region.NO_PROJECTIVE_STEERING
    elif p <= 2 * mu - 1:
        label = Region.TWO_WAY
    elif p <= (2 * mu + 1) / 3:
        label = Region.ONE_WAY_PROJECTIVE
    else:
        label = Region.ONE_WAY_POVM
    return RegionVerdict(label, mu, p)


def boundary_curves(mu_grid) -> np.ndarray:
    """Rows ``(mu, 2 mu - 1, (2 mu + 1)/3)``."""
    mu = np.asarray(mu_grid, dtype=float)
    if np.any(mu < 0.5) or np.any(mu > 1):
        raise ValueError("mu grid must lie within [1/2, 1]")
    return np.column_stack([mu, 2 * mu - 1, (2 * mu + 1) / 3])
