"""Two-qubit tomography and nearest rotated-Werner fitting.

Data are counts for the 36 projector pairs formed by the eigenstates of
``x, y, z`` on each qubit. Reconstruction is linear inversion followed by the
nearest-PSD projection of Smolin, Gambetta and Smith (eigenvalue clipping with
redistribution). Fitting searches ``U`` in SU(2) and ``mu`` to maximize
``F((U (x) I)^dag rho (U (x) I), W_mu)``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .qmat import I2, PAULIS, DensityOperator, dag, fidelity, hermitian_eigensystem, kron, projector
from .states import singlet

BASES = ("x", "y", "z")
OUTCOMES = (1, -1)
COUNTS_COLUMNS = ("setting_a", "setting_b", "outcome_a", "outcome_b", "counts")


class FitConvergenceError(RuntimeError):
    pass


def _eigvec(basis: str, outcome: int) -> np.ndarray:
    op = PAULIS[BASES.index(basis)]
    w, v = np.linalg.eigh(op)
    return v[:, int(np.argmin(np.abs(w - outcome)))]


def single_projector(basis: str, outcome: int) -> np.ndarray:
    return projector(_eigvec(basis, outcome))


SETTINGS = tuple(itertools.product(BASES, BASES, OUTCOMES, OUTCOMES))


@dataclass
class TomographyCounts:
    """Counts per ``(setting_a, setting_b, outcome_a, outcome_b)``.

    ``counts`` may hold expected (non-integer) values for noiseless data.
    """

    counts: dict[tuple[str, str, int, int], float]
    shots_per_setting: int

    def __post_init__(self):
        missing = set(SETTINGS) - set(self.counts)
        if missing:
            raise ValueError(f"tomography data incomplete: {len(missing)} of 36 settings missing")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be non-negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COUNTS_COLUMNS)
            for key in SETTINGS:
                c = self.counts[key]
                w.writerow([*key, int(c) if float(c).is_integer() else f"{c:.12g}"])

    @classmethod
    def from_csv(cls, path, shots_per_setting: int | None = None) -> "TomographyCounts":
        counts = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != COUNTS_COLUMNS:
                raise ValueError(f"expected header {','.join(COUNTS_COLUMNS)}")
            for row in reader:
                key = (row["setting_a"], row["setting_b"], int(row["outcome_a"]), int(row["outcome_b"]))
                counts[key] = float(row["counts"])
        if shots_per_setting is None:
            per = [sum(counts.get((a, b, x, y), 0.0) for x in OUTCOMES for y in OUTCOMES)
                   for a in BASES for b in BASES]
            shots_per_setting = int(round(float(np.mean(per)))) if per else 0
        return cls(counts, shots_per_setting)


def setting_probabilities(rho) -> dict:
    m = np.asarray(rho.matrix if isinstance(rho, DensityOperator) else rho)
    out = {}
    for a, b, x, y in SETTINGS:
        P = kron(single_projector(a, x), single_projector(b, y))
        out[(a, b, x, y)] = max(float(np.einsum("ij,ji->", m, P).real), 0.0)
    return out


def simulate_counts(rho_true, shots_per_setting: int, seed=None) -> TomographyCounts:
    """Poisson counts with mean ``shots * Tr(rho P)`` for each projector pair."""
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    rng = np.random.default_rng(seed)
    probs = setting_probabilities(rho_true)
    counts = {k: int(rng.poisson(shots_per_setting * p)) for k, p in probs.items()}
    return TomographyCounts(counts, shots_per_setting)


def expected_counts(rho_true, shots_per_setting: int) -> TomographyCounts:
    probs = setting_probabilities(rho_true)
    return TomographyCounts({k: shots_per_setting * p for k, p in probs.items()}, shots_per_setting)


def nearest_density_matrix(m: np.ndarray) -> np.ndarray:
    """Closest unit-trace PSD matrix (2-norm) to a unit-trace Hermitian ``m``."""
    w, v = hermitian_eigensystem(m)
    w = w / w.sum() if w.sum() > 0 else w
    lam = w.copy()
    d = len(lam)
    acc = 0.0
    i = d - 1
    while i >= 0 and lam[i] + acc / (i + 1) < 0:
        acc += lam[i]
        lam[i] = 0.0
        i -= 1
    lam[: i + 1] += acc / (i + 1)
    return (v * lam) @ dag(v)


def linear_inversion(counts: TomographyCounts) -> np.ndarray:
    """Unit-trace Hermitian estimate from Pauli correlators (may be non-PSD)."""
    c = counts.counts
    corr = np.zeros((4, 4))  # index 0 is identity
    loc_a = {b: [] for b in BASES}
    loc_b = {b: [] for b in BASES}
    for a, b in itertools.product(BASES, BASES):
        tot = sum(c[(a, b, x, y)] for x in OUTCOMES for y in OUTCOMES)
        if tot <= 0:
            raise ValueError(f"no counts recorded for setting ({a}, {b})")
        p = {(x, y): c[(a, b, x, y)] / tot for x in OUTCOMES for y in OUTCOMES}
        corr[BASES.index(a) + 1, BASES.index(b) + 1] = sum(x * y * q for (x, y), q in p.items())
        loc_a[a].append(sum(x * q for (x, y), q in p.items()))
        loc_b[b].append(sum(y * q for (x, y), q in p.items()))
    corr[0, 0] = 1.0
    for k, b in enumerate(BASES, start=1):
        corr[k, 0] = np.mean(loc_a[b])
        corr[0, k] = np.mean(loc_b[b])
    ops = (I2,) + PAULIS
    rho = sum(corr[i, j] * kron(ops[i], ops[j]) for i in range(4) for j in range(4)) / 4
    return (rho + dag(rho)) / 2


def reconstruct(counts: TomographyCounts) -> DensityOperator:
    if not any(v > 0 for v in counts.counts.values()):
        raise ValueError("all counts are zero")
    est = nearest_density_matrix(linear_inversion(counts))
    return DensityOperator(est, (2, 2))


# ---------------------------------------------------------------------------
# Werner fit

_PS = singlet().matrix
_PERP = np.eye(4) - _PS
_GOLDEN = (math.sqrt(5) - 1) / 2


def euler_unitary(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``Rz(alpha) Ry(beta) Rz(gamma)`` in SU(2)."""
    ea, eg = np.exp(-0.5j * alpha), np.exp(-0.5j * gamma)
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    return np.array([[ea * eg * c, -ea * np.conj(eg) * s],
                     [np.conj(ea) * eg * s, np.conj(ea) * np.conj(eg) * c]])


def _singlet_basis() -> np.ndarray:
    """Unitary whose first column is the singlet."""
    w, v = np.linalg.eigh(_PS)
    return v[:, ::-1]


_SB = _singlet_basis()


def _werner_fidelity(rho_sb: np.ndarray, mu: float) -> float:
    """Fidelity with ``W_mu`` for ``rho`` expressed in the singlet basis.

    There ``sqrt(W_mu)`` is diagonal, ``(sqrt((1+3mu)/4), sqrt((1-mu)/4) x3)``.
    """
    a = math.sqrt((1 + 3 * mu) / 4)
    b = math.sqrt(max(1 - mu, 0.0) / 4)
    d = np.array([a, b, b, b])
    w = np.linalg.eigvalsh(rho_sb * d * d[:, None])
    return sum(math.sqrt(x) for x in w.tolist() if x > 0) ** 2


def golden_section_max(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    # endpoints matter: mu = 0 and mu = 1 are legitimate optima
    cands = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fbest, xbest = max(cands)
    return xbest, fbest


def _best_mu(rho: np.ndarray, angles, tol: float):
    G = kron(euler_unitary(*angles), I2) @ _SB
    r = dag(G) @ rho @ G
    return golden_section_max(lambda mu: _werner_fidelity(r, mu), 0.0, 1.0, tol)


def angles_from_unitary(U: np.ndarray) -> np.ndarray:
    """ZYZ Euler angles of ``U`` (up to global phase)."""
    U = U / np.sqrt(np.linalg.det(U))
    c, s = abs(U[0, 0]), abs(U[1, 0])
    beta = 2 * math.atan2(s, c)
    plus = -2 * np.angle(U[0, 0]) if c > 1e-12 else 0.0
    minus = 2 * np.angle(U[1, 0]) if s > 1e-12 else 0.0
    return np.array([(plus + minus) / 2, beta, (plus - minus) / 2])


def _initial_angles(rho: np.ndarray) -> np.ndarray:
    """Start at the rotation that best aligns the correlation matrix with ``-I``."""
    T = np.array([[np.trace(rho @ kron(a, b)).real for b in PAULIS] for a in PAULIS])
    u, _, vt = np.linalg.svd(-T)
    R = u @ vt
    if np.linalg.det(R) < 0:
        return np.zeros(3)
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    U = w * I2 - 1j * (x * PAULIS[0] + y * PAULIS[1] + z * PAULIS[2])
    return angles_from_unitary(U)


@dataclass
class WernerFit:
    mu: float
    unitary: np.ndarray
    fidelity: float
    cost: float
    angles: np.ndarray = field(default_factory=lambda: np.zeros(3))
    restarts: int = 0

    def to_json(self) -> dict:
        return {
            "mu": self.mu,
            "unitary_re": self.unitary.real.tolist(),
            "unitary_im": self.unitary.imag.tolist(),
            "fidelity": self.fidelity,
            "cost": self.cost,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    def fitted_state(self) -> np.ndarray:
        G = kron(self.unitary, I2)
        W = self.mu * _PS + (1 - self.mu) / 4 * np.eye(4)
        return G @ W @ dag(G)


def werner_fit(
    rho,
    restarts: int = 20,
    seed: int | None = 0,
    xatol: float = 1e-10,
    coarse_tol: float = 1e-3,
) -> WernerFit:
    """Nearest rotated Werner state to a two-qubit density operator.

    Every restart runs a Nelder-Mead search over ZYZ Euler angles at a coarse
    tolerance, with ``mu`` optimized by golden section for each trial angle.
    The best restart is then polished to ``xatol``. The first start is taken
    from the polar decomposition of the correlation matrix.
    """
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError("werner_fit expects a two-qubit state")
    rng = np.random.default_rng(seed)
    starts = [_initial_angles(m)]
    starts += [rng.uniform([-math.pi, 0, -math.pi], [math.pi, math.pi, math.pi]) for _ in range(restarts - 1)]

    def neg(angles, tol):
        return -_best_mu(m, angles, tol)[1]

    results = []
    for x0 in starts:
        res = minimize(neg, x0, args=(coarse_tol,), method="Nelder-Mead",
                       options={"xatol": coarse_tol, "fatol": 1e-9, "maxiter": 2000})
        results.append(res)
    ok = [r for r in results if np.all(np.isfinite(r.x))]
    if not ok:
        raise FitConvergenceError("no restart produced a finite result")
    best = min(ok, key=lambda r: r.fun)
    res = minimize(neg, best.x, args=(1e-11,), method="Nelder-Mead",
                   options={"xatol": xatol, "fatol": 1e-15, "maxiter": 20000,
                            "initial_simplex": best.x + 1e-3 * np.vstack([np.zeros(3), np.eye(3)])})
    if not res.success:
        raise FitConvergenceError(f"polishing step did not converge: {res.message}")
    mu, f = _best_mu(m, res.x, 1e-11)
    f = min(f, 1.0)
    return WernerFit(mu=float(mu), unitary=euler_unitary(*res.x), fidelity=f, cost=1 - f,
                     angles=res.x, restarts=len(starts))


def unitary_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Half the trace norm of ``u - e^{i phi} v`` minimized over the global phase."""
    ov = np.trace(dag(v) @ u)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return 0.5 * float(np.sum(np.linalg.svd(u - phase * v, compute_uv=False)))


def random_su2(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def rotated_werner(mu: float, U: np.ndarray) -> DensityOperator:
    G = kron(U, I2)
    W = mu * _PS + (1 - mu) / 4 * np.eye(4)
    return DensityOperator(G @ W @ dag(G), (2, 2))
