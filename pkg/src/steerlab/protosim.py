"""Monte Carlo simulation of the round-based steering protocol.

Each round the trusted party picks one of ``n`` settings uniformly at random
and announces it. The untrusted party either reports a sign or stays silent.
The trusted side keeps only rounds in which it holds a qubit. ``S_n`` is the
pooled mean of ``a * b`` over reported rounds and ``eta_observed`` the
fraction of kept rounds with a report.

Randomness: a master seed is split with ``SeedSequence.spawn`` into one stream
per fixed-size block of rounds, so the sampled outcome does not depend on how
many worker threads process the blocks.
"""

from __future__ import annotations

import json
import math
import os
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import steer
from .qmat import DensityOperator, bloch_operator, kron
from .states import lossy_channel, oneway_povm_state, vacuum_weight, werner

BLOCK = 1 << 17
STRATEGIES = ("honest", "dishonest")
DIRECTIONS = ("alice_steers_bob", "bob_steers_alice")
STATES = ("lossy", "oneway_povm")


def worker_count() -> int:
    env = os.environ.get("STEERLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"STEERLAB_THREADS must be an integer, got {env!r}") from None
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class ProtocolConfig:
    mu: float = 1.0
    p: float = 0.0
    eta_detector: float = 1.0
    n_settings: int = 16
    rounds: int = 100_000
    strategy: str = "honest"
    direction: str = "alice_steers_bob"
    seed: int | None = None
    systematic_tilt_deg: float = 0.5
    state: str = "lossy"

    def __post_init__(self):
        for name in ("mu", "p", "eta_detector"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v!r} outside [0, 1]")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.n_settings not in steer.SUPPORTED_N:
            raise ValueError(f"n_settings must be one of {steer.SUPPORTED_N}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.state not in STATES:
            raise ValueError(f"state must be one of {STATES}")
        if self.systematic_tilt_deg < 0:
            raise ValueError("systematic_tilt_deg must be >= 0")
        if self.strategy == "dishonest" and self.eta_detector <= 0:
            raise ValueError("a dishonest run needs a positive target eta")

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ProtocolConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self) -> "ProtocolConfig":
        """Return a copy with a concrete seed (drawn from OS entropy if unset)."""
        if self.seed is not None:
            return self
        return ProtocolConfig.from_dict({**self.to_dict(), "seed": secrets.randbits(63)})


@dataclass(frozen=True)
class ProtocolRecord:
    s_n: float
    delta_stat: float
    delta_sys: float
    delta_total: float
    eta_observed: float
    bound: float
    significance: float
    reported: int
    kept: int
    config: ProtocolConfig

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def significance(s: float, delta: float, bound: float) -> float:
    """Standard deviations by which ``s`` exceeds ``bound``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (s - bound) / delta


# ---------------------------------------------------------------------------
# per-round models


def _shared_state(cfg: ProtocolConfig) -> DensityOperator:
    if cfg.state == "oneway_povm":
        return oneway_povm_state(cfg.mu, cfg.p)
    return lossy_channel(werner(cfg.mu), cfg.p)


def _honest_tables(cfg: ProtocolConfig, axes: np.ndarray):
    """Qubit-presence probability and per-setting joint outcome probabilities.

    ``joint[k]`` lists ``P(untrusted=x, trusted=y)`` for
    ``(x, y) in [(+,+), (+,-), (-,+), (-,-)]`` given Bob's qubit is present.
    """
    rho = _shared_state(cfg)
    present = 1 - vacuum_weight(rho)
    block = rho.matrix.reshape(2, 3, 2, 3)[:, :2, :, :2].reshape(4, 4)
    block = block / np.trace(block).real
    untrusted_first = cfg.direction == "alice_steers_bob"
    joint = np.zeros((len(axes), 4))
    for k, u in enumerate(axes):
        s = bloch_operator(u)
        plus, minus = (np.eye(2) + s) / 2, (np.eye(2) - s) / 2
        for j, (x, y) in enumerate([(plus, plus), (plus, minus), (minus, plus), (minus, minus)]):
            op = kron(x, y) if untrusted_first else kron(y, x)
            joint[k, j] = max(np.einsum("ij,ji->", block, op).real, 0.0)
        joint[k] /= joint[k].sum()
    return present, joint


_SIGN_X = np.array([1, 1, -1, -1])
_SIGN_Y = np.array([1, -1, 1, -1])


def _honest_block(rng, size, cfg, present, joint):
    n = len(joint)
    k = rng.integers(n, size=size)
    qubit = rng.random(size) < present
    detected = rng.random(size) < cfg.eta_detector
    cdf = np.cumsum(joint, axis=1)
    idx = (rng.random(size)[:, None] > cdf[k, :3]).sum(axis=1)
    # the untrusted party announces the negated outcome
    ab = -_SIGN_X[idx] * _SIGN_Y[idx]
    if cfg.direction == "alice_steers_bob":
        kept = qubit
        reported = kept & detected
    else:
        kept = np.ones(size, dtype=bool)
        reported = qubit & detected
    return int(kept.sum()), int(reported.sum()), int(ab[reported].sum())


def _dishonest_block(rng, size, axes, probs, signs, hidden):
    n = len(axes)
    k = rng.integers(n, size=size)
    which = rng.choice(len(probs), size=size, p=probs)
    a = signs[which, k]
    cos = np.einsum("rd,rd->r", axes[k], hidden[which])
    b = np.where(rng.random(size) < (1 + cos) / 2, 1, -1)
    reported = a != 0
    return size, int(reported.sum()), int((a[reported] * b[reported]).sum())


def run_protocol(config: ProtocolConfig, threads: int | None = None) -> ProtocolRecord:
    """Simulate ``config.rounds`` rounds and score them against ``C_n``."""
    cfg = config.with_seed()
    axes = steer.measurement_axes(cfg.n_settings).axes
    blocks = [BLOCK] * (cfg.rounds // BLOCK)
    if cfg.rounds % BLOCK:
        blocks.append(cfg.rounds % BLOCK)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(blocks))

    if cfg.strategy == "honest":
        present, joint = _honest_tables(cfg, axes)

        def work(i):
            return _honest_block(np.random.default_rng(streams[i]), blocks[i], cfg, present, joint)
    else:
        cheat = steer.deterministic_bound(axes, cfg.eta_detector)
        probs = [w for w, _ in cheat.strategy] + [cheat.silent_probability]
        probs = np.array(probs) / sum(probs)
        signs = np.array([s.signs for _, s in cheat.strategy] + [np.zeros(len(axes))], dtype=int)
        hidden = np.array([s.hidden for _, s in cheat.strategy] + [[0.0, 0.0, 1.0]])

        def work(i):
            return _dishonest_block(np.random.default_rng(streams[i]), blocks[i], axes, probs, signs, hidden)

    nthreads = threads or worker_count()
    if nthreads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(work, range(len(blocks))))
    else:
        parts = [work(i) for i in range(len(blocks))]
    kept = sum(p[0] for p in parts)
    reported = sum(p[1] for p in parts)
    corr = sum(p[2] for p in parts)
    if reported == 0:
        raise ValueError("no rounds were reported; cannot estimate S_n")

    s_n = corr / reported
    delta_stat = math.sqrt(max(1 - s_n * s_n, 0.0) / reported)
    delta_sys = math.sin(math.radians(cfg.systematic_tilt_deg))
    delta_total = math.hypot(delta_stat, delta_sys)
    eta_obs = reported / kept
    bound = steer.deterministic_bound(axes, eta_obs).value
    sig = significance(s_n, delta_total, bound) if delta_total > 0 else math.copysign(math.inf, s_n - bound)
    return ProtocolRecord(s_n, delta_stat, delta_sys, delta_total, eta_obs, bound, sig, reported, kept, cfg)


def expected_eta(config: ProtocolConfig) -> float:
    """Mean reporting rate of the honest strategy."""
    if config.direction == "alice_steers_bob":
        return config.eta_detector
    return (1 - vacuum_weight(_shared_state(config))) * config.eta_detector
