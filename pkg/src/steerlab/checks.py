"""Fast built-in invariant and analytic-oracle checks (``steerlab check``)."""

from __future__ import annotations

import math

import numpy as np

from . import cvsteer, steer
from .qmat import fidelity, partial_trace, projector
from .states import EprParams, epr_state, lossy_channel, oneway_povm_state, quintino_lift, werner


def _checks():
    yield "classify(0.978, 0.995) is ONE_WAY_POVM", steer.classify(0.978, 0.995).label is steer.Region.ONE_WAY_POVM
    yield "classify(0.991, 0.99) is ONE_WAY_PROJECTIVE", (
        steer.classify(0.991, 0.99).label is steer.Region.ONE_WAY_PROJECTIVE
    )

    worst = 0.0
    for mu in np.linspace(0, 1, 5):
        for p in np.linspace(0, 1, 5):
            a = oneway_povm_state(mu, p).matrix
            b = quintino_lift(lossy_channel(werner(mu), p)).matrix
            worst = max(worst, float(np.max(np.abs(a - b))))
    yield "lifted lossy Werner equals the closed form", worst <= 1e-12

    ok = all(
        abs(steer.honest_steering_parameter(werner(mu), n) - mu) <= 1e-12
        for n in steer.SUPPORTED_N
        for mu in (0.0, 0.5, 0.991, 1.0)
    )
    yield "honest S_n of werner(mu) equals mu", ok

    yield "C_3(1) = 1/sqrt(3)", abs(steer.deterministic_bound(np.eye(3), 1.0).value - 1 / math.sqrt(3)) <= 1e-12
    for n in (6, 10):
        yield f"branch and bound matches enumeration (n={n})", np.allclose(
            steer.max_resultants(n), steer.exhaustive_resultants(n), atol=1e-12
        )
    for n in steer.SUPPORTED_N:
        etas = np.round(np.arange(0.1, 1.01, 0.1), 10)
        c = steer.bound_table(n, etas)
        yield f"C_{n} >= 1 - eta/2 and C_{n}(1/n) = 1", bool(
            np.all(c >= steer.asymptotic_bound(etas) - 1e-12)
            and abs(steer.deterministic_bound(n, 1 / n).value - 1) <= 1e-12
        )

    for v in (1.5, 2.0, 4.0):
        yield f"Reid Bob->Alice product is 1 at T=1/2 (V={v})", abs(cvsteer.reid_products(v, 0.5).product_ba - 1) <= 1e-9

    ops = cvsteer.pseudo_spin_ops(24)
    P = ops.interior()
    eye = np.eye(ops.dim)
    sq = max(float(np.max(np.abs(P @ (m @ m) @ P - P))) for m in (ops.s_x, ops.s_y, ops.s_theta(0.7)))
    yield "pseudo-spin operators square to identity", sq <= 1e-10 and np.allclose(ops.s_z @ ops.s_z, eye)

    chi = EprParams(2.0).chi
    d = ops.dim
    t = epr_state(EprParams(2.0)).matrix.reshape(d, d, d, d)
    sxx = float(np.einsum("ijkl,ki,lj->", t, ops.s_x, ops.s_x).real)
    yield "<S_x S_x> on EPR = 2 chi/(1 + chi^2)", abs(sxx - 2 * chi / (1 + chi**2)) <= 1e-8

    zero, mixed = projector([1, 0]), np.eye(2) / 2
    yield "fidelity(I/2, |0><0|) = 1/2", abs(fidelity(mixed, zero) - 0.5) <= 1e-12
    rho = werner(0.6)
    yield "partial trace of Werner is I/2", np.allclose(partial_trace(rho, 0).matrix, mixed, atol=1e-12)


def run_checks(verbose: bool = False) -> int:
    failures = 0
    for name, ok in _checks():
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return failures
