"""Tests for RZF combining, the SINR decomposition, and the SIC loop."""

import numpy as np

from irsa_lab.chest import estimate_rb_channels, mmse_estimate
from irsa_lab.decode import (CombinerSet, rb_sinr_terms, rzf_combiner, sic_loop,
                             sinr)
from irsa_lab.scenario import draw_scenario, rng_for_run

from conftest import manual_apm, orthogonal_pilots, small_config


# ---------------------------------------------------------------------------
# combiner
# ---------------------------------------------------------------------------

def test_rzf_single_user_unregularized(rng):
    h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    A = rzf_combiner(h[:, None], 0.0)
    np.testing.assert_allclose(A[:, 0], h / np.linalg.norm(h) ** 2, rtol=1e-12)


def test_rzf_large_regularization_is_mrc(rng):
    H = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    lam = 1e9
    A = rzf_combiner(H, lam)
    np.testing.assert_allclose(A, H / lam, rtol=1e-6)


def test_rzf_orthonormal_identity(rng):
    q, _ = np.linalg.qr(rng.standard_normal((8, 4))
                        + 1j * rng.standard_normal((8, 4)))
    A = rzf_combiner(q, 0.0)
    np.testing.assert_allclose(A, q, rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------------------
# SINR terms
# ---------------------------------------------------------------------------

def _rb_context(seed=0, M=10, T=3, tau=5, N=4, p_a=0.5, flips=()):
    cfg = small_config(M=M, T=T, tau=tau, N=N, k_s=min(3, T), p_a=p_a)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(seed, 0), cfg)
    a_hat = frame.a.copy()
    for u in flips:
        a_hat[u] = 1 - a_hat[u]
    return cfg, pop, apm, pilots, frame, rx, a_hat


def test_sinr_false_positive_user_gets_zero():
    cfg, pop, apm, pilots, frame, rx, a_hat = _rb_context(seed=2, p_a=0.5)
    inactive = np.flatnonzero(frame.a == 0)
    fp = None
    t_fp = None
    for u in inactive:
        rbs = np.flatnonzero(apm.g[:, u])
        if rbs.size:
            fp, t_fp = int(u), int(rbs[0])
            break
    assert fp is not None
    a_hat = frame.a.copy()
    a_hat[fp] = 1
    undec = np.ones(cfg.num_users, dtype=bool)
    members, Hhat, eta, delta = estimate_rb_channels(
        rx.Yp[t_fp], t_fp, undec, a_hat, frame.a, apm, pop.beta,
        cfg.sigma_h2, pilots, rx.N0)
    A = rzf_combiner(Hhat, 0.1)
    bd = sinr(fp, t_fp, CombinerSet(A=A, members=members), Hhat, delta,
              undec, frame.a, a_hat, apm, pop.beta, cfg.sigma_h2, cfg.P, rx.N0)
    assert bd.gain == 0.0
    assert bd.rho == 0.0


def test_sinr_single_user_mrc_reduction(rng):
    """One active user, orthogonal pilot, MRC combiner:
    rho = P ||hhat||^2 / (N0 + P delta)."""
    N, tau = 6, 4
    pilots = orthogonal_pilots(tau, 1, Pp=4.0)
    beta = np.array([0.8])
    sigma_h2, N0, P = 1.2, 0.3, 2.0
    apm = manual_apm(np.ones((1, 1)))
    a = np.ones(1, dtype=np.uint8)
    h = np.sqrt(beta[0] * sigma_h2 / 2) * (rng.standard_normal(N)
                                           + 1j * rng.standard_normal(N))
    noise = np.sqrt(N0 / 2) * (rng.standard_normal((N, tau))
                               + 1j * rng.standard_normal((N, tau)))
    Yp = np.outer(h, pilots.p[:, 0].conj()) + noise
    est = mmse_estimate(Yp, 0, 0, np.ones(1, bool), a, a, apm, beta,
                        sigma_h2, pilots, N0)
    combiner = CombinerSet(A=est.h_hat[:, None], members=np.array([0]))
    bd = sinr(0, 0, combiner, est.h_hat[:, None], np.array([est.delta]),
              np.ones(1, bool), a, a, apm, beta, sigma_h2, P, N0)
    expected = P * np.linalg.norm(est.h_hat) ** 2 / (N0 + P * est.delta)
    np.testing.assert_allclose(bd.rho, expected, rtol=1e-10)
    assert bd.mui == 0.0 and bd.fnu == 0.0


def test_fnu_zero_under_perfect_detection():
    cfg, pop, apm, pilots, frame, rx, a_hat = _rb_context(seed=5, p_a=0.6)
    undec = np.ones(cfg.num_users, dtype=bool)
    for t in range(cfg.T):
        members, Hhat, eta, delta = estimate_rb_channels(
            rx.Yp[t], t, undec, frame.a, frame.a, apm, pop.beta,
            cfg.sigma_h2, pilots, rx.N0)
        if members.size == 0:
            continue
        A = rzf_combiner(Hhat, 0.1)
        _, _, _, fnu = rb_sinr_terms(A, Hhat, members, delta, t, undec,
                                     frame.a, frame.a, apm, pop.beta,
                                     cfg.sigma_h2, cfg.P, rx.N0)
        assert fnu == 0.0


def test_terms_nonnegative_and_mui_monotone():
    cfg, pop, apm, pilots, frame, rx, a_hat = _rb_context(seed=7, M=14,
                                                          p_a=0.8)
    undec = np.ones(cfg.num_users, dtype=bool)
    t = 0
    members, Hhat, eta, delta = estimate_rb_channels(
        rx.Yp[t], t, undec, frame.a, frame.a, apm, pop.beta, cfg.sigma_h2,
        pilots, rx.N0)
    assert members.size >= 3
    A = rzf_combiner(Hhat, 0.1)
    gain, est, mui, fnu = rb_sinr_terms(A, Hhat, members, delta, t, undec,
                                        frame.a, frame.a, apm, pop.beta,
                                        cfg.sigma_h2, cfg.P, rx.N0)
    assert np.all(gain >= 0) and est >= 0 and np.all(mui >= 0) and fnu >= 0
    # removing one interferer from the undecoded set cannot raise MUI
    # at a fixed combiner
    drop = int(members[1])
    undec2 = undec.copy()
    undec2[drop] = False
    keep = members != drop
    gain2, est2, mui2, _ = rb_sinr_terms(
        A[:, keep], Hhat[:, keep], members[keep], delta[keep], t, undec2,
        frame.a, frame.a, apm, pop.beta, cfg.sigma_h2, cfg.P, rx.N0)
    target = int(members[0])
    i_old = int(np.flatnonzero(members == target)[0])
    i_new = int(np.flatnonzero(members[keep] == target)[0])
    assert mui2[i_new] <= mui[i_old] + 1e-12
    assert est2 <= est + 1e-12


# ---------------------------------------------------------------------------
# SIC loop
# ---------------------------------------------------------------------------

def test_sic_no_active_users():
    cfg = small_config(p_a=1e-9, M=20)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(1, 0), cfg)
    assert frame.a.sum() == 0
    trace = sic_loop(rx, frame, pop, apm, pilots, frame.a.copy(), cfg)
    assert trace.throughput == 0.0
    assert trace.iterations <= 2


def test_sic_single_strong_user_decodes_first_iteration():
    cfg = small_config(M=1, T=8, tau=10, N=16, k_s=8, p_a=1.0,
                       gamma_th=10.0, lam=1e-2)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(2, 0), cfg)
    trace = sic_loop(rx, frame, pop, apm, pilots, np.ones(1, np.uint8), cfg)
    assert trace.decoded and trace.decoded[0][1] == 1
    np.testing.assert_allclose(trace.throughput, 1 / cfg.T)


def test_sic_false_positive_never_decoded():
    cfg, pop, apm, pilots, frame, rx, a_hat = _rb_context(seed=9, M=20,
                                                          p_a=0.4)
    inactive = np.flatnonzero(frame.a == 0)
    a_hat = frame.a.copy()
    a_hat[inactive[:3]] = 1
    trace = sic_loop(rx, frame, pop, apm, pilots, a_hat, cfg)
    decoded = set(trace.decoded_users)
    assert decoded.isdisjoint(set(inactive.tolist()))
    assert trace.throughput <= frame.a.sum() / cfg.T


def test_sic_decoded_unique_and_bounded():
    cfg = small_config(M=30, T=10, tau=12, N=8, k_s=10, p_a=0.5,
                       gamma_th=2.0, lam=1e-2)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(3, 0), cfg)
    trace = sic_loop(rx, frame, pop, apm, pilots, frame.a.copy(), cfg)
    users = trace.decoded_users
    assert len(users) == len(set(users))
    assert trace.iterations <= cfg.num_users + 2
    assert 0.0 <= trace.throughput <= cfg.num_users / cfg.T


def test_sic_batch_and_sequential_agree_on_easy_instance():
    cfg = small_config(M=10, T=8, tau=12, N=16, k_s=8, p_a=0.5,
                       gamma_th=5.0, lam=1e-2)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(4, 0), cfg)
    tr_batch = sic_loop(rx, frame, pop, apm, pilots, frame.a.copy(), cfg)
    cfg_seq = cfg.replace(decode_order="sequential")
    tr_seq = sic_loop(rx, frame, pop, apm, pilots, frame.a.copy(), cfg_seq)
    assert set(tr_batch.decoded_users) == set(tr_seq.decoded_users)
    assert tr_seq.iterations >= tr_batch.iterations


def test_sic_perfect_beats_imperfect_on_average():
    deltas = []
    for run in range(100):
        cfg = small_config(M=24, T=8, tau=6, N=8, k_s=8, p_a=0.5,
                           gamma_th=4.0, lam=1e-2)
        pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(50, run), cfg)
        a_hat = frame.a.copy()
        tp = sic_loop(rx, frame, pop, apm, pilots, a_hat, cfg).throughput
        ti = sic_loop(rx, frame, pop, apm, pilots, a_hat,
                      cfg.replace(sic_mode="imperfect")).throughput
        deltas.append(tp - ti)
    assert np.mean(deltas) >= 0.0


def test_sic_imperfect_mode_bounds():
    cfg = small_config(M=30, T=8, tau=4, N=6, k_s=8, p_a=0.7,
                       gamma_th=2.0, lam=1e-2)
    pop, apm, pilots, frame, rx = draw_scenario(rng_for_run(60, 0), cfg)
    ti = sic_loop(rx, frame, pop, apm, pilots, frame.a.copy(),
                  cfg.replace(sic_mode="imperfect"))
    assert ti.iterations >= 1
    assert 0.0 <= ti.throughput <= frame.a.sum() / cfg.T
