"""Acceptance suite: end-to-end checks at their stated tolerances.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all).
These reproduce the headline experiments at desk scale with pinned seeds;
expect the full module to take on the order of ten minutes.
"""

import numpy as np

import irsa_lab as il
from irsa_lab.chest import estimate_rb_channels
from irsa_lab.crb import orthogonal_nmse_bound, rb_crb_mse, true_hyperparams
from irsa_lab.decode import CombinerSet, rzf_combiner, sinr
from irsa_lab.harness import (aggregate, roc_curves, roc_envelope,
                              run_monte_carlo)
from irsa_lab.scenario import (draw_scenario, generate_pilots, rng_for_run,
                               synthesize_pilot_rx)
from irsa_lab.uad import run_uad

from conftest import manual_apm, manual_frame, orthogonal_pilots


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def _pooled_rates(records):
    fp = sum(r.n_fp for r in records)
    tn = sum(r.n_tn for r in records)
    fn = sum(r.n_fn for r in records)
    tp = sum(r.n_tp for r in records)
    return fp / (fp + tn), fn / (fn + tp)


# ---------------------------------------------------------------------------

def test_criterion_01_uad_error_rates():
    """T=50, L=3 (M=1500), N=16, tau=20, edge SNR 10 dB, 100 runs:
    mean FNR and FPR both below 1e-2."""
    cfg = il.SystemConfig(L=3, N=16, tau=20, runs=100, seed=1001,
                          decode=False)
    records = run_monte_carlo(cfg)
    fpr, fnr = _pooled_rates(records)
    _report("criterion 1 (UAD error rates)",
            fnr < 1e-2 and fpr < 1e-2,
            f"FNR={fnr:.4f}, FPR={fpr:.4f} (tolerance < 0.01 each)")


def test_criterion_02_roc_dominance():
    """N=4, L=3, tau=10, 50 runs: the proposed detector's ROC weakly
    dominates per-RB kappa=1 voting and one-shot stacking at every matched
    FPR grid point in the operational region (FPR <= 0.5)."""
    cfg = il.SystemConfig(L=3, tau=10, N=4, decode=False, seed=21)
    # dense where the hyperparameters concentrate, so the steep part of each
    # curve is resolved and the envelope comparison is not a grid artifact
    thresholds = np.unique(np.concatenate([
        np.logspace(-8, 2, 51), np.logspace(-4.5, -2.5, 121)]))
    curves = roc_curves(cfg, thresholds, runs=50)
    prop = curves["proposed"]
    ok = True
    detail = []
    for name in ("rb_voting", "one_shot"):
        base = [p for p in curves[name] if p.fpr <= 0.5]
        bad = [p for p in base if roc_envelope(prop, p.fpr) > p.fnr + 1e-12]
        ok &= not bad
        detail.append(f"{name}: {len(base)} matched points, "
                      f"{len(bad)} violations")
    _report("criterion 2 (ROC dominance)", ok, "; ".join(detail))


def test_criterion_03_genie_attains_crb():
    """L=1, tau=20, edge SNR 10 dB, 500 frames: the genie-aided estimator's
    empirical MSE is within 5% of the frame-averaged CRB."""
    cfg = il.SystemConfig(L=1, tau=20, N=16, runs=500, seed=7, genie=True,
                          decode=False, uad_mode="perfect")
    records = run_monte_carlo(cfg)
    mse = float(np.mean([r.genie_err_power for r in records]))
    bound = float(np.mean([r.crb_total for r in records]))
    ratio = mse / bound
    _report("criterion 3 (genie attains CRB)",
            abs(ratio - 1.0) < 0.05,
            f"genie MSE / CRB = {ratio:.4f} (tolerance 0.95..1.05)")


def test_criterion_04_nmse_gap_shrinks_with_pilot_length():
    """L=1, SNR 10 dB, 100 runs: the detector's NMSE minus the normalized
    CRB strictly decreases over tau in {10, 20, 40}, and the remaining gap
    at tau=40 is below 1 dB.

    The three pilot lengths are evaluated on shared frames with row-prefix
    pilot books (each shorter book is the leading rows of the longer one),
    so the comparison is paired: the channel-power normalizer is identical
    across tau and cannot mask the trend. Unpaired batches are dominated by
    whether they happen to contain a user very close to the BS.
    """
    import dataclasses

    from irsa_lab.scenario import PilotBook

    taus = (10, 20, 40)
    base = il.SystemConfig(L=1, tau=40, N=16, runs=100, seed=3, decode=False)
    err = {tau: 0.0 for tau in taus}
    bound = {tau: 0.0 for tau in taus}
    chan = 0.0
    for run in range(base.runs):
        rng = rng_for_run(base.seed, run)
        population, apm, pilots40, frame, _ = draw_scenario(rng, base)
        gamma = true_hyperparams(frame.a, population.beta, base.sigma_h2)
        truth = [frame.a[mem, None] * frame.H[t][:, mem].conj().T
                 for t, mem in enumerate(apm.members)]
        chan += sum(float(np.linalg.norm(Z) ** 2) for Z in truth)
        for tau in taus:
            pil = PilotBook(p=pilots40.p[:tau], pilot_type="gaussian",
                            Pp=base.Pp)
            fr = dataclasses.replace(
                frame, pilot_noise=frame.pilot_noise[:, :, :tau])
            Yp = synthesize_pilot_rx(fr, apm, pil, base.N0)
            out = run_uad(Yp, apm, pil, base.N0, j_max=base.j_max,
                          gamma_pr=base.gamma_pr, tol=base.em_tol)
            err[tau] += sum(
                float(np.linalg.norm(out.Zhat[t] - truth[t]) ** 2)
                for t in range(base.T))
            bound[tau] += sum(
                rb_crb_mse(pil.p[:, mem], gamma[mem], base.N0, base.N)
                for mem in apm.members)
    gaps_lin = [(err[tau] - bound[tau]) / chan for tau in taus]
    gap40_db = 10 * np.log10(err[40] / bound[40])
    decreasing = gaps_lin[0] > gaps_lin[1] > gaps_lin[2]
    _report("criterion 4 (NMSE approaches CRB)",
            decreasing and gap40_db < 1.0,
            f"linear gaps {[f'{g:.2e}' for g in gaps_lin]} strictly "
            f"decreasing={decreasing}; gap at tau=40 = {gap40_db:.3f} dB (< 1)")


def test_criterion_05_near_optimal_throughput():
    """Edge SNR 10 dB, gamma_th=10, lam=1e-2, N=16, perfect SIC, 100 frames:
    mean throughput at least 0.9*L for (L=1, tau=10) and (L=2, tau=25)."""
    ok = True
    detail = []
    for L, tau in ((1, 10), (2, 25)):
        cfg = il.SystemConfig(L=L, tau=tau, N=16, gamma_th=10.0, lam=1e-2,
                              runs=100, seed=42)
        thpt = aggregate(run_monte_carlo(cfg))["throughput"]
        ok &= thpt >= 0.9 * L
        detail.append(f"L={L}, tau={tau}: {thpt:.3f} (need >= {0.9 * L:.2f})")
    _report("criterion 5 (throughput)", ok, "; ".join(detail))


def test_criterion_06_estimated_vs_perfect_uad_gap():
    """tau=30, gamma_th=16, lam=1, N=16, 100 frames: the throughput gap
    between perfect and estimated activity knowledge is below 0.05."""
    ok = True
    detail = []
    for L in (1, 2):
        thpt = {}
        for mode in ("estimated", "perfect"):
            cfg = il.SystemConfig(L=L, tau=30, N=16, gamma_th=16.0, lam=1.0,
                                  runs=100, seed=11, uad_mode=mode)
            thpt[mode] = aggregate(run_monte_carlo(cfg))["throughput"]
        gap = abs(thpt["perfect"] - thpt["estimated"])
        ok &= gap < 0.05
        detail.append(f"L={L}: estimated={thpt['estimated']:.3f}, "
                      f"perfect={thpt['perfect']:.3f}, gap={gap:.4f}")
    _report("criterion 6 (UAD throughput gap)", ok,
            "; ".join(detail) + " (tolerance < 0.05)")


def test_criterion_07_em_ascent():
    """50 random instances over (tau, L, N) in {5,10,20} x {1,3} x {4,16}:
    the evidence is non-decreasing over every EM iteration within 1e-6
    relative slack."""
    grid = [(tau, L, N) for tau in (5, 10, 20) for L in (1, 3)
            for N in (4, 16)]
    worst = np.inf
    violations = 0
    for i in range(50):
        tau, L, N = grid[i % len(grid)]
        cfg = il.SystemConfig(L=L, T=10, k_s=10, tau=tau, N=N, j_max=50,
                              seed=500 + i)
        rng = rng_for_run(cfg.seed, 0)
        pop, apm, pilots, frame, rx = draw_scenario(rng, cfg)
        out = run_uad(rx.Yp, apm, pilots, rx.N0, j_max=cfg.j_max, track=True)
        ll = out.loglik_history
        slack = 1e-6 * np.abs(ll[:-1])
        margin = np.diff(ll) + slack
        worst = min(worst, float(margin.min()))
        violations += int(np.any(np.diff(ll) < -slack))
    _report("criterion 7 (EM ascent)", violations == 0,
            f"{violations} violating instances of 50; worst slack-adjusted "
            f"increment {worst:.3e}")


def test_criterion_08_sinr_decomposition_oracle():
    """Fixed small instance (M=6, T=4, N=4, tau=4): the Monte Carlo power of
    the combined data signal over 1e5 draws matches the five-term SINR
    decomposition within 2% relative."""
    rng = np.random.default_rng(88)
    M, T, N, tau = 6, 4, 4, 4
    beta = np.array([2.0, 1.0, 0.6, 0.3, 0.8, 0.1])
    sigma_h2, N0, P, Pp = 1.0, 0.05, 2.0, 4.0
    a_true = np.array([1, 1, 1, 0, 1, 0], dtype=np.uint8)
    a_hat = np.array([1, 1, 0, 1, 0, 0], dtype=np.uint8)  # FN: 2, 4; FP: 3
    g = np.zeros((T, M), dtype=np.uint8)
    g[0] = [1, 1, 1, 1, 1, 1]
    g[1] = [1, 0, 1, 0, 1, 0]
    g[2] = [0, 1, 0, 1, 0, 1]
    g[3] = [1, 1, 0, 0, 1, 1]
    apm = manual_apm(g)
    pilots = generate_pilots(rng, "gaussian", tau, M, Pp)
    H = np.sqrt(beta * sigma_h2 / 2)[None, None, :] * (
        rng.standard_normal((T, N, M)) + 1j * rng.standard_normal((T, N, M)))
    noise = np.sqrt(0.5) * (rng.standard_normal((T, N, tau))
                            + 1j * rng.standard_normal((T, N, tau)))
    frame = manual_frame(a=a_true, H=H, pilot_noise=noise, tau=tau)
    Yp = synthesize_pilot_rx(frame, apm, pilots, N0)

    t = 0
    undec = np.ones(M, dtype=bool)
    members, Hhat, eta, delta = estimate_rb_channels(
        Yp[t], t, undec, a_hat, a_true, apm, beta, sigma_h2, pilots, N0)
    A = rzf_combiner(Hhat, 0.1)
    m = 0
    bd = sinr(m, t, CombinerSet(A=A, members=members), Hhat, delta, undec,
              a_true, a_hat, apm, beta, sigma_h2, P, N0)
    a_col = A[:, list(members).index(m)]
    an2 = float(np.vdot(a_col, a_col).real)
    predicted = an2 * (bd.gain + bd.est + bd.mui + bd.fnu + bd.noise)

    # conditional redraw: detected actives around their estimates, missed
    # actives from the prior; expectation over data symbols and noise
    draws = 100_000
    tx = [i for i in range(M) if a_true[i] and g[t, i]]
    acc = np.zeros(draws, dtype=complex)
    for i in tx:
        if a_hat[i]:
            j = list(members).index(i)
            h = Hhat[:, j][None, :] + np.sqrt(delta[j] / 2) * (
                rng.standard_normal((draws, N))
                + 1j * rng.standard_normal((draws, N)))
        else:
            h = np.sqrt(beta[i] * sigma_h2 / 2) * (
                rng.standard_normal((draws, N))
                + 1j * rng.standard_normal((draws, N)))
        x = np.sqrt(P / 2) * (rng.standard_normal(draws)
                              + 1j * rng.standard_normal(draws))
        acc += (h @ a_col.conj()) * x
    acc += np.sqrt(N0 / 2) * ((rng.standard_normal((draws, N))
                               + 1j * rng.standard_normal((draws, N)))
                              @ a_col.conj())
    empirical = float(np.mean(np.abs(acc) ** 2))
    rel = abs(empirical / predicted - 1.0)
    _report("criterion 8 (SINR decomposition)", rel < 0.02,
            f"MC power={empirical:.5f}, five-term sum={predicted:.5f}, "
            f"relative error={rel:.4f} (< 0.02)")


def test_criterion_09_closed_form_agreement():
    """Orthogonal-pilot error variance, orthogonal-pilot CRB, and the two
    algebraic forms of the MSE bound agree with the general-path values to
    1e-8 relative."""
    rng = np.random.default_rng(5)
    ok = True
    detail = []

    # (a) orthogonal-pilot error variance
    M, tau, N = 6, 8, 3
    beta = rng.uniform(0.1, 2.0, M)
    sigma_h2, N0 = 1.3, 0.2
    pilots = orthogonal_pilots(tau, M, Pp=4.0)
    apm = manual_apm(np.ones((1, M), dtype=np.uint8))
    a_true = np.array([1, 1, 0, 1, 0, 1], dtype=np.uint8)
    a_hat = np.array([1, 1, 1, 0, 0, 1], dtype=np.uint8)
    Yp0 = rng.standard_normal((N, tau)) + 1j * rng.standard_normal((N, tau))
    members, _, _, delta = estimate_rb_channels(
        Yp0, 0, np.ones(M, bool), a_hat, a_true, apm, beta, sigma_h2,
        pilots, N0)
    closed = np.array([
        beta[m] * sigma_h2 * N0
        / (a_hat[m] * a_true[m] * beta[m] * sigma_h2 * pilots.norms2[m] + N0)
        for m in members])
    err_a = float(np.max(np.abs(delta / closed - 1.0)))
    ok &= err_a < 1e-8
    detail.append(f"delta closed form: {err_a:.2e}")

    # (b) orthogonal-pilot normalized CRB
    T = 5
    g = (rng.random((T, M)) < 0.6).astype(np.uint8)
    g[0] = 1  # nonempty
    apm_b = manual_apm(g)
    a = (rng.random(M) < 0.6).astype(np.uint8)
    a[0] = 1
    gamma = true_hyperparams(a, beta, sigma_h2)
    per_rb = np.array([
        rb_crb_mse(pilots.p[:, mem], gamma[mem], N0, N)
        for mem in apm_b.members])
    general = per_rb.sum() / (N * np.sum(apm_b.degrees * gamma))
    closed_b = orthogonal_nmse_bound(apm_b.degrees, gamma, tau, 4.0, N0)
    err_b = abs(general / closed_b - 1.0)
    ok &= err_b < 1e-8
    detail.append(f"normalized CRB closed form: {err_b:.2e}")

    # (c) the two algebraic forms of the MSE bound
    err_c = 0.0
    for _ in range(10):
        P_t = rng.standard_normal((5, 9)) + 1j * rng.standard_normal((5, 9))
        gam = rng.uniform(0.05, 3.0, 9)
        f1 = rb_crb_mse(P_t, gam, 0.3, N=4, method="fim")
        f2 = rb_crb_mse(P_t, gam, 0.3, N=4, method="woodbury")
        err_c = max(err_c, abs(f1 / f2 - 1.0))
    ok &= err_c < 1e-8
    detail.append(f"bound forms: {err_c:.2e}")
    _report("criterion 9 (closed forms)", ok,
            "; ".join(detail) + " (tolerance 1e-8)")


def test_criterion_10_complexity_scaling():
    """Doubling the pilot length at fixed scheduling work multiplies the
    per-iteration detection time by roughly four (ratio within [3, 6])."""
    ratios = []
    for rep in range(3):
        per_tau = {}
        for tau in (20, 40):
            cfg = il.SystemConfig(M=2000, L=None, T=200, N=8, tau=tau,
                                  seed=900 + rep)
            rng = rng_for_run(cfg.seed, 0)
            pop, apm, pilots, frame, rx = draw_scenario(rng, cfg)
            out = run_uad(rx.Yp, apm, pilots, rx.N0, j_max=10, tol=0.0,
                          collect_timing=True)
            per_tau[tau] = float(np.min(out.iter_seconds[2:]))
        ratios.append(per_tau[40] / per_tau[20])
    ratio = float(np.median(ratios))
    _report("criterion 10 (per-iteration cost scaling)",
            3.0 <= ratio <= 6.0,
            f"median ratio over 3 repeats = {ratio:.2f} "
            f"(all: {[f'{r:.2f}' for r in ratios]}; tolerance [3, 6])")
