"""Monte Carlo driver: per-run pipeline and metric aggregation.

Each run draws an independent population, access pattern, pilot book and
frame from its own RNG substream, then runs detection, classification, NMSE
and CRB evaluation, optionally the genie estimator, and SIC decoding. Rates
are aggregated by pooling counts across runs; the NMSE is a ratio of summed
error power to summed channel power (expectation over expectation, not the
mean of per-run ratios).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import crb, decode, uad
from .config import SystemConfig
from .scenario import draw_scenario, rng_for_run

__all__ = ["RunRecord", "RocPoint", "run_single", "run_monte_carlo", "nmse",
           "aggregate", "roc_sweep", "roc_curves", "roc_envelope",
           "weakly_dominates"]


@dataclass
class RunRecord:
    """Everything measured on one Monte Carlo run."""

    run_id: int
    L: float
    M: int
    N: int
    T: int
    tau: int
    cell_edge_snr_db: float
    pilot_type: str
    sic_mode: str
    uad_mode: str
    gamma_th: float
    lam: float
    # classification counts and rates
    n_tp: int
    n_fp: int
    n_fn: int
    n_tn: int
    fpr: float
    fnr: float
    # channel estimation metrics
    err_power: float        # ||X - Xhat||_F^2 of the detector's estimates
    chan_power: float       # realized ||X||_F^2
    nmse: float
    crb_total: float        # frame CRB on the MSE (true hyperparameters)
    crb_chan_power: float   # expected channel power N sum_m d_m gamma_m
    crb_nmse: float
    genie_err_power: float  # nan unless the genie estimator was evaluated
    # decoding
    throughput: float
    decode_iterations: int
    uad_iterations: int
    # wall-clock (not part of any deterministic output)
    uad_ms: float
    decode_ms: float


@dataclass
class RocPoint:
    gamma_pr: float
    fpr: float
    fnr: float


def nmse(Xhat: np.ndarray, X: np.ndarray) -> float:
    """Normalized squared error ||X - Xhat||_F^2 / ||X||_F^2."""
    if Xhat.shape != X.shape:
        raise ValueError(f"shape mismatch {Xhat.shape} vs {X.shape}")
    power = float(np.linalg.norm(X) ** 2)
    if power == 0.0:
        return math.nan
    return float(np.linalg.norm(X - Xhat) ** 2) / power


def _rb_truth(frame, apm, t: int) -> np.ndarray:
    """Ground-truth reduced channel matrix of RB t (rows a_m h_tm^H)."""
    mem = apm.members[t]
    return frame.a[mem, None] * frame.H[t][:, mem].conj().T


def run_single(config: SystemConfig, run_id: int) -> RunRecord:
    """Execute one full Monte Carlo run. Deterministic in (config.seed, run_id)."""
    rng = rng_for_run(config.seed, run_id)
    population, apm, pilots, frame, received = draw_scenario(rng, config)
    N0 = received.N0

    err_power = chan_power = math.nan
    uad_ms = 0.0
    uad_iters = 0
    if config.uad_mode == "perfect":
        a_hat = frame.a.copy()
    else:
        t0 = time.perf_counter()
        out = uad.run_uad(received.Yp, apm, pilots, N0, j_max=config.j_max,
                          gamma_pr=config.gamma_pr, tol=config.em_tol)
        uad_ms = (time.perf_counter() - t0) * 1e3
        uad_iters = out.iterations
        a_hat = out.a_hat
        err_power = 0.0
        chan_power = 0.0
        for t in range(config.T):
            Z = _rb_truth(frame, apm, t)
            err_power += float(np.linalg.norm(out.Zhat[t] - Z) ** 2)
            chan_power += float(np.linalg.norm(Z) ** 2)

    sets = uad.classify(a_hat, frame.a)

    # CRB with the ground-truth hyperparameters
    gamma_true = crb.true_hyperparams(frame.a, population.beta, config.sigma_h2)
    per_rb = np.array([
        crb.rb_crb_mse(pilots.p[:, mem], gamma_true[mem], N0, config.N)
        for mem in apm.members])
    crb_total = float(per_rb.sum())
    crb_chan_power = float(config.N * np.sum(population.d * gamma_true))
    crb_nm = crb_total / crb_chan_power if crb_chan_power > 0 else math.nan

    genie_err = math.nan
    if config.genie:
        genie_err = 0.0
        for t in range(config.T):
            mem = apm.members[t]
            Zg = crb.genie_mmse(received.Yp[t].conj().T, pilots.p[:, mem],
                                gamma_true[mem], N0)
            genie_err += float(np.linalg.norm(Zg - _rb_truth(frame, apm, t)) ** 2)

    throughput = math.nan
    decode_iters = 0
    decode_ms = 0.0
    if config.decode:
        t0 = time.perf_counter()
        trace = decode.sic_loop(received, frame, population, apm, pilots,
                                a_hat, config)
        decode_ms = (time.perf_counter() - t0) * 1e3
        throughput = trace.throughput
        decode_iters = trace.iterations

    per_run_nmse = err_power / chan_power if chan_power else math.nan
    return RunRecord(
        run_id=run_id, L=config.load, M=config.num_users, N=config.N,
        T=config.T, tau=config.tau, cell_edge_snr_db=config.cell_edge_snr_db,
        pilot_type=config.pilot_type, sic_mode=config.sic_mode,
        uad_mode=config.uad_mode, gamma_th=config.gamma_th, lam=config.lam,
        n_tp=len(sets.A), n_fp=len(sets.F), n_fn=len(sets.Mset),
        n_tn=len(sets.I), fpr=sets.fpr, fnr=sets.fnr,
        err_power=err_power, chan_power=chan_power, nmse=per_run_nmse,
        crb_total=crb_total, crb_chan_power=crb_chan_power, crb_nmse=crb_nm,
        genie_err_power=genie_err, throughput=throughput,
        decode_iterations=decode_iters, uad_iterations=uad_iters,
        uad_ms=uad_ms, decode_ms=decode_ms)


def run_monte_carlo(config: SystemConfig, runs: int | None = None,
                    progress=None) -> list[RunRecord]:
    """Run the configured number of independent runs (config validation first)."""
    n = config.runs if runs is None else runs
    records = []
    for r in range(n):
        records.append(run_single(config, r))
        if progress is not None:
            progress(r + 1, n)
    return records


def aggregate(records: list[RunRecord]) -> dict:
    """Pool counts and powers across runs into summary metrics.

    Rates are pooled (sum of counts), matching their definition over the
    whole user population; NMSE-style metrics are ratios of summed powers.
    Per-run means and standard errors are included for the scalar metrics.
    """
    if not records:
        return {"runs": 0}
    n = len(records)
    s = lambda f: sum(getattr(r, f) for r in records)
    fp, tn, fn, tp = s("n_fp"), s("n_tn"), s("n_fn"), s("n_tp")
    out = {
        "runs": n,
        "fpr": fp / (fp + tn) if fp + tn else 0.0,
        "fnr": fn / (fn + tp) if fn + tp else 0.0,
    }
    err = np.array([r.err_power for r in records], dtype=float)
    chan = np.array([r.chan_power for r in records], dtype=float)
    if np.isfinite(err).all() and np.nansum(chan) > 0:
        out["nmse"] = float(err.sum() / chan.sum())
    else:
        out["nmse"] = math.nan
    out["crb_nmse"] = float(s("crb_total") / s("crb_chan_power")) \
        if s("crb_chan_power") > 0 else math.nan
    genie = np.array([r.genie_err_power for r in records], dtype=float)
    out["genie_mse"] = float(np.mean(genie)) if np.isfinite(genie).all() else math.nan
    out["crb_mse"] = float(np.mean([r.crb_total for r in records]))
    thpt = np.array([r.throughput for r in records], dtype=float)
    if np.isfinite(thpt).all():
        out["throughput"] = float(thpt.mean())
        out["throughput_se"] = float(thpt.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    else:
        out["throughput"] = math.nan
        out["throughput_se"] = math.nan
    for f in ("fpr", "fnr"):
        vals = np.array([getattr(r, f) for r in records], dtype=float)
        out[f + "_mean"] = float(vals.mean())
        out[f + "_se"] = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return out


# ---------------------------------------------------------------------------
# ROC sweeps
# ---------------------------------------------------------------------------

_ALGORITHMS = ("proposed", "rb_voting", "one_shot")


def roc_curves(config: SystemConfig, thresholds, algorithms=_ALGORITHMS,
               runs: int | None = None, kappa: int = 1,
               progress=None) -> dict[str, list[RocPoint]]:
    """Activity-threshold sweep for one or more detectors on shared frames.

    The detectors' final scores are cached per run, so the sweep re-thresholds
    without re-running EM; all detectors see identical scenario draws.
    """
    thresholds = np.asarray(sorted(thresholds), dtype=float)
    n = config.runs if runs is None else runs
    counts = {alg: np.zeros((len(thresholds), 4), dtype=np.int64)
              for alg in algorithms}   # columns: FP, TN, FN, TP
    for r in range(n):
        rng = rng_for_run(config.seed, r)
        population, apm, pilots, frame, received = draw_scenario(rng, config)
        N0 = received.N0
        scores = {}
        if "proposed" in algorithms:
            out = uad.run_uad(received.Yp, apm, pilots, N0, j_max=config.j_max,
                              gamma_pr=config.gamma_pr, tol=config.em_tol)
            scores["proposed"] = ("user", out.gamma)
        if "rb_voting" in algorithms:
            _, rb_gamma = uad.baseline_per_rb_voting(
                received.Yp, apm, pilots, N0, kappa=kappa, j_max=config.j_max,
                gamma_pr=config.gamma_pr, tol=config.em_tol)
            scores["rb_voting"] = ("rb", rb_gamma)
        if "one_shot" in algorithms:
            _, g1 = uad.baseline_one_shot(received.Yp, apm, pilots, N0,
                                          j_max=config.j_max,
                                          gamma_pr=config.gamma_pr,
                                          tol=config.em_tol)
            scores["one_shot"] = ("user", g1)
        active = frame.a.astype(bool)
        for alg, (kind, score) in scores.items():
            for i, thr in enumerate(thresholds):
                if kind == "user":
                    a_hat = score >= thr
                else:
                    a_hat = uad.vote_activities(score, apm, thr, kappa).astype(bool)
                counts[alg][i, 0] += int(np.sum(a_hat & ~active))
                counts[alg][i, 1] += int(np.sum(~a_hat & ~active))
                counts[alg][i, 2] += int(np.sum(~a_hat & active))
                counts[alg][i, 3] += int(np.sum(a_hat & active))
        if progress is not None:
            progress(r + 1, n)
    curves = {}
    for alg, c in counts.items():
        pts = []
        for i, thr in enumerate(thresholds):
            fp, tn, fn, tp = c[i]
            pts.append(RocPoint(
                gamma_pr=float(thr),
                fpr=fp / (fp + tn) if fp + tn else 0.0,
                fnr=fn / (fn + tp) if fn + tp else 0.0))
        curves[alg] = pts
    return curves


def roc_sweep(config: SystemConfig, thresholds,
              runs: int | None = None) -> list[RocPoint]:
    """Threshold sweep of the proposed detector alone."""
    return roc_curves(config, thresholds, algorithms=("proposed",),
                      runs=runs)["proposed"]


def roc_envelope(points: list[RocPoint], fpr_level: float) -> float:
    """Best (lowest) FNR achievable at FPR <= fpr_level on a swept curve."""
    feasible = [p.fnr for p in points if p.fpr <= fpr_level + 1e-15]
    return min(feasible) if feasible else 1.0


def weakly_dominates(winner: list[RocPoint], loser: list[RocPoint],
                     slack: float = 0.0) -> bool:
    """True if at every FPR the loser achieves, the winner's FNR is <= loser's."""
    return all(roc_envelope(winner, p.fpr) <= p.fnr + slack for p in loser)
