"""SINR evaluation and SINR-threshold SIC decoding.

Decoding is abstracted by a threshold test: a detected, truly active user is
decoded once its SINR in some RB clears gamma_th. Each iteration re-estimates
channels from the residual pilot signal, builds per-RB RZF combiners over the
detected undecoded members, evaluates the SINR of every candidate, removes
the decoded users from every RB they occupy, and repeats until no user is
decoded in two successive iterations. False positives never decode (their
packets would fail an error check); false negatives are never attempted and
keep interfering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chest import (CancelledUser, SicState, estimate_rb_channels,
                    residual_pilot)
from .config import SystemConfig
from .scenario import (AccessPatternMatrix, FrameRealization, PilotBook,
                       ReceivedSignals, UserPopulation)

__all__ = ["SinrBreakdown", "CombinerSet", "DecodeTrace", "rzf_combiner",
           "sinr", "rb_sinr_terms", "sic_loop"]


@dataclass
class SinrBreakdown:
    """The five power terms behind one user's SINR in one RB."""

    gain: float      # useful signal power
    est: float       # interference from estimation errors of true positives
    mui: float       # multi-user interference from other true positives
    fnu: float       # interference from false-negative users
    impsic: float    # residual interference of imperfectly cancelled users
    noise: float     # N0

    @property
    def rho(self) -> float:
        return self.gain / (self.noise + self.est + self.mui + self.fnu + self.impsic)


@dataclass
class CombinerSet:
    """Receive combining matrix of one RB and the users its columns serve."""

    A: np.ndarray          # (N, K)
    members: np.ndarray    # (K,) user indices


@dataclass
class DecodeTrace:
    """Outcome of the SIC loop on one frame."""

    decoded: list[tuple[int, int, int]]   # (user, iteration, RB) in decode order
    iterations: int
    throughput: float                     # unique decoded packets per RB

    @property
    def decoded_users(self) -> list[int]:
        return [u for u, _, _ in self.decoded]


def rzf_combiner(Hhat: np.ndarray, lam: float) -> np.ndarray:
    """Regularized zero-forcing combiner A = H (H^H H + lam I)^(-1)."""
    K = Hhat.shape[1]
    gram = Hhat.conj().T @ Hhat
    gram[np.diag_indices(K)] += lam
    return Hhat @ np.linalg.inv(gram)


def rb_sinr_terms(A: np.ndarray, Hhat: np.ndarray, members: np.ndarray,
                  delta: np.ndarray, t: int, undecoded: np.ndarray,
                  a_true: np.ndarray, a_hat: np.ndarray,
                  apm: AccessPatternMatrix, beta: np.ndarray, sigma_h2: float,
                  P: float, N0: float, impsic: float = 0.0):
    """SINR power terms for all members of one RB (vectorized).

    Returns (gain, est, mui, fnu) where gain and mui are per-member arrays
    and est / fnu are scalars shared by every member of the RB. ``impsic``
    is the pre-computed residual-interference power of this RB.
    """
    an2 = np.einsum("ij,ij->j", A.conj(), A).real
    if np.any(an2 == 0):
        raise ValueError("combiner has a zero-norm column")
    W = A.conj().T @ Hhat                      # W[m, i] = a_m^H hhat_i
    absW2 = np.abs(W) ** 2
    tp = a_true[members].astype(bool)          # members are detected, so a=1 => TP
    gain = P * a_true[members] * absW2.diagonal() / an2
    est = P * float(delta[tp].sum())
    mui = P * (absW2[:, tp].sum(axis=1)
               - np.where(tp, absW2.diagonal(), 0.0)) / an2
    g_t = apm.g[t].astype(bool)
    fn = np.asarray(undecoded, bool) & g_t & (a_true > 0) & (a_hat == 0)
    fnu = P * sigma_h2 * float(beta[fn].sum())
    return gain, est, mui, fnu


def sinr(m: int, t: int, combiner: CombinerSet, Hhat: np.ndarray,
         delta: np.ndarray, undecoded: np.ndarray, a_true: np.ndarray,
         a_hat: np.ndarray, apm: AccessPatternMatrix, beta: np.ndarray,
         sigma_h2: float, P: float, N0: float,
         impsic: float = 0.0) -> SinrBreakdown:
    """SINR breakdown of user m in RB t given the RB's combiner and estimates.

    ``Hhat`` and ``delta`` hold the channel estimates / error variances of
    ``combiner.members`` (m must be one of them).
    """
    pos = np.flatnonzero(combiner.members == m)
    if pos.size == 0:
        raise ValueError(f"user {m} is not a member of this RB's combiner")
    gain, est, mui, fnu = rb_sinr_terms(
        combiner.A, Hhat, combiner.members, delta, t, undecoded, a_true,
        a_hat, apm, beta, sigma_h2, P, N0, impsic)
    i = int(pos[0])
    return SinrBreakdown(gain=float(gain[i]), est=est, mui=float(mui[i]),
                         fnu=fnu, impsic=float(impsic), noise=float(N0))


def _impsic_power(t: int, cancelled: dict[int, CancelledUser],
                  a_true: np.ndarray, P: float) -> float:
    """Residual interference in RB t from users cancelled with estimation error."""
    total = 0.0
    for rec in cancelled.values():
        if a_true[rec.user] and t in rec.delta_by_rb:
            total += rec.delta_by_rb[t]
    return P * total


def sic_loop(received: ReceivedSignals, frame: FrameRealization,
             population: UserPopulation, apm: AccessPatternMatrix,
             pilots: PilotBook, a_hat: np.ndarray,
             config: SystemConfig) -> DecodeTrace:
    """Iterative SIC decoding of one frame under the SINR threshold model.

    Per iteration: rebuild the residual pilot signal (per ``config.sic_mode``),
    re-estimate the channels of all detected undecoded users in their RBs,
    form RZF combiners per RB, and evaluate each candidate's best SINR over
    its RBs. In batch order every candidate above threshold is decoded and
    removed together; in sequential order only the single best one is. Stops
    when nothing is decoded in two successive iterations or no detected user
    remains undecoded.
    """
    M, T = apm.M, apm.T
    a_true = frame.a
    beta = population.beta
    N0, P = received.N0, config.P
    state = SicState(undecoded=np.ones(M, dtype=bool), k=0)
    cancelled: dict[int, CancelledUser] = {}
    decoded: list[tuple[int, int, int]] = []
    idle_iters = 0
    while state.k < M + 2:
        state.k += 1
        k = state.k
        undecoded = state.undecoded
        candidates = a_hat.astype(bool) & undecoded
        if not candidates.any():
            break
        Ypk = residual_pilot(received, frame, apm, pilots, undecoded,
                             config.sic_mode, cancelled)
        best_rho = np.full(M, -np.inf)
        best_rb = np.full(M, -1)
        est_by_rb: dict[int, tuple] = {}
        for t in range(T):
            members, Hhat, eta, delta = estimate_rb_channels(
                Ypk[t], t, undecoded, a_hat, a_true, apm, beta,
                config.sigma_h2, pilots, N0)
            if members.size == 0:
                continue
            est_by_rb[t] = (members, Hhat, delta)
            A = rzf_combiner(Hhat, config.lam)
            imp = (_impsic_power(t, cancelled, a_true, P)
                   if config.sic_mode == "imperfect" else 0.0)
            gain, est, mui, fnu = rb_sinr_terms(
                A, Hhat, members, delta, t, undecoded, a_true, a_hat, apm,
                beta, config.sigma_h2, P, N0, imp)
            rho = gain / (N0 + est + mui + fnu + imp)
            better = rho > best_rho[members]
            best_rho[members] = np.where(better, rho, best_rho[members])
            best_rb[members] = np.where(better, t, best_rb[members])
        # false positives can never be decoded: their SINR is zero by
        # definition and their packets would fail the error check anyway
        hits = np.flatnonzero((best_rho >= config.gamma_th) & (a_true > 0)
                              & candidates)
        if hits.size and config.decode_order == "sequential":
            hits = np.array([hits[np.argmax(best_rho[hits])]])
        if hits.size == 0:
            idle_iters += 1
            if idle_iters >= 2:
                break
            continue
        idle_iters = 0
        for u in hits:
            u = int(u)
            rec = CancelledUser(user=u, iteration=k, rb=int(best_rb[u]))
            for t in np.flatnonzero(apm.g[:, u]):
                if t in est_by_rb:
                    members, Hhat, delta = est_by_rb[t]
                    pos = np.flatnonzero(members == u)
                    if pos.size:
                        rec.h_by_rb[t] = Hhat[:, int(pos[0])].copy()
                        rec.delta_by_rb[t] = float(delta[int(pos[0])])
            cancelled[u] = rec
            decoded.append((u, k, rec.rb))
        state.undecoded[hits] = False
    return DecodeTrace(decoded=decoded, iterations=state.k,
                       throughput=len(decoded) / T)
