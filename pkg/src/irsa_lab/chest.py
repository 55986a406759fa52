"""Per-SIC-iteration MMSE channel estimation from post-combined pilot signals.

The received pilot matrix of an RB is right-combined with a user's pilot,
and the channel estimate is a scaled version of that post-combined vector.
The scaling uses the detected activities (all the BS knows); the error
variance additionally involves the true activities, because only users that
actually transmitted contaminate the observation. The simulator keeps both:
the estimator output feeds the combiners, the error variance feeds the SINR
evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import (AccessPatternMatrix, FrameRealization, PilotBook,
                       ReceivedSignals, synthesize_pilot_rx)

__all__ = [
    "ChannelEstimate", "SicState", "CancelledUser", "post_combine_pilot",
    "mmse_estimate", "estimate_rb_channels", "residual_pilot",
]


@dataclass
class ChannelEstimate:
    h_hat: np.ndarray    # (N,) estimated channel
    eta: float           # scaling applied to the post-combined pilot signal
    delta: float         # estimation error variance per antenna


@dataclass
class SicState:
    """Undecoded-user set and iteration counter of the SIC loop."""

    undecoded: np.ndarray   # (M,) bool mask, True = not yet decoded
    k: int = 1


@dataclass
class CancelledUser:
    """Bookkeeping for a decoded user: frozen estimates at its decode iteration."""

    user: int
    iteration: int
    rb: int                                   # RB in which it was decoded
    h_by_rb: dict[int, np.ndarray] = field(default_factory=dict)
    delta_by_rb: dict[int, float] = field(default_factory=dict)


def post_combine_pilot(Ypk_t: np.ndarray, p_m: np.ndarray) -> np.ndarray:
    """Right-combine the RB's received pilot matrix with one pilot sequence."""
    return Ypk_t @ p_m


def mmse_estimate(Ypk_t: np.ndarray, m: int, t: int, undecoded: np.ndarray,
                  a_hat: np.ndarray, a_true: np.ndarray,
                  apm: AccessPatternMatrix, beta: np.ndarray, sigma_h2: float,
                  pilots: PilotBook, N0: float) -> ChannelEstimate:
    """MMSE estimate of user m's channel in RB t at the current SIC iteration.

    The estimate is eta * (Ypk_t @ p_m) with

        eta = ahat_m g_tm beta_m sigma_h2 ||p_m||^2
              / (N0 ||p_m||^2 + sum_i ahat_i g_ti beta_i sigma_h2 |p_i^H p_m|^2),

    the sum running over the undecoded users. The error variance delta keeps
    only users that are both detected and truly active in the sums (false
    positives contribute no signal; false negatives are accounted separately
    by the SINR's false-negative interference term).
    """
    p_m = pilots.p[:, m]
    pm2 = float(np.vdot(p_m, p_m).real)
    cross2 = np.abs(pilots.p.conj().T @ p_m) ** 2          # (M,) |p_i^H p_m|^2
    g_t = apm.g[t].astype(bool)
    sk = np.asarray(undecoded, dtype=bool)
    det = np.asarray(a_hat, dtype=bool)
    act = np.asarray(a_true, dtype=bool)

    w_eta = np.where(sk & g_t & det, beta * sigma_h2, 0.0)
    den_eta = N0 * pm2 + float(w_eta @ cross2)
    eta = (beta[m] * sigma_h2 * pm2 / den_eta) if (det[m] and g_t[m]) else 0.0

    w_del = np.where(sk & g_t & det & act, beta * sigma_h2, 0.0)
    den_del = N0 * pm2 + float(w_del @ cross2)
    num_del = den_del - w_del[m] * cross2[m]
    delta = beta[m] * sigma_h2 * num_del / den_del

    h_hat = eta * post_combine_pilot(Ypk_t, p_m)
    return ChannelEstimate(h_hat=h_hat, eta=float(eta), delta=float(delta))


def estimate_rb_channels(Ypk_t: np.ndarray, t: int, undecoded: np.ndarray,
                         a_hat: np.ndarray, a_true: np.ndarray,
                         apm: AccessPatternMatrix, beta: np.ndarray,
                         sigma_h2: float, pilots: PilotBook, N0: float):
    """Channel estimates for every detected, undecoded user scheduled in RB t.

    Equivalent to calling :func:`mmse_estimate` per user but batched: only
    members (detected, scheduled, undecoded) can carry nonzero weights, so the
    pilot cross-correlations are needed on the member set alone.

    Returns (members, Hhat, eta, delta) with Hhat of shape (N, K).
    """
    sk = np.asarray(undecoded, dtype=bool)
    det = np.asarray(a_hat, dtype=bool)
    members = np.flatnonzero(det & sk & (apm.g[t] > 0))
    K = members.size
    if K == 0:
        return members, np.zeros((Ypk_t.shape[0], 0), complex), \
            np.zeros(0), np.zeros(0)
    Pm = pilots.p[:, members]
    gram = Pm.conj().T @ Pm
    cross2 = np.abs(gram) ** 2                             # (K, K)
    pm2 = gram.diagonal().real
    w_eta = beta[members] * sigma_h2
    den_eta = N0 * pm2 + w_eta @ cross2
    eta = beta[members] * sigma_h2 * pm2 / den_eta

    tp = a_true[members].astype(bool)
    w_del = np.where(tp, beta[members] * sigma_h2, 0.0)
    den_del = N0 * pm2 + w_del @ cross2
    num_del = den_del - w_del * cross2.diagonal()
    delta = beta[members] * sigma_h2 * num_del / den_del

    Hhat = (Ypk_t @ Pm) * eta[None, :]
    return members, Hhat, eta, delta


def residual_pilot(received: ReceivedSignals, frame: FrameRealization,
                   apm: AccessPatternMatrix, pilots: PilotBook,
                   undecoded: np.ndarray, mode: str,
                   cancelled: dict[int, CancelledUser]) -> np.ndarray:
    """Received pilot signal after cancelling the decoded users.

    ``perfect`` re-synthesizes the signal with only the undecoded users
    transmitting (same noise realization as the original frame). ``imperfect``
    subtracts each decoded user's estimated rank-one contribution from the
    originally received signal, leaving the estimation error behind as
    residual interference.
    """
    if mode == "perfect":
        return synthesize_pilot_rx(frame, apm, pilots, received.N0,
                                   active_subset=np.flatnonzero(undecoded))
    if mode != "imperfect":
        raise ValueError(f"unknown SIC mode {mode!r}")
    Ypk = received.Yp.copy()
    for rec in cancelled.values():
        p_u = pilots.p[:, rec.user]
        for t, h_hat in rec.h_by_rb.items():
            Ypk[t] -= np.outer(h_hat, p_u.conj())
    return Ypk
