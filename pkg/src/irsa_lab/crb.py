"""Fisher information and Cramer-Rao bounds for the per-RB channel estimates.

Under the hierarchical Gaussian prior the FIM of one RB's vectorized channel
matrix is block diagonal across antennas with identical blocks, so the MSE
bound reduces to N * N0 * Tr((P^H P + N0 Gamma^{-1})^{-1}). A Woodbury
rewrite avoids Gamma^{-1} and is used whenever hyperparameters are tiny or
zero. The genie-aided MMSE estimator (true hyperparameters known) attains
the bound and serves as the empirical reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FimBlock", "CrbReport", "fim_block", "crb_mse", "rb_crb_mse",
           "normalized_crb", "orthogonal_nmse_bound", "genie_mmse",
           "true_hyperparams"]

_SMALL_GAMMA = 1e-8   # switch to the inversion-free form below this


@dataclass
class FimBlock:
    """Per-antenna Fisher information block of one RB: N0^{-1}(P^H P + N0 Gamma^{-1})."""

    core: np.ndarray   # (M_t, M_t) Hermitian positive definite


@dataclass
class CrbReport:
    """MSE bound pieces for a whole frame."""

    per_rb_mse: np.ndarray    # (T,) lower bounds on E||Zhat_t - Z_t||_F^2
    total_mse: float
    channel_power: float      # E||X||_F^2 = N * sum_m d_m gamma_m
    nmse_bound: float


def fim_block(P_t: np.ndarray, gamma_t: np.ndarray, N0: float) -> FimBlock:
    """Fisher information block for one RB; requires strictly positive gamma."""
    gamma_t = np.asarray(gamma_t, dtype=float)
    if gamma_t.size and gamma_t.min() <= 0:
        raise ValueError("fim_block needs gamma > 0; the bound is undefined "
                         "for a degenerate prior (restrict the problem first)")
    core = (P_t.conj().T @ P_t) / N0
    core[np.diag_indices(core.shape[0])] += 1.0 / gamma_t
    return FimBlock(core=core)


def rb_crb_mse(P_t: np.ndarray, gamma_t: np.ndarray, N0: float, N: int,
               method: str = "auto") -> float:
    """MSE lower bound N * Tr(J_t^{-1}) for one RB.

    Rows with gamma = 0 are dropped first (their entries are exactly zero and
    carry no error). ``method`` picks the algebraic form: ``fim`` computes
    N * N0 * Tr((P^H P + N0 Gamma^{-1})^{-1}); ``woodbury`` the equivalent
    N * Tr(Gamma - Gamma P^H (N0 I + P Gamma P^H)^{-1} P Gamma); ``auto``
    uses the Woodbury form when any hyperparameter is small.
    """
    gamma_t = np.asarray(gamma_t, dtype=float)
    keep = gamma_t > 0
    if not keep.any():
        return 0.0
    P_t = P_t[:, keep]
    gamma_t = gamma_t[keep]
    if method == "auto":
        method = "woodbury" if gamma_t.min() < _SMALL_GAMMA else "fim"
    if method == "fim":
        core = fim_block(P_t, gamma_t, N0).core
        return float(N * np.trace(np.linalg.inv(core)).real)
    if method == "woodbury":
        tau = P_t.shape[0]
        C = P_t * gamma_t[None, :]
        S = C @ P_t.conj().T
        S[np.diag_indices(tau)] += N0
        # Tr(Gamma) - Tr(C^H S^{-1} C), diagonal only
        SinvC = np.linalg.solve(S, C)
        return float(N * (gamma_t.sum()
                          - np.einsum("ij,ij->", C.conj(), SinvC).real))
    raise ValueError(f"unknown method {method!r}")


def crb_mse(pilot_blocks: list[np.ndarray], gamma_blocks: list[np.ndarray],
            N0: float, N: int, method: str = "auto") -> tuple[np.ndarray, float]:
    """Per-RB and total MSE bounds for a frame's reduced pilot problems."""
    per_rb = np.array([rb_crb_mse(P_t, g_t, N0, N, method=method)
                       for P_t, g_t in zip(pilot_blocks, gamma_blocks)])
    return per_rb, float(per_rb.sum())


def normalized_crb(per_rb_mse: np.ndarray, d: np.ndarray, gamma: np.ndarray,
                   N: int) -> CrbReport:
    """Normalize the total MSE bound by the mean channel power.

    The channel power is N * sum_m d_m gamma_m; both it and the bound scale
    linearly in N, so the normalized bound is antenna-count free.
    """
    channel_power = float(N * np.sum(np.asarray(d, float) * np.asarray(gamma, float)))
    if channel_power <= 0:
        raise ValueError("zero channel power: no active user carries energy, "
                         "the normalized bound is undefined")
    per_rb_mse = np.asarray(per_rb_mse, dtype=float)
    total = float(per_rb_mse.sum())
    return CrbReport(per_rb_mse=per_rb_mse, total_mse=total,
                     channel_power=channel_power,
                     nmse_bound=total / channel_power)


def orthogonal_nmse_bound(d: np.ndarray, gamma: np.ndarray, tau: int,
                          Pp: float, N0: float) -> float:
    """Closed-form normalized bound when pilots satisfy P^H P = tau Pp I."""
    d = np.asarray(d, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    power = np.sum(d * gamma)
    if power <= 0:
        raise ValueError("zero channel power")
    return float(np.sum(d * gamma / (1.0 + gamma * tau * Pp / N0)) / power)


def genie_mmse(Ybar_t: np.ndarray, P_t: np.ndarray, gamma_t: np.ndarray,
               N0: float) -> np.ndarray:
    """MMSE channel estimate with known (true) hyperparameters.

    Zhat = (P^H P + N0 Gamma^{-1})^{-1} P^H Ybar, evaluated on the rows with
    gamma > 0; the remaining rows are exactly zero. Attains the CRB.
    """
    gamma_t = np.asarray(gamma_t, dtype=float)
    out = np.zeros((gamma_t.size, Ybar_t.shape[1]), dtype=complex)
    keep = gamma_t > 0
    if not keep.any():
        return out
    P = P_t[:, keep]
    core = (P.conj().T @ P)
    core[np.diag_indices(core.shape[0])] += N0 / gamma_t[keep]
    out[keep] = np.linalg.solve(core, P.conj().T @ Ybar_t)
    return out


def true_hyperparams(a_true: np.ndarray, beta: np.ndarray,
                     sigma_h2: float) -> np.ndarray:
    """Ground-truth channel variances: beta_m sigma_h2 for active users, else 0."""
    return np.asarray(a_true, dtype=float) * np.asarray(beta, dtype=float) * sigma_h2
