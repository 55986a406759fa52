"""Random inputs of the IRSA link and received-signal synthesis.

Generates the user population (path losses, repetition factors), the access
pattern matrix, pilot books of several families, per-frame activities,
channels and data symbols, and the received pilot/data signals.

All randomness flows through an explicit ``numpy.random.Generator``. The
noise is drawn once per frame (unit variance) and scaled at synthesis time,
so the same frame can be re-synthesized for any subset of users with the
identical noise realization -- which is what interference cancellation needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import hadamard

from .config import ConfigurationError, SystemConfig

__all__ = [
    "UserPopulation", "AccessPatternMatrix", "PilotBook", "FrameRealization",
    "ReceivedSignals", "soliton_pmf", "generate_apm", "place_users",
    "noise_variance", "generate_pilots", "sample_frame",
    "synthesize_pilot_rx", "synthesize_data_rx", "draw_scenario", "rng_for_run",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class UserPopulation:
    """Static per-user attributes: path loss, distance, repetition factor."""

    beta: np.ndarray      # (M,) linear path loss
    radius: np.ndarray    # (M,) distance from the BS in meters
    d: np.ndarray         # (M,) repetition factor


@dataclass
class AccessPatternMatrix:
    """T x M binary matrix; column m marks the RBs user m would occupy."""

    g: np.ndarray         # (T, M) uint8

    @property
    def T(self) -> int:
        return self.g.shape[0]

    @property
    def M(self) -> int:
        return self.g.shape[1]

    @cached_property
    def members(self) -> list[np.ndarray]:
        """Index set of users scheduled in each RB."""
        return [np.flatnonzero(self.g[t]) for t in range(self.T)]

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.g.sum(axis=0).astype(np.int64)


@dataclass
class PilotBook:
    """tau x M complex matrix; column m is the pilot sequence of user m."""

    p: np.ndarray         # (tau, M) complex128
    pilot_type: str
    Pp: float             # per-symbol pilot power (linear)

    @cached_property
    def norms2(self) -> np.ndarray:
        """Squared 2-norm of each pilot column."""
        return np.einsum("ij,ij->j", self.p.conj(), self.p).real


@dataclass
class FrameRealization:
    """Ground truth of one frame: activities, channels, data, unit noise."""

    a: np.ndarray             # (M,) uint8 activity coefficients
    H: np.ndarray             # (T, N, M) complex channels, col m = h_tm
    x: np.ndarray             # (M,) complex data symbols, E|x|^2 = P
    pilot_noise: np.ndarray   # (T, N, tau) unit-variance complex noise
    data_noise: np.ndarray    # (T, N) unit-variance complex noise


@dataclass
class ReceivedSignals:
    """Per-RB received pilot matrices and data vectors."""

    Yp: np.ndarray        # (T, N, tau)
    y: np.ndarray         # (T, N)
    N0: float


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def rng_for_run(seed: int, run: int) -> np.random.Generator:
    """Counter-based substream: independent, order-insensitive per-run RNGs."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), int(run))))


def _cn(rng: np.random.Generator, shape, var) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with per-entry variance."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def soliton_pmf(k_s: int, a_s: float | None = None) -> np.ndarray:
    """Truncated soliton pmf over repetition factors 1..k_s.

    p(1) = 1/k_s and p(d) = 1/(d(d-1)) for 2 <= d <= k_s, renormalized.
    The mean at k_s = 27 is about 3.9. ``a_s`` is accepted for interface
    compatibility but does not enter the sampler.
    """
    if k_s < 1:
        raise ConfigurationError(f"k_s={k_s!r}: accepted range is >= 1")
    pmf = np.empty(k_s, dtype=float)
    pmf[0] = 1.0 / k_s
    if k_s > 1:
        d = np.arange(2, k_s + 1, dtype=float)
        pmf[1:] = 1.0 / (d * (d - 1.0))
    return pmf / pmf.sum()


def generate_apm(rng: np.random.Generator, M: int, T: int,
                 pmf: np.ndarray) -> tuple[AccessPatternMatrix, np.ndarray]:
    """Sample repetition factors from ``pmf`` and draw each user's RBs.

    User m picks d_m distinct RBs uniformly at random out of T. Factors
    exceeding T are clamped to T. Returns the access pattern matrix and the
    sampled repetition factors.
    """
    degrees = rng.choice(np.arange(1, len(pmf) + 1), size=M, p=pmf)
    degrees = np.minimum(degrees, T).astype(np.int64)
    # rank each RB by an iid uniform key; the d_m smallest ranks per user
    # form a uniformly random d_m-subset
    keys = rng.random((M, T))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    g = (ranks < degrees[:, None]).T.astype(np.uint8)
    return AccessPatternMatrix(g=np.ascontiguousarray(g)), degrees


def place_users(rng: np.random.Generator, M: int, r_max: float, r0: float,
                alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Drop users uniformly over the disk of radius r_max.

    Area-uniform placement: radius = r_max * sqrt(U). Returns the linear
    path losses beta_m = (r_m / r0)^(-alpha) and the radii.
    """
    radius = r_max * np.sqrt(rng.random(M))
    beta = (radius / r0) ** (-alpha)
    return beta, radius


def noise_variance(P_db: float, sigma_h2: float, beta_edge: float,
                   cell_edge_snr_db: float) -> float:
    """Noise variance pinned by the cell-edge SNR.

    The received SNR of user m is P * sigma_h2 * beta_m / N0; solving for a
    user at the cell edge gives N0 = P * sigma_h2 * beta_edge / snr_edge.
    """
    P = 10.0 ** (P_db / 10.0)
    snr_edge = 10.0 ** (cell_edge_snr_db / 10.0)
    return P * sigma_h2 * beta_edge / snr_edge


def _zadoff_chu_book(rng, tau: int, M: int) -> np.ndarray:
    if tau < 2 or any(tau % q == 0 for q in range(2, int(tau ** 0.5) + 1)):
        raise ConfigurationError(
            f"tau={tau!r}: accepted range for zadoff_chu pilots is a prime >= 2")
    n = np.arange(tau)
    roots = 1 + (np.arange(M) % (tau - 1))
    return np.exp(-1j * np.pi * roots[:, None] * n * (n + 1) / tau).T


def generate_pilots(rng: np.random.Generator, pilot_type: str, tau: int, M: int,
                    Pp: float) -> PilotBook:
    """Draw the pilot book of the requested family, scaled to power Pp.

    gaussian        iid CN(0, Pp) symbols
    bpsk / qpsk     random PSK symbols of magnitude sqrt(Pp)
    zadoff_chu      root sequences exp(-i*pi*u*n(n+1)/tau), tau prime,
                    root index cycling over users
    hadamard_opr    orthogonal pilot reuse from the tau Hadamard columns
                    (tau must be a power of two)
    dft_opr         orthogonal pilot reuse from the tau DFT columns
    """
    amp = np.sqrt(Pp)
    if pilot_type == "gaussian":
        p = _cn(rng, (tau, M), Pp)
    elif pilot_type == "bpsk":
        p = amp * rng.choice([-1.0, 1.0], size=(tau, M)).astype(complex)
    elif pilot_type == "qpsk":
        p = amp / np.sqrt(2) * (rng.choice([-1.0, 1.0], size=(tau, M))
                                + 1j * rng.choice([-1.0, 1.0], size=(tau, M)))
    elif pilot_type == "zadoff_chu":
        p = amp * _zadoff_chu_book(rng, tau, M)
    elif pilot_type in ("hadamard_opr", "dft_opr"):
        if pilot_type == "hadamard_opr":
            if tau & (tau - 1) != 0:
                raise ConfigurationError(
                    f"tau={tau!r}: accepted range for hadamard_opr pilots is a power of 2")
            book = hadamard(tau).astype(complex)
        else:
            n = np.arange(tau)
            book = np.exp(-2j * np.pi * np.outer(n, n) / tau)
        choice = rng.integers(0, tau, size=M)
        p = amp * book[:, choice]
    else:
        raise ConfigurationError(
            f"pilot_type={pilot_type!r}: accepted range is one of "
            "('gaussian', 'bpsk', 'qpsk', 'zadoff_chu', 'hadamard_opr', 'dft_opr')")
    return PilotBook(p=np.ascontiguousarray(p), pilot_type=pilot_type, Pp=Pp)


def sample_frame(rng: np.random.Generator, config: SystemConfig,
                 population: UserPopulation) -> FrameRealization:
    """Draw one frame: activities, fading channels, data symbols, noise.

    Channels are h_tm = sqrt(beta_m) * v_tm with v_tm ~ CN(0, sigma_h2 I_N),
    iid across RBs and users. Data symbols are complex Gaussian with power P
    (only their second moment enters the SINR model). Noise is stored with
    unit variance and scaled by sqrt(N0) at synthesis time.
    """
    M, T, N, tau = config.num_users, config.T, config.N, config.tau
    a = (rng.random(M) < config.p_a).astype(np.uint8)
    v = _cn(rng, (T, N, M), config.sigma_h2)
    H = np.sqrt(population.beta)[None, None, :] * v
    x = _cn(rng, M, config.P)
    pilot_noise = _cn(rng, (T, N, tau), 1.0)
    data_noise = _cn(rng, (T, N), 1.0)
    return FrameRealization(a=a, H=H, x=x, pilot_noise=pilot_noise,
                            data_noise=data_noise)


def _coeff(frame: FrameRealization, apm: AccessPatternMatrix,
           active_subset: np.ndarray | None) -> np.ndarray:
    """Per-(RB, user) transmit indicator a_m * g_tm, optionally restricted."""
    c = frame.a[None, :] * apm.g
    if active_subset is not None:
        sub = np.zeros(apm.M, dtype=bool)
        sub[active_subset] = True
        c = c * sub[None, :]
    return c.astype(float)


def synthesize_pilot_rx(frame: FrameRealization, apm: AccessPatternMatrix,
                        pilots: PilotBook, N0: float,
                        active_subset: np.ndarray | None = None) -> np.ndarray:
    """Received pilot signal per RB: sum_m a_m g_tm h_tm p_m^H + noise.

    ``active_subset`` restricts the transmitting users (the SIC loop passes
    the not-yet-decoded set); the frame's stored noise realization is reused.
    """
    c = _coeff(frame, apm, active_subset)
    Yp = np.matmul(frame.H * c[:, None, :], pilots.p.conj().T)
    Yp += np.sqrt(N0) * frame.pilot_noise
    return Yp


def synthesize_data_rx(frame: FrameRealization, apm: AccessPatternMatrix,
                       N0: float,
                       active_subset: np.ndarray | None = None) -> np.ndarray:
    """Received data signal per RB: sum_m a_m g_tm h_tm x_m + noise."""
    c = _coeff(frame, apm, active_subset)
    y = np.einsum("tnm,tm->tn", frame.H, c * frame.x[None, :])
    y += np.sqrt(N0) * frame.data_noise
    return y


def draw_scenario(rng: np.random.Generator, config: SystemConfig):
    """Draw a full independent realization for one Monte Carlo run.

    Returns (population, apm, pilots, frame, received); the draw order is
    fixed so that identical (seed, config) give bit-identical output.
    """
    M, T = config.num_users, config.T
    beta, radius = place_users(rng, M, config.r_max, config.r0, config.alpha)
    apm, degrees = generate_apm(rng, M, T, soliton_pmf(config.k_s, config.a_s))
    population = UserPopulation(beta=beta, radius=radius, d=degrees)
    pilots = generate_pilots(rng, config.pilot_type, config.tau, M, config.Pp)
    frame = sample_frame(rng, config, population)
    N0 = config.N0
    received = ReceivedSignals(
        Yp=synthesize_pilot_rx(frame, apm, pilots, N0),
        y=synthesize_data_rx(frame, apm, N0),
        N0=N0,
    )
    return population, apm, pilots, frame, received
