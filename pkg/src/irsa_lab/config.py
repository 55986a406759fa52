"""System configuration: all scalar parameters of the simulated IRSA link.

A :class:`SystemConfig` fully determines one experiment (together with the
master seed). The population size can be given either directly as ``M`` or
through the load ``L`` (average number of active users per resource block),
in which case ``M = round(L * T / p_a)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

PILOT_TYPES = ("gaussian", "bpsk", "qpsk", "zadoff_chu", "hadamard_opr", "dft_opr")
SIC_MODES = ("perfect", "imperfect")
UAD_MODES = ("estimated", "perfect")
DECODE_ORDERS = ("batch", "sequential")


class ConfigurationError(ValueError):
    """Raised when a configuration value is missing, unknown, or out of range."""


@dataclass(frozen=True)
class SystemConfig:
    # population / frame geometry
    L: float | None = 1.0       # average active users per RB; used when M is None
    M: int | None = None        # total user count (overrides L when set)
    N: int = 16                 # BS antennas
    T: int = 50                 # resource blocks per frame
    tau: int = 20               # pilot length in symbols
    p_a: float = 0.1            # per-user activity probability

    # powers (dB) and propagation
    P_db: float = 20.0          # data symbol power
    Pp_db: float = 20.0         # pilot symbol power
    cell_edge_snr_db: float = 10.0
    alpha: float = 3.76         # path loss exponent
    r_max: float = 1000.0       # cell radius (m)
    r0: float = 100.0           # path loss reference distance (m)
    sigma_h2: float = 1.0       # fading variance

    # repetition degree distribution (truncated soliton)
    k_s: int = 27
    a_s: float = 0.02           # accepted for compatibility; unused by the sampler

    # detection / decoding
    j_max: int = 100            # EM iterations
    gamma_pr: float = 1e-4      # activity threshold on the hyperparameters
    em_tol: float = 1e-8        # early-exit tolerance on relative hyperparameter change
    gamma_th: float = 10.0      # SINR decoding threshold (linear)
    lam: float = 1e-2           # RZF regularization
    pilot_type: str = "gaussian"
    sic_mode: str = "perfect"
    uad_mode: str = "estimated"
    decode_order: str = "batch"

    # experiment control
    runs: int = 100
    seed: int = 0
    genie: bool = False         # also evaluate the genie-aided MMSE estimator
    decode: bool = True         # run the SIC decoding stage

    def __post_init__(self):
        if self.M is None and self.L is None:
            raise ConfigurationError("one of 'M' or 'L' must be set")
        _require(self.num_users >= 1, "M", self.num_users, ">= 1")
        _require(self.T >= 1, "T", self.T, ">= 1")
        _require(self.N >= 1, "N", self.N, ">= 1")
        _require(self.tau >= 1, "tau", self.tau, ">= 1")
        _require(0.0 < self.p_a <= 1.0, "p_a", self.p_a, "in (0, 1]")
        _require(self.r0 < self.r_max, "r0", self.r0, f"< r_max ({self.r_max})")
        _require(self.r0 > 0, "r0", self.r0, "> 0")
        _require(self.sigma_h2 > 0, "sigma_h2", self.sigma_h2, "> 0")
        _require(self.alpha > 0, "alpha", self.alpha, "> 0")
        _require(1 <= self.k_s <= self.T, "k_s", self.k_s, f"in [1, T] (T={self.T})")
        _require(self.j_max >= 1, "j_max", self.j_max, ">= 1")
        _require(self.gamma_pr > 0, "gamma_pr", self.gamma_pr, "> 0")
        _require(self.em_tol >= 0, "em_tol", self.em_tol, ">= 0")
        _require(self.gamma_th > 0, "gamma_th", self.gamma_th, "> 0")
        _require(self.lam >= 0, "lam", self.lam, ">= 0")
        _require(self.runs >= 0, "runs", self.runs, ">= 0")
        _require(self.pilot_type in PILOT_TYPES, "pilot_type", self.pilot_type,
                 f"one of {PILOT_TYPES}")
        _require(self.sic_mode in SIC_MODES, "sic_mode", self.sic_mode,
                 f"one of {SIC_MODES}")
        _require(self.uad_mode in UAD_MODES, "uad_mode", self.uad_mode,
                 f"one of {UAD_MODES}")
        _require(self.decode_order in DECODE_ORDERS, "decode_order", self.decode_order,
                 f"one of {DECODE_ORDERS}")

    # ---- derived quantities (linear scale) ----

    @property
    def num_users(self) -> int:
        """Total user count; round(L * T / p_a) when M is not given explicitly."""
        if self.M is not None:
            return int(self.M)
        return int(round(self.L * self.T / self.p_a))

    @property
    def load(self) -> float:
        """Average active users per RB implied by the resolved user count."""
        return self.num_users * self.p_a / self.T

    @property
    def P(self) -> float:
        return 10.0 ** (self.P_db / 10.0)

    @property
    def Pp(self) -> float:
        return 10.0 ** (self.Pp_db / 10.0)

    @property
    def snr_edge(self) -> float:
        return 10.0 ** (self.cell_edge_snr_db / 10.0)

    @property
    def beta_edge(self) -> float:
        """Path loss of a user at the cell edge."""
        return (self.r_max / self.r0) ** (-self.alpha)

    @property
    def N0(self) -> float:
        from .scenario import noise_variance

        return noise_variance(self.P_db, self.sigma_h2, self.beta_edge,
                              self.cell_edge_snr_db)

    # ---- (de)serialization for config files and flag overrides ----

    def replace(self, **changes) -> "SystemConfig":
        if "M" in changes and "L" not in changes:
            changes.setdefault("L", None)
        if "L" in changes and "M" not in changes:
            changes.setdefault("M", None)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(SystemConfig)}


def _require(ok: bool, key: str, value, accepted: str):
    if not ok:
        raise ConfigurationError(f"{key}={value!r}: accepted range is {accepted}")


def _coerce(key: str, value):
    """Coerce a raw (file/flag) value to the field's type, with diagnostics."""
    if value is None:
        return None
    try:
        if key in ("L",):
            return float(value)
        if key in ("M", "N", "T", "tau", "k_s", "j_max", "runs", "seed"):
            iv = int(value)
            if float(value) != iv:
                raise ValueError
            return iv
        if key in ("pilot_type", "sic_mode", "uad_mode", "decode_order"):
            return str(value)
        if key in ("genie", "decode"):
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}={value!r}: cannot convert to "
                                 f"{_FIELD_TYPES[key].type}") from None


def config_from_dict(data: dict, base: SystemConfig | None = None) -> SystemConfig:
    """Build a config from a plain dict, rejecting unknown keys.

    When ``base`` is given, its values act as defaults and ``data`` overrides
    them; otherwise the package defaults apply.
    """
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigurationError(
            f"unknown configuration key(s) {unknown}; "
            f"valid keys: {sorted(_FIELD_TYPES)}")
    coerced = {k: _coerce(k, v) for k, v in data.items()}
    if base is None:
        # Giving M explicitly should win over the default load.
        if "M" in coerced and "L" not in coerced:
            coerced["L"] = None
        return SystemConfig(**coerced)
    merged = base.to_dict()
    if "M" in coerced and "L" not in coerced:
        merged["L"] = None
    if "L" in coerced and "M" not in coerced:
        merged["M"] = None
    merged.update(coerced)
    return SystemConfig(**merged)
