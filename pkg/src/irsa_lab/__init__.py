"""Link-level simulator for IRSA grant-free random access.

Bayesian user activity detection over the access pattern structure, MMSE
channel estimation under pilot contamination, Cramer-Rao bound evaluation,
and SINR-threshold SIC decoding, with a Monte Carlo harness and CLI.
"""

from .config import ConfigurationError, SystemConfig, config_from_dict
from .scenario import (AccessPatternMatrix, FrameRealization, PilotBook,
                       ReceivedSignals, UserPopulation, draw_scenario,
                       generate_apm, generate_pilots, noise_variance,
                       place_users, rng_for_run, sample_frame, soliton_pmf,
                       synthesize_data_rx, synthesize_pilot_rx)
from .uad import (ClassificationSets, UadOutput, baseline_one_shot,
                  baseline_per_rb_voting, classify, combine_hyperparams,
                  e_step, log_likelihood, m_step_rb, reduce_rb, run_uad)
from .chest import (ChannelEstimate, estimate_rb_channels, mmse_estimate,
                    post_combine_pilot, residual_pilot)
from .crb import (CrbReport, crb_mse, fim_block, genie_mmse, normalized_crb,
                  orthogonal_nmse_bound, rb_crb_mse, true_hyperparams)
from .decode import DecodeTrace, SinrBreakdown, rzf_combiner, sic_loop, sinr
from .harness import (RocPoint, RunRecord, aggregate, nmse, roc_curves,
                      roc_sweep, run_monte_carlo, run_single)

__version__ = "0.1.0"
