"""Narrowest significance pursuit.

Given a response series and a postulated linear model, find the shortest
intervals that each must contain a change in the model parameters, at a
user-chosen global significance level.
"""

__version__ = "0.1.0"

from .engine import (Detection, DeviationResult, NspConfig, SignificanceSet,
                     deviation_plain, deviation_selfnorm, draw_intervals,
                     nsp_run, shortest_significant_subinterval)
from .harness import (CoverageResult, ExperimentSpec, NoiseSpec,
                      PiecewiseSignal, five_change_signal, gen_noise,
                      gen_series, gen_signal, run_coverage, score_coverage,
                      squarewave)
from .minimax import MinimaxFitResult, fit_minimax, fit_minimax_weighted
from .noise import (ScaleEstimate, sigma_mad, sigma_mols, sigma_rice,
                    vt_estimate)
from .scenarios import ScenarioSpec, augment_ar, build_design
from .selection import (GapReport, ProminenceReport, cusum_locate,
                        prominence_order, segment_pvalues)
from .sequences import (IntervalFamily, PrefixSums, all_intervals_family,
                        dyadic_family, multiresolution_norm,
                        norm_all_intervals, scaled_partial_sum)
from .thresholds import (ThresholdSpec, gamma_from_alpha, gaussian_threshold,
                         light_tailed_threshold, monte_carlo_threshold,
                         pvalue_upper_bound, self_normalised_quantile)

__all__ = [name for name in dir() if not name.startswith("_")]
