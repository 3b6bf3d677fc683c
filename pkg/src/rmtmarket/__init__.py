"""Random-matrix analysis of financial correlation matrices.

Modules
-------
synth        Gaussian panels with imposed correlation structure, regime surrogates.
ensembles    Wishart ensembles and the Marcenko-Pastur law.
correlation  Log returns, epoch correlation matrices, serialization.
powermap     Power-map distortion and the emerging spectrum.
modes        Market / group / random mode decomposition.
dynamics     Epoch statistics and their lagged relations.
states       Similarity, MDS, k-means and market-state transitions.
ingest       Price/sector files and a correlation cache.
cli          Command-line recipes.
"""
from .errors import (DataError, DegenerateSeriesError, DomainError, FormatError, NumericError, ParameterError,
                     RmtError)
from .correlation import (CorrelationMatrix, PricePanel, ReturnMatrix, epoch_correlation, log_returns, pearson,
                          rolling_correlations)
from .synth import CorrelationTarget, GaussianPanel, block_surrogate, correlate_panel, gaussian_panel
from .ensembles import (GeneratorSpec, SpectralDensity, ensemble_spectrum, mp_bounds, mp_density, mp_zero_mass,
                        wishart)
from .powermap import EmergingSpectrum, emerging_ensemble, emerging_spectrum, power_map
from .modes import ModeDecomposition, decompose_modes, suggest_n_group
from .dynamics import EpochStats, epoch_stats, lag1_effect_tstat, lagged_relation, stats_series
from .states import (MarketStateModel, classical_mds, fit_market_states, kmeans_ensemble, optimal_k,
                     similarity_matrix, transition_matrix)
from .ingest import SectorMap, load_prices, load_sectors, sector_sort

__version__ = "0.1.0"
