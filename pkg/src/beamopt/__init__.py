"""Beam alignment as black-box maximization over a simulated mmWave link.

The package simulates a multipath channel between two linear arrays, exposes
noisy received-signal-strength measurements as the objective, and aligns beams
with Bayesian optimization (GP, boosted-tree, and random-forest surrogates
under expected improvement) against exhaustive-sweep, sparse-recovery (OMP),
and Thompson-sampling bandit baselines. The harness reproduces normalized
spectral-efficiency curves versus measurement budget and versus SNR.
"""

from .acquisition import AcquisitionState, expected_improvement, maximize_acquisition
from .baselines import (
    ArmStats,
    BudgetTooSmall,
    SensingSystem,
    TsMabConfig,
    exhaustive_search,
    omp_align,
    ts_mab_align,
)
from .channel import (
    BeamPair,
    ChannelParams,
    ChannelRealization,
    Codebook,
    RssMeter,
    beamforming_gain,
    build_codebook,
    draw_channel,
    measure_rss,
    measure_signal,
    spectral_efficiency,
    steering_vector,
)
from .harness import (
    CurvePoint,
    DegenerateBaseline,
    ExperimentConfig,
    normalized_spectral_efficiency,
    run_measurement_sweep,
    run_snr_sweep,
    single_run,
    write_csv,
)
from .numerics import (
    NotPositiveDefinite,
    hermitian_solve,
    rng_stream,
    sample_complex_gaussian,
    std_normal_cdf,
    std_normal_pdf,
)
from .optimizer import BoConfig, RunTrace, final_alignment, run_bo
from .surrogates import (
    Dataset,
    GaussianProcessSurrogate,
    GbrtConfig,
    GpConfig,
    GradientBoostedSurrogate,
    PosteriorPrediction,
    RandomForestSurrogate,
    RfConfig,
    fit_regression_tree,
)

__version__ = "0.1.0"
