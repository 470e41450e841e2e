"""Envelope bounds for nonlinear shear frames under interval-valued seismic input.

Pipeline: synthesize artificial accelerograms from a site spectrum, enclose
the small ensemble in a convex-model interval process, sample admissible
motions through the truncated eigen-expansion of its correlation, and bound
the structural response per instant either by Monte Carlo or by evolution
strategies driven by low-discrepancy offspring, optionally warm-started
along the time axis.
"""

from .spectra import (
    GroundMotion,
    ModulationParams,
    PsdParams,
    clough_penzien_psd,
    epsd,
    kanai_tajimi_psd,
    modulation,
    synthesize_accelerogram,
    synthesize_ensemble,
)
from .interval_process import (
    IntervalProcess,
    KlBasis,
    SampleEnsemble,
    characteristic_params,
    construct_mrip,
    construct_mrsip,
    kl_decompose,
    kl_reconstruct,
    mahalanobis,
    sample_hypersphere,
)
from .lds import DesConfig, PointSet, drr, generate_des, l2_discrepancy
from .optimizer import EsState, ask, es_init, minimize, tell
from .frame import (
    BoucWenParams,
    ResponseHistory,
    ShearFrame,
    bouc_wen_rate,
    rayleigh_coefficients,
    simulate,
)
from .envelope import (
    EnvelopeConfig,
    EnvelopeResult,
    ResponseFunctional,
    des_es_ss,
    envelope_contains,
    instant_extremum,
    mcs_envelope,
    per_instant_envelope,
)
from .benchmarks import (
    BenchmarkFunction,
    TrialConfig,
    convergence_trial,
    make_benchmark,
    table_report,
)

__version__ = "0.1.0"
