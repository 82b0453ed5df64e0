"""Desk-scale study of data-driven injection attacks against DC grid state
estimation: spectral subspace learning from short measurement windows, attack
construction, bad-data-detector evaluation and stealth/sparsity trade-offs.
"""

__version__ = "0.1.0"

from .attacks import (
    AttackVector,
    StateVarianceEstimate,
    eigenmode_attack,
    full_subspace_attack,
    noncentrality_estimate,
    optimal_attack,
    predicted_detection_probability,
    state_error_estimate,
)
from .cases import (
    Branch,
    Bus,
    CaseError,
    GridCase,
    MeasurementMatrix,
    build_measurement_matrix,
    dc_power_flow,
    load_case,
    parse_matpower_case,
    parse_native_case,
    serialize_native_case,
    synthetic_case,
)
from .estimation import (
    BddConfig,
    EstimationResult,
    calibrate_bdd,
    estimate_state,
    inject_and_detect,
    residual_sq,
)
from .harness import DetectionReport, ExperimentConfig, emit_report, run_experiment, statevar_sweep
from .numerics import GaussianStream, chi2_quantile, noncentral_chi2_sf
from .simulate import MeasurementTrace, TraceConfig, generate_trace
from .sparse import SparsityResult, TradeoffCurve, sparsest_attack, tradeoff_curve
from .spiked import (
    MpEdges,
    SpikedEstimate,
    SubspaceError,
    count_spikes,
    estimate_omega,
    estimate_spike_mu,
    learn_subspace,
    mp_edges,
    sample_covariance,
)
