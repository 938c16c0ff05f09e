# __init__.py
# Import pipeline modules
from .graph import (
    CutOracleResult,
    GraphFormatError,
    GraphInstance,
    GraphSizeError,
    brute_force_optimum,
    cut_value,
    parse_edge_list,
    read_edge_list,
)
from .graph_generator import preset_instance
from .hamiltonian import cost_diagonal, cost_phase_layer, mixer_layer, step_unitary
from .evolve import (
    EvolutionResult,
    Schedule,
    initial_state,
    run_evolution,
    schedule_params,
    success_probability,
)
from .spectral import (
    CrowdingSeries,
    SpectralSnapshot,
    crowding_series,
    delta_theta_min,
    eigendecompose_unitary,
)
from .tracking import (
    BandTrack,
    PermutationResult,
    RefinementCheck,
    assign_bands,
    compare_refinements,
    end_to_end_permutation,
    overlap_matrix,
    track_bands,
)
from .report import RunConfig, RunSummary, emit_outputs, run_experiment, run_sweep
