"""Finite-dimensional simulation of copying, branching, capacity and entropy growth."""

__version__ = "0.1.0"

from .errors import EverettropyError, PropertyViolation, ValidationError
from .tensor_algebra import (
    Operator,
    OperatorFlags,
    SystemLayout,
    coefficients_over_matrix_units,
    default_tol,
    embed,
    local_operator,
    matrix_unit,
    operator_flags,
    partial_trace,
    reconstruct_from_matrix_units,
    reorder,
    tensor,
)
from .states import (
    DensityState,
    FormVerdict,
    Observable,
    QuantumGame,
    expectation,
    game_value,
    knowledge_form_check,
    reduced_state,
    schmidt_decompose,
    von_neumann_entropy,
)
from .dynamics import (
    EvolutionStep,
    controlled_permutation,
    dephase,
    detect_branching,
    evolve_heisenberg,
    evolve_schrodinger,
    perfect_measurement_unitary,
    permutation_unitary,
)
from .copyability import (
    CopyVerdict,
    build_copy_unitary,
    classify_copyable,
    cloning_demo,
    search_copy_unitary,
    verify_copy,
)
from .capacity import ChannelExperiment, i_max, mutual_information, run_permutation_code
from .selection import SelectionRun, knowledge_state, run_selection, selection_unitary
from .szilard import EntropyTrace, run_szilard, stage_unitaries
