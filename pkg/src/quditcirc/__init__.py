"""Shallow unitary circuits on qudit chains.

Four capability areas:

* sim/types: dense qudit-register simulation, local operators, circuits,
  Weyl operators, swap identities, hermitian/density decompositions.
* protocol: the charge-spreading protocol that distinguishes shallow
  symmetric circuits from global symmetric unitaries.
* learning: Heisenberg-picture tomography of a hidden shallow circuit
  and assembly of the U (x) U^dag double circuit from swaps.
* qca: generator-table QCA maps, the GNVW index, staircase compilation
  of shifts and subalgebra pumps, and two-layer factorization.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConsistencyError,
    GuardError,
    InvalidDimensionError,
    NonHermitianError,
    NonUnitaryError,
    QuditError,
    SupportError,
    SymmetryViolationError,
)
from .learning import (
    HeisenbergImage,
    LearnedDoubleCircuit,
    OracleChannel,
    TomographySettings,
    assemble_double_circuit,
    batch_learn,
    conjugated_swap,
    double_circuit_from_truth,
    learn_site_images,
    learning_groups,
    make_oracle,
    verify_double,
)
from .protocol import (
    ChargeOperator,
    Partition,
    ProtocolConfig,
    ProtocolResult,
    analytic_average,
    comb_conserved_charge,
    comb_symmetric_gate,
    default_partition,
    distinguish,
    make_global_sampler,
    make_shallow_sampler,
    number_charge,
    prepare_charged_state,
    required_repetitions,
    run_protocol_once,
    shallow_symmetric_circuit,
    symmetric_haar,
)
from .qca import (
    BandQCA,
    CompileSpec,
    QCAMap,
    StaircaseCircuit,
    TensorFactorization,
    VerificationReport,
    band_qca,
    beta_subalgebra_qca,
    compile_qca,
    compile_shift,
    compose_qca,
    gnvw_index,
    identity_qca,
    invert_qca,
    is_translation_invariant,
    map_operator,
    pump_subalgebra,
    qca_equal,
    qca_from_circuit,
    reconstruct_unitary,
    shift_qca,
    truncate_halfspace,
    two_layer_decompose,
    verify_qca,
)
from .seeds import child_seed, splitmix64
from .serialize import (
    circuit_from_json,
    circuit_to_json,
    qca_from_json,
    qca_to_json,
)
from .sim import (
    apply_circuit,
    circuit_unitary,
    conjugate_by_gate,
    conjugate_through_gates,
    expectation,
    generalized_pauli,
    haar_unitary,
    hermitian_split,
    operator_to_densities,
    operator_to_global,
    partial_swap_operator,
    random_brickwork,
    reduced_density,
    swap_operator,
    ti_brickwork,
    truncate_support,
    weyl_matrix,
    weyl_string,
)
from .types import (
    Circuit,
    DensityMatrix,
    LocalOperator,
    QuditRegister,
    StateVector,
)
