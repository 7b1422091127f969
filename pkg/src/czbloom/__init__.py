"""Two-weight commutator norm bounds for singular integrals on finite
doubling spaces: dyadic systems, sparse operators, Muckenhoupt/Bloom
weights, kernel certificates, and upper/lower bound verification suites."""

__version__ = "0.1.0"

from .space import (                                    # noqa: F401
    Ball,
    SpaceModel,
    SpaceProfile,
    ball,
    doubling_profile,
    load_space,
    quasi_triangle_constant,
    set_distance,
    space_from_coords,
    space_from_metric,
    volume,
)
from .generators import generate_space, generate_symbol, generate_weight  # noqa: F401
from .dyadic import (                                   # noqa: F401
    DyadicSystem,
    SparseFamily,
    augment_sparse_family,
    build_adjacent_systems,
    build_dyadic_system,
    verify_dyadic_axioms,
    verify_sparse,
)
from .weights import (                                  # noqa: F401
    BloomTuple,
    WeightProfile,
    ap_characteristic,
    app_characteristic,
    bloom_comparison_report,
    bloom_tuple,
    bmo_fractional_norm,
    bmo_sparse_norm,
    oscillation,
    weighted_lp_norm,
)
from .kernels import KernelSpec, adjoint, certify, evaluate, kernel_matrix  # noqa: F401
from .operator import (                                 # noqa: F401
    NormEstimate,
    OperatorMatrix,
    adjoint_apply,
    apply,
    commutator_apply,
    commutator_matrix,
    operator_from_kernel,
    operator_norm,
    pairing,
)
from .sparse_bound import (                             # noqa: F401
    dominate_commutator,
    fractional_sparse_apply,
    sparse_apply,
    sparse_commutator_pair,
    verify_upper_bound,
)
from .lower_bound import (                              # noqa: F401
    awf_double,
    awf_single,
    bound_oscillation,
    check_admissible,
    dualize_admissible,
    find_companion_ball,
    lower_bound_bmo,
    median_decomposition,
    median_value,
)
