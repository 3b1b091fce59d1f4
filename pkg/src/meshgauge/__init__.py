"""meshgauge: gauge-equivariant convolution primitives on triangle meshes.

The library builds per-vertex tangent frames with neighbor angles and
parallel-transport angles (geometry), solves the rotation-constrained kernel
spaces (algebra), applies equivariant convolutions and sampled nonlinearities
to feature fields (layers), and quantitatively audits every symmetry claim
(audit). The CLI ties these into reproducible batch runs.
"""

__version__ = "0.1.0"

from .algebra import (  # noqa: F401
    FourierKernel,
    LayerWeights,
    ReprType,
    apply_rep,
    assemble_kernels,
    assemble_neigh_kernel,
    assemble_self_kernel,
    basis_neigh,
    basis_self,
    init_layer_weights,
    irrep,
    kernel_span_residual,
    numeric_kernel_basis,
    param_count,
    rep,
)
from .audit import (  # noqa: F401
    ambient_invariance_audit,
    enumerate_icosahedron_isometries,
    gauge_equivariance_audit,
    isometry_equivariance_audit,
    network_model,
    nonlinearity_bound_audit,
    nonlinearity_scaling_audit,
    pushforward_field,
    shift_commutator,
    standard_network,
    standard_network_factory,
)
from .errors import (  # noqa: F401
    DegenerateGeometryError,
    MeshGaugeError,
    UsageError,
    ValidationFailure,
)
from .geometry import (  # noqa: F401
    GaugeAtlas,
    apply_gauge_change,
    atlas_from_json,
    atlas_to_json,
    build_atlas,
    log_map,
    transporter,
    vertex_normal,
)
from .layers import (  # noqa: F401
    ConvLayer,
    FeatureField,
    NonlinLayer,
    RegularNonlinSpec,
    dft_matrices,
    field_from_json,
    field_to_json,
    gem_conv,
    graph_conv,
    network_from_json,
    network_to_json,
    regular_nonlinearity,
    scalar_type,
    sequential,
    transform_field,
)
from .mesh import (  # noqa: F401
    Mesh,
    apply_rigid,
    deform_radial,
    grid_mesh,
    icosahedron,
    read_obj,
    validate,
    write_obj,
)
