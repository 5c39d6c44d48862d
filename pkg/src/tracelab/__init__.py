"""Discrete trace/lifting laboratory on polytopal hybrid meshes.

Implements hybrid cell/face polynomial spaces on Cartesian and perturbed-quad
meshes of the unit square/cube, the discrete H^1 and H^{1/2} seminorms, an
explicit boundary lifting operator, the boundary Schur complement, and the
generalized eigenvalue verification of the trace/lifting equivalence, together
with empirical checks of the supporting geometric lemmas.
"""

from tracelab.mesh import (
    Cell,
    Face,
    MeshStats,
    PolytopalMesh,
    build_cartesian,
    build_perturbed_quads,
    mesh_stats,
    validate,
)
from tracelab.hybrid import (
    Basis,
    BoundaryTrace,
    DegreeConfig,
    DofMap,
    HybridSpace,
    HybridVector,
    build_dofmap,
    constant_trace,
    constant_vector,
    project_p0,
    quadrature,
    scaled_monomial_basis,
    trace,
)
from tracelab.seminorms import (
    OperatorBundle,
    assemble_bundle,
    assemble_h1,
    assemble_hhalf,
    assemble_s,
    eval_seminorms,
    h1_seminorm_direct,
    hhalf_seminorm_direct,
)
from tracelab.lifting import (
    FlatSide,
    GluedLifter,
    LiftContext,
    PartitionOfUnity,
    build_lift_context,
    glued_lift,
    harmonic_extension,
    lift_flat,
)
from tracelab.spectral import (
    InteriorSolver,
    SpectralReport,
    refinement_sweep,
    schur_complement,
    solve_gevp,
)
from tracelab.lemma_lab import (
    SetCatalog,
    build_catalog,
    check_cardinalities,
    check_hardy,
    check_lifting_lemmas,
    check_local_approx,
    check_pw,
    check_trace_inequality,
    hardy_ratio,
)

__version__ = "0.1.0"
