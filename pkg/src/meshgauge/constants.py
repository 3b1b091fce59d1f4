"""Named numeric tolerances.

Every comparison threshold in the library routes through one of these constants
so that audit reports can echo the exact values in force. CLI runs may override
individual entries; library callers pass explicit keyword arguments instead.
"""

# Algebraic identities evaluated in float64 (DFT round trips, exact-shift
# equivariance, rescaling): a few hundred ulps of headroom.
TOL_ALGEBRAIC = 1e-12

# Kernel-constraint residuals for the closed-form basis solutions.
TOL_KERNEL_CONSTRAINT = 1e-10

# Geometric identities that accumulate through transcendental evaluations
# (transporters, gauge-consistency checks, equivariance of full networks).
TOL_GEOMETRIC = 1e-9

# Law-based gauge updates vs from-scratch frame recomputation.
TOL_GAUGE_CONSISTENCY = 1e-10

# Rotation matrices must satisfy R^T R = I and det R = 1 to this tolerance.
TOL_SPECIAL_ORTHOGONAL = 1e-10

# Relative projection threshold below which an edge is tangentially degenerate.
TOL_DEGENERATE_EDGE = 1e-12

# Normal alignments closer than this to -1 are rejected as antiparallel.
TOL_ANTIPARALLEL = 1e-9

# Singular values below this cutoff count as null directions.
NULLSPACE_SV_CUTOFF = 1e-10

# Mutual projection residual bound for span-equality checks between kernel bases.
SPAN_RESIDUAL_TOL = 1e-8

# Positional tolerance for the constructive symmetry search.
ISOMETRY_POSITION_TOL = 1e-6

# Audit pass thresholds: normalized error ratios for symmetry audits, and the
# measured/bound ratio ceiling for the sampled-nonlinearity audit.
TOL_AUDIT_GAUGE_RATIO = 1e-9
TOL_AUDIT_AMBIENT_RATIO = 1e-9
TOL_AUDIT_ISOMETRY_RATIO = 1e-9
TOL_AUDIT_NONLINEARITY_RATIO = 1.0


def default_tolerances() -> dict[str, float]:
    """Tolerance table echoed into CLI reports (overridable per run)."""
    return {
        "algebraic": TOL_ALGEBRAIC,
        "kernel_constraint": TOL_KERNEL_CONSTRAINT,
        "geometric": TOL_GEOMETRIC,
        "gauge_consistency": TOL_GAUGE_CONSISTENCY,
        "special_orthogonal": TOL_SPECIAL_ORTHOGONAL,
        "degenerate_edge": TOL_DEGENERATE_EDGE,
        "antiparallel": TOL_ANTIPARALLEL,
        "nullspace_sv_cutoff": NULLSPACE_SV_CUTOFF,
        "span_residual": SPAN_RESIDUAL_TOL,
        "isometry_position": ISOMETRY_POSITION_TOL,
        "audit_gauge_ratio": TOL_AUDIT_GAUGE_RATIO,
        "audit_ambient_ratio": TOL_AUDIT_AMBIENT_RATIO,
        "audit_isometry_ratio": TOL_AUDIT_ISOMETRY_RATIO,
        "audit_nonlinearity_ratio": TOL_AUDIT_NONLINEARITY_RATIO,
    }
