"""Planar-rotation representation types and the kernel spaces they admit.

A feature type is an ordered list of non-negative integers naming irreducible
rotation representations: order 0 is the 1-dimensional invariant, order n > 0
acts on coordinate pairs as rotation by n times the angle. Kernels between two
irreps are constrained by

    K_neigh(theta - g) = rho_out(-g) K_neigh(theta) rho_in(g)
    K_self            = rho_out(-g) K_self          rho_in(g)

for every angle g. The closed-form solution spaces are hardcoded below and are
independently reproduced by a numeric null-space solver over sampled constraints
(the two routes are compared by span residual in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import NULLSPACE_SV_CUTOFF
from .errors import DegenerateGeometryError, UsageError


@dataclass(frozen=True)
class ReprType:
    irreps: tuple[int, ...]

    def __init__(self, irreps):
        items = tuple(int(k) for k in irreps)
        if any(k < 0 for k in items):
            raise UsageError(f"irrep orders must be non-negative, got {items}")
        object.__setattr__(self, "irreps", items)

    @property
    def dim(self) -> int:
        return sum(1 if k == 0 else 2 for k in self.irreps)

    def blocks(self) -> list[tuple[int, int, int]]:
        """(offset, order, width) per irrep copy, in storage order."""
        out = []
        off = 0
        for k in self.irreps:
            w = 1 if k == 0 else 2
            out.append((off, k, w))
            off += w
        return out

    def __len__(self) -> int:
        return len(self.irreps)

    def __iter__(self):
        return iter(self.irreps)

    def to_list(self) -> list[int]:
        return list(self.irreps)


def irrep(order: int, angle: float) -> np.ndarray:
    if order < 0:
        raise UsageError(f"irrep order must be non-negative, got {order}")
    if order == 0:
        return np.array([[1.0]])
    c, s = np.cos(order * angle), np.sin(order * angle)
    return np.array([[c, -s], [s, c]])


def rep(rep_type: ReprType, angle: float) -> np.ndarray:
    """Block-diagonal representation matrix for a full feature type."""
    d = rep_type.dim
    out = np.zeros((d, d))
    for off, k, w in rep_type.blocks():
        out[off:off + w, off:off + w] = irrep(k, angle)
    return out


def apply_rep(rep_type: ReprType, angles: np.ndarray, values: np.ndarray) -> np.ndarray:
    """rho(angle) applied rowwise: values (..., dim) rotated by per-row angles (...,)."""
    values = np.asarray(values, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    out = np.empty_like(values)
    for off, k, w in rep_type.blocks():
        if w == 1:
            out[..., off] = values[..., off]
        else:
            c, s = np.cos(k * angles), np.sin(k * angles)
            a, b = values[..., off], values[..., off + 1]
            out[..., off] = c * a - s * b
            out[..., off + 1] = s * a + c * b
    return out


@dataclass(frozen=True)
class FourierKernel:
    """Matrix-valued trigonometric polynomial: sum_k cos(k t) C_k + sin(k t) S_k.
    Evaluates on scalar or array angles; the coefficient tensors double as the
    coordinates used for span comparisons between kernel bases.
    """

    cos_coeffs: np.ndarray  # (L + 1, rows, cols)
    sin_coeffs: np.ndarray  # (L + 1, rows, cols); index 0 unused

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        orders = np.arange(self.cos_coeffs.shape[0])
        ang = np.multiply.outer(theta, orders)
        return np.einsum("...k,kij->...ij", np.cos(ang), self.cos_coeffs) + np.einsum(
            "...k,kij->...ij", np.sin(ang), self.sin_coeffs
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.cos_coeffs.shape[1:]

    def coefficient_vector(self, max_order: int) -> np.ndarray:
        L = self.cos_coeffs.shape[0] - 1
        if max_order < L:
            raise UsageError("max_order smaller than the kernel's own order")
        rows, cols = self.shape
        cos = np.zeros((max_order + 1, rows, cols))
        sin = np.zeros((max_order + 1, rows, cols))
        cos[: L + 1] = self.cos_coeffs
        sin[: L + 1] = self.sin_coeffs
        return np.concatenate([cos.ravel(), sin[1:].ravel()])


def _kernel(rows: int, cols: int, max_order: int, terms) -> FourierKernel:
    """terms: iterable of (order, 'cos'|'sin', row, col, value)."""
    cos = np.zeros((max_order + 1, rows, cols))
    sin = np.zeros((max_order + 1, rows, cols))
    for order, trig, r, c, val in terms:
        (cos if trig == "cos" else sin)[order, r, c] = val
    return FourierKernel(cos, sin)


def basis_neigh(order_in: int, order_out: int) -> list[FourierKernel]:
    """Closed-form basis of the neighbor-kernel constraint space for one irrep pair.

    Counts: 1 for (0,0); 2 when exactly one order is zero; 4 when both are positive.
    """
    n, m = int(order_in), int(order_out)
    if n < 0 or m < 0:
        raise UsageError("irrep orders must be non-negative")
    if n == 0 and m == 0:
        return [_kernel(1, 1, 0, [(0, "cos", 0, 0, 1.0)])]
    if m == 0:  # rows mapping a pair down to the invariant
        return [
            _kernel(1, 2, n, [(n, "cos", 0, 0, 1.0), (n, "sin", 0, 1, 1.0)]),
            _kernel(1, 2, n, [(n, "sin", 0, 0, 1.0), (n, "cos", 0, 1, -1.0)]),
        ]
    if n == 0:  # columns lifting the invariant to a pair
        return [
            _kernel(2, 1, m, [(m, "cos", 0, 0, 1.0), (m, "sin", 1, 0, 1.0)]),
            _kernel(2, 1, m, [(m, "sin", 0, 0, 1.0), (m, "cos", 1, 0, -1.0)]),
        ]
    diff, ssum = m - n, m + n
    adiff = abs(diff)
    # sin of a negative frequency flips sign; cos does not
    dsign = -1.0 if diff < 0 else 1.0
    return [
        _kernel(2, 2, ssum, [
            (adiff, "cos", 0, 0, 1.0), (adiff, "sin", 0, 1, -dsign),
            (adiff, "sin", 1, 0, dsign), (adiff, "cos", 1, 1, 1.0),
        ]),
        _kernel(2, 2, ssum, [
            (adiff, "sin", 0, 0, dsign), (adiff, "cos", 0, 1, 1.0),
            (adiff, "cos", 1, 0, -1.0), (adiff, "sin", 1, 1, dsign),
        ]),
        _kernel(2, 2, ssum, [
            (ssum, "cos", 0, 0, 1.0), (ssum, "sin", 0, 1, 1.0),
            (ssum, "sin", 1, 0, 1.0), (ssum, "cos", 1, 1, -1.0),
        ]),
        _kernel(2, 2, ssum, [
            (ssum, "sin", 0, 0, -1.0), (ssum, "cos", 0, 1, 1.0),
            (ssum, "cos", 1, 0, 1.0), (ssum, "sin", 1, 1, 1.0),
        ]),
    ]


def basis_self(order_in: int, order_out: int) -> list[np.ndarray]:
    """Closed-form basis of the self-kernel (angle-independent) constraint space."""
    n, m = int(order_in), int(order_out)
    if n < 0 or m < 0:
        raise UsageError("irrep orders must be non-negative")
    if n == 0 and m == 0:
        return [np.array([[1.0]])]
    if n == m:
        return [np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]])]
    return []


def neigh_pair_count(order_in: int, order_out: int) -> int:
    if order_in == 0 and order_out == 0:
        return 1
    if order_in == 0 or order_out == 0:
        return 2
    return 4


def self_pair_count(order_in: int, order_out: int) -> int:
    if order_in == 0 and order_out == 0:
        return 1
    if order_in == order_out:
        return 2
    return 0


def param_count(type_in: ReprType, type_out: ReprType) -> tuple[int, int]:
    """(self, neighbor) weight counts for a convolution between two types."""
    n_self = 0
    n_neigh = 0
    for m in type_out:
        for n in type_in:
            n_self += self_pair_count(n, m)
            n_neigh += neigh_pair_count(n, m)
    return n_self, n_neigh


# ---------------------------------------------------------------------------
# numeric route: solve the sampled constraint for the kernel space directly


def numeric_kernel_basis(
    order_in: int,
    order_out: int,
    samples: int = 64,
    seed: int = 0,
) -> list[FourierKernel]:
    """Orthonormal basis of the neighbor-kernel space found numerically: write the
    kernel as a trigonometric polynomial up to order order_in + order_out, sample
    the constraint at random (theta, g) pairs, and take the SVD null space.

    The recovered space is verified against freshly drawn samples; an inflated
    null space (from too few samples) fails that check and raises.
    """
    n, m = int(order_in), int(order_out)
    if samples < 8:
        raise UsageError(f"need at least 8 constraint samples, got {samples}")
    dn = 1 if n == 0 else 2
    dm = 1 if m == 0 else 2
    L = n + m
    n_orders = 2 * L + 1  # cos 0..L, sin 1..L

    def elementary(u: int) -> FourierKernel:
        entry, mode = divmod(u, n_orders)
        r, c = divmod(entry, dn)
        if mode <= L:
            return _kernel(dm, dn, L, [(mode, "cos", r, c, 1.0)])
        return _kernel(dm, dn, L, [(mode - L, "sin", r, c, 1.0)])

    n_unknowns = dm * dn * n_orders
    basis_fns = [elementary(u) for u in range(n_unknowns)]

    def residual_rows(fn: FourierKernel, thetas: np.ndarray, gs: np.ndarray) -> np.ndarray:
        rows = []
        for t, g in zip(thetas, gs):
            lhs = fn(t - g)
            rhs = irrep(m, -g) @ fn(t) @ irrep(n, g)
            rows.append((lhs - rhs).ravel())
        return np.concatenate(rows)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    thetas = rng.uniform(0.0, 2.0 * np.pi, size=samples)
    gs = rng.uniform(0.0, 2.0 * np.pi, size=samples)

    design = np.column_stack([residual_rows(fn, thetas, gs) for fn in basis_fns])
    _, svals, vt = np.linalg.svd(design, full_matrices=True)
    cutoff = NULLSPACE_SV_CUTOFF * max(1.0, svals[0] if svals.size else 1.0)
    nullity = int(np.sum(svals < cutoff)) + (vt.shape[0] - svals.size)
    null_vectors = vt[vt.shape[0] - nullity:] if nullity else vt[:0]

    out = []
    for vec in null_vectors:
        cos = np.zeros((L + 1, dm, dn))
        sin = np.zeros((L + 1, dm, dn))
        for u, w in enumerate(vec):
            entry, mode = divmod(u, n_orders)
            r, c = divmod(entry, dn)
            if mode <= L:
                cos[mode, r, c] = w
            else:
                sin[mode - L, r, c] = w
        out.append(FourierKernel(cos, sin))

    check_t = rng.uniform(0.0, 2.0 * np.pi, size=max(16, samples))
    check_g = rng.uniform(0.0, 2.0 * np.pi, size=max(16, samples))
    for fn in out:
        if np.max(np.abs(residual_rows(fn, check_t, check_g))) > 1e-8:
            raise DegenerateGeometryError(
                "numeric kernel solve is rank-deficient; increase samples"
            )
    return out


def kernel_span_residual(
    basis_a: list[FourierKernel], basis_b: list[FourierKernel]
) -> float:
    """Largest relative projection residual between the spans of two kernel bases
    (0 means identical spans). Coefficient vectors are the coordinates; that is
    faithful because distinct trigonometric monomials are linearly independent.
    """
    if not basis_a or not basis_b:
        return 0.0 if not basis_a and not basis_b else 1.0
    L = max(fn.cos_coeffs.shape[0] - 1 for fn in basis_a + basis_b)
    A = np.stack([fn.coefficient_vector(L) for fn in basis_a])
    B = np.stack([fn.coefficient_vector(L) for fn in basis_b])

    def resid(target: np.ndarray, source: np.ndarray) -> float:
        q, _ = np.linalg.qr(source.T)
        proj = target - (target @ q) @ q.T
        return float(
            np.max(np.linalg.norm(proj, axis=1) / np.linalg.norm(target, axis=1))
        )

    return max(resid(A, B), resid(B, A))


# ---------------------------------------------------------------------------
# weight vectors and dense kernel assembly


@dataclass(frozen=True)
class LayerWeights:
    """Weights for one convolution layer. Ordering is lexicographic in
    (output irrep copy, input irrep copy, basis element index), separately for
    the self and neighbor families.
    """

    type_in: ReprType
    type_out: ReprType
    w_self: np.ndarray
    w_neigh: np.ndarray

    def __post_init__(self):
        n_self, n_neigh = param_count(self.type_in, self.type_out)
        ws = np.asarray(self.w_self, dtype=np.float64).reshape(-1)
        wn = np.asarray(self.w_neigh, dtype=np.float64).reshape(-1)
        if ws.shape[0] != n_self:
            raise UsageError(f"w_self needs {n_self} entries, got {ws.shape[0]}")
        if wn.shape[0] != n_neigh:
            raise UsageError(f"w_neigh needs {n_neigh} entries, got {wn.shape[0]}")
        object.__setattr__(self, "w_self", ws)
        object.__setattr__(self, "w_neigh", wn)


def init_layer_weights(type_in: ReprType, type_out: ReprType, seed: int) -> LayerWeights:
    """Seeded uniform initialization on [-s, s] with s = 1/sqrt(basis count) per
    weight family (the per-output fan-in of basis functions).
    """
    n_self, n_neigh = param_count(type_in, type_out)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    s_self = 1.0 / np.sqrt(max(1, n_self))
    s_neigh = 1.0 / np.sqrt(max(1, n_neigh))
    return LayerWeights(
        type_in,
        type_out,
        rng.uniform(-s_self, s_self, size=n_self),
        rng.uniform(-s_neigh, s_neigh, size=n_neigh),
    )


def assemble_self_kernel(weights: LayerWeights) -> np.ndarray:
    t_in, t_out = weights.type_in, weights.type_out
    K = np.zeros((t_out.dim, t_in.dim))
    k = 0
    for off_m, m, wm in t_out.blocks():
        for off_n, n, wn in t_in.blocks():
            for mat in basis_self(n, m):
                K[off_m:off_m + wm, off_n:off_n + wn] += weights.w_self[k] * mat
                k += 1
    return K


def assemble_neigh_kernel(weights: LayerWeights, theta) -> np.ndarray:
    """Dense neighbor kernel at angle(s) theta: shape (..., dim_out, dim_in)."""
    t_in, t_out = weights.type_in, weights.type_out
    theta = np.asarray(theta, dtype=np.float64)
    K = np.zeros(theta.shape + (t_out.dim, t_in.dim))
    k = 0
    for off_m, m, wm in t_out.blocks():
        for off_n, n, wn in t_in.blocks():
            for fn in basis_neigh(n, m):
                K[..., off_m:off_m + wm, off_n:off_n + wn] += (
                    weights.w_neigh[k] * fn(theta)
                )
                k += 1
    return K


def assemble_kernels(weights: LayerWeights, theta) -> tuple[np.ndarray, np.ndarray]:
    """(self kernel, neighbor kernel at theta) as dense matrices."""
    return assemble_self_kernel(weights), assemble_neigh_kernel(weights, theta)
