"""Feature fields and the layers that act on them.

gem_conv implements the gauge-equivariant convolution

    out_p = K_self f_p + sum_q K_neigh(theta_pq) rho_in(g_{q->p}) f_q

with the neighbor sum reduced in ascending-id order (bit-reproducible).
graph_conv is the isotropic baseline that ignores angles and transport.
RegularNonlinearity synthesizes band-limited circular signals on N uniform
samples (phase 0), applies a pointwise function, and analyzes back.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

from .algebra import (
    LayerWeights,
    ReprType,
    apply_rep,
    assemble_self_kernel,
    basis_neigh,
    init_layer_weights,
)
from .errors import UsageError
from .geometry import GaugeAtlas


@dataclass(frozen=True)
class FeatureField:
    rep_type: ReprType
    values: np.ndarray  # (n_vertices, rep_type.dim)
    atlas_id: str

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2 or vals.shape[1] != self.rep_type.dim:
            raise UsageError(
                f"values must be (n, {self.rep_type.dim}) for type {self.rep_type.to_list()}, "
                f"got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def n_vertices(self) -> int:
        return self.values.shape[0]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.values.shape).encode())
        h.update(self.values.tobytes())
        return h.hexdigest()


def scalar_type(channels: int) -> ReprType:
    return ReprType([0] * channels)


def is_scalar_type(t: ReprType) -> bool:
    return all(k == 0 for k in t)


def transform_field(field: FeatureField, angles: np.ndarray, new_atlas_id: str) -> FeatureField:
    """Gauge action on features: a change by angle a at p multiplies by rho(-a)."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if angles.shape[0] != field.n_vertices:
        raise UsageError("need one gauge angle per vertex")
    return FeatureField(
        field.rep_type, apply_rep(field.rep_type, -angles, field.values), new_atlas_id
    )


def _check_binding(atlas: GaugeAtlas, field: FeatureField) -> None:
    if field.atlas_id != atlas.atlas_id:
        raise UsageError(
            f"field is bound to atlas {field.atlas_id[:12]}..., "
            f"got atlas {atlas.atlas_id[:12]}..."
        )
    if field.n_vertices != atlas.n_vertices:
        raise UsageError("field and atlas disagree on vertex count")


def gem_conv(atlas: GaugeAtlas, weights: LayerWeights, field: FeatureField) -> FeatureField:
    _check_binding(atlas, field)
    if field.rep_type != weights.type_in:
        raise UsageError(
            f"field type {field.rep_type.to_list()} does not match "
            f"layer input type {weights.type_in.to_list()}"
        )
    t_in, t_out = weights.type_in, weights.type_out

    src = atlas.neighbor_ids
    transported = apply_rep(t_in, atlas.transporters, field.values[src])
    y = np.zeros((len(src), t_out.dim))
    k = 0
    for off_m, m, wm in t_out.blocks():
        for off_n, n, wn in t_in.blocks():
            fns = basis_neigh(n, m)
            block = np.zeros((len(src), wm, wn))
            for fn in fns:
                block += weights.w_neigh[k] * fn(atlas.thetas)
                k += 1
            y[:, off_m:off_m + wm] += np.einsum(
                "eij,ej->ei", block, transported[:, off_n:off_n + wn]
            )

    out = field.values @ assemble_self_kernel(weights).T
    offsets = atlas.offsets
    for p in range(atlas.n_vertices):
        seg = y[offsets[p]:offsets[p + 1]]
        if seg.shape[0]:
            out[p] += seg.sum(axis=0)
    return FeatureField(t_out, out, atlas.atlas_id)


def graph_conv(
    atlas: GaugeAtlas,
    k_self: np.ndarray,
    k_neigh: np.ndarray,
    field: FeatureField,
) -> FeatureField:
    """Isotropic baseline: out_p = K_self f_p + K_neigh sum_q f_q. The same matrix
    multiplies every neighbor, so neighbor directions cannot influence the result.
    """
    _check_binding(atlas, field)
    k_self = np.asarray(k_self, dtype=np.float64)
    k_neigh = np.asarray(k_neigh, dtype=np.float64)
    d = field.values.shape[1]
    if k_self.shape != k_neigh.shape or k_self.ndim != 2 or k_self.shape[1] != d:
        raise UsageError("self/neighbor matrices must share shape (c_out, c_in)")

    sums = np.zeros_like(field.values)
    offsets = atlas.offsets
    src = atlas.neighbor_ids
    for p in range(atlas.n_vertices):
        seg = field.values[src[offsets[p]:offsets[p + 1]]]
        if seg.shape[0]:
            sums[p] = seg.sum(axis=0)
    out = field.values @ k_self.T + sums @ k_neigh.T
    return FeatureField(scalar_type(k_self.shape[0]), out, atlas.atlas_id)


# ---------------------------------------------------------------------------
# regular nonlinearity


POINTWISE = {
    "relu": (lambda x: np.maximum(x, 0.0), 1.0),
    "tanh": (np.tanh, 1.0),
    "identity": (lambda x: x, 1.0),
}


def pointwise_function(name: str):
    if name not in POINTWISE:
        raise UsageError(
            f"unknown pointwise function {name!r}; choose from {sorted(POINTWISE)}"
        )
    return POINTWISE[name]


def dft_matrices(band_limit: int, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """(analysis, synthesis) maps between Fourier modes [const, cos_1, sin_1, ...,
    cos_b, sin_b] and N uniform circle samples at angles 2*pi*t/N (phase 0).
    analysis @ synthesis = identity whenever N >= 2b + 1.
    """
    b, n = int(band_limit), int(n_samples)
    if b < 0:
        raise UsageError("band limit must be non-negative")
    if n < 2 * b + 1:
        raise UsageError(
            f"n_samples={n} is below the sampling threshold 2*band_limit+1={2 * b + 1}"
        )
    t = np.arange(n)
    synthesis = np.ones((n, 2 * b + 1))
    analysis = np.full((2 * b + 1, n), 1.0 / n)
    for m in range(1, b + 1):
        ang = 2.0 * np.pi * m * t / n
        synthesis[:, 2 * m - 1] = np.cos(ang)
        synthesis[:, 2 * m] = np.sin(ang)
        analysis[2 * m - 1] = (2.0 / n) * np.cos(ang)
        analysis[2 * m] = (2.0 / n) * np.sin(ang)
    return analysis, synthesis


@dataclass(frozen=True)
class RegularNonlinSpec:
    band_limit: int
    n_samples: int
    pointwise: str = "relu"

    def __post_init__(self):
        pointwise_function(self.pointwise)
        dft_matrices(self.band_limit, self.n_samples)  # validates the pair


def band_copy_count(rep_type: ReprType, band_limit: int) -> int:
    """Number of [0, 1, ..., band_limit] copies making up rep_type; errors if the
    type is not exactly that structure.
    """
    chunk = tuple(range(band_limit + 1))
    irreps = rep_type.irreps
    if len(irreps) == 0 or len(irreps) % len(chunk) != 0:
        raise UsageError(
            f"type {rep_type.to_list()} is not copies of {list(chunk)}"
        )
    u = len(irreps) // len(chunk)
    if irreps != chunk * u:
        raise UsageError(
            f"type {rep_type.to_list()} is not copies of {list(chunk)}"
        )
    return u


def regular_nonlinearity(spec: RegularNonlinSpec, field: FeatureField) -> FeatureField:
    """Per vertex and per copy: synthesize the band-limited circular signal on the
    sample grid, apply the pointwise function, analyze back to modes.
    """
    u = band_copy_count(field.rep_type, spec.band_limit)
    fn, _ = pointwise_function(spec.pointwise)
    analysis, synthesis = dft_matrices(spec.band_limit, spec.n_samples)
    width = 2 * spec.band_limit + 1
    modes = field.values.reshape(field.n_vertices, u, width)
    samples = modes @ synthesis.T
    back = fn(samples) @ analysis.T
    return FeatureField(
        field.rep_type, back.reshape(field.n_vertices, u * width), field.atlas_id
    )


# ---------------------------------------------------------------------------
# networks


@dataclass(frozen=True)
class ConvLayer:
    weights: LayerWeights

    def input_type(self) -> ReprType:
        return self.weights.type_in

    def output_type(self, _: ReprType) -> ReprType:
        return self.weights.type_out

    def apply(self, atlas: GaugeAtlas, field: FeatureField) -> FeatureField:
        return gem_conv(atlas, self.weights, field)


@dataclass(frozen=True)
class NonlinLayer:
    spec: RegularNonlinSpec

    def output_type(self, t_in: ReprType) -> ReprType:
        band_copy_count(t_in, self.spec.band_limit)
        return t_in

    def apply(self, atlas: GaugeAtlas, field: FeatureField) -> FeatureField:
        return regular_nonlinearity(self.spec, field)


@dataclass(frozen=True)
class NetworkResult:
    field: FeatureField
    layer_checksums: tuple[str, ...]


def sequential(layers, atlas: GaugeAtlas, field: FeatureField) -> NetworkResult:
    """Apply layers in order, validating the type chain; the result carries one
    output checksum per layer for reproducibility audits.
    """
    current = field
    checksums = []
    for i, layer in enumerate(layers):
        if isinstance(layer, ConvLayer) and current.rep_type != layer.weights.type_in:
            raise UsageError(
                f"layer {i}: expected input type {layer.weights.type_in.to_list()}, "
                f"field has {current.rep_type.to_list()}"
            )
        try:
            current = layer.apply(atlas, current)
        except UsageError as exc:
            raise UsageError(f"layer {i}: {exc}") from None
        checksums.append(current.checksum())
    return NetworkResult(current, tuple(checksums))


# ---------------------------------------------------------------------------
# serialization

FIELD_FORMAT = "meshgauge-field/1"
NETWORK_FORMAT = "meshgauge-network/1"


def field_to_json(field: FeatureField) -> str:
    return json.dumps(
        {
            "format": FIELD_FORMAT,
            "type": field.rep_type.to_list(),
            "atlas_id": field.atlas_id,
            "values": field.values.tolist(),
        },
        indent=2,
        sort_keys=True,
    )


def field_from_json(text: str) -> FeatureField:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"field JSON is malformed: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FIELD_FORMAT:
        raise UsageError(f"not a {FIELD_FORMAT} document")
    try:
        return FeatureField(
            ReprType(doc["type"]),
            np.array(doc["values"], dtype=np.float64),
            str(doc["atlas_id"]),
        )
    except KeyError as exc:
        raise UsageError(f"field JSON is missing {exc}") from None


def field_to_csv(field: FeatureField) -> str:
    buf = io.StringIO()
    buf.write(f"# type: {','.join(str(k) for k in field.rep_type)}\n")
    buf.write(f"# atlas: {field.atlas_id}\n")
    buf.write("vertex," + ",".join(f"c{j}" for j in range(field.values.shape[1])) + "\n")
    for p, row in enumerate(field.values):
        buf.write(str(p) + "," + ",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def field_from_csv(text: str) -> FeatureField:
    rep_type = None
    atlas_id = ""
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# type:"):
            rep_type = ReprType([int(x) for x in line.split(":", 1)[1].split(",")])
        elif line.startswith("# atlas:"):
            atlas_id = line.split(":", 1)[1].strip()
        elif line.startswith("#") or line.startswith("vertex,"):
            continue
        else:
            rows.append([float(x) for x in line.split(",")[1:]])
    if rep_type is None:
        raise UsageError("field CSV is missing the '# type:' header")
    return FeatureField(rep_type, np.array(rows, dtype=np.float64), atlas_id)


def network_to_json(layers) -> str:
    out = []
    for layer in layers:
        if isinstance(layer, ConvLayer):
            out.append(
                {
                    "kind": "conv",
                    "type_in": layer.weights.type_in.to_list(),
                    "type_out": layer.weights.type_out.to_list(),
                    "w_self": layer.weights.w_self.tolist(),
                    "w_neigh": layer.weights.w_neigh.tolist(),
                }
            )
        elif isinstance(layer, NonlinLayer):
            out.append(
                {
                    "kind": "regular_nonlinearity",
                    "band_limit": layer.spec.band_limit,
                    "samples": layer.spec.n_samples,
                    "pointwise": layer.spec.pointwise,
                }
            )
        else:
            raise UsageError(f"cannot serialize layer of type {type(layer).__name__}")
    return json.dumps({"format": NETWORK_FORMAT, "layers": out}, indent=2, sort_keys=True)


def network_from_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"network JSON is malformed: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != NETWORK_FORMAT:
        raise UsageError(f"not a {NETWORK_FORMAT} document")
    layers = []
    for i, rec in enumerate(doc.get("layers", [])):
        kind = rec.get("kind")
        if kind == "conv":
            try:
                t_in = ReprType(rec["type_in"])
                t_out = ReprType(rec["type_out"])
            except KeyError as exc:
                raise UsageError(f"layer {i}: missing {exc}") from None
            if "w_self" in rec or "w_neigh" in rec:
                if not ("w_self" in rec and "w_neigh" in rec):
                    raise UsageError(f"layer {i}: give both w_self and w_neigh or neither")
                weights = LayerWeights(
                    t_in, t_out, np.array(rec["w_self"]), np.array(rec["w_neigh"])
                )
            else:
                if "seed" not in rec:
                    raise UsageError(f"layer {i}: conv needs explicit weights or a seed")
                weights = init_layer_weights(t_in, t_out, int(rec["seed"]))
            layers.append(ConvLayer(weights))
        elif kind == "regular_nonlinearity":
            try:
                spec = RegularNonlinSpec(
                    int(rec["band_limit"]), int(rec["samples"]), rec.get("pointwise", "relu")
                )
            except KeyError as exc:
                raise UsageError(f"layer {i}: missing {exc}") from None
            layers.append(NonlinLayer(spec))
        else:
            raise UsageError(f"layer {i}: unknown kind {kind!r}")
    return layers
