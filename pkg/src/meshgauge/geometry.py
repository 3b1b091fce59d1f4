"""Discrete tangent geometry: vertex normals, log maps, frames, parallel transport.

Conventions (fixed by probe-vector oracles, see tests):
- A frame at p is an orthonormal pair (e1, e2) spanning the tangent plane with
  e2 = n x e1, stored as the columns of a 3x2 matrix.
- Neighbor angles theta live in [0, 2*pi); the reference neighbor sits at 0 exactly.
- The transporter g for the directed edge q -> p satisfies v_p = R(g) v_q on
  2-vector coefficients: it is the polar angle, in p's frame, of q's first frame
  axis after the source tangent plane is rotated onto the target plane about
  the axis n_q x n_p.
- A gauge change by angle a at p rotates the frame counterclockwise (columns
  become E_p R(a)), lowers every theta at p by a, and updates transporters on
  edges into p by -a and out of p by +a.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .constants import TOL_ANTIPARALLEL, TOL_DEGENERATE_EDGE
from .errors import DegenerateGeometryError, UsageError
from .mesh import Mesh, require_manifold, vertex_neighbors

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Map angles into [0, 2*pi); scalar or array."""
    w = np.mod(a, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w) if isinstance(w, np.ndarray) else (
        0.0 if w >= TWO_PI else w
    )


def rotation2(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def face_cross_products(mesh: Mesh) -> np.ndarray:
    """Unnormalized face normals (cross products; length = 2 * area)."""
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return np.cross(b - a, c - a)


def vertex_normal(mesh: Mesh, p: int) -> np.ndarray:
    """Unit normal at vertex p: the area-weighted average of incident face normals.
    The cross product of a face's edges already weights its unit normal by twice
    the area, so summing cross products and normalizing is exactly that average.
    """
    mask = np.any(mesh.faces == p, axis=1)
    if not np.any(mask):
        raise DegenerateGeometryError(f"vertex {p} has no incident faces")
    total = face_cross_products(mesh)[mask].sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise DegenerateGeometryError(
            f"vertex {p}: area-weighted normal sum has zero magnitude"
        )
    return total / norm


def all_vertex_normals(mesh: Mesh) -> np.ndarray:
    crosses = face_cross_products(mesh)
    totals = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(totals, mesh.faces[:, k], crosses)
    norms = np.linalg.norm(totals, axis=1)
    bad = np.nonzero(norms < 1e-12)[0]
    if bad.size:
        raise DegenerateGeometryError(
            f"zero-magnitude normal at vertices {bad.tolist()}"
        )
    return totals / norms[:, None]


def log_map(position_p: np.ndarray, normal_p: np.ndarray, position_q: np.ndarray) -> np.ndarray:
    """Tangent 3-vector at p pointing toward q: the edge q - p projected onto the
    tangent plane and rescaled to the full edge length.
    """
    d = np.asarray(position_q, dtype=np.float64) - np.asarray(position_p, dtype=np.float64)
    edge_len = np.linalg.norm(d)
    if edge_len < 1e-15:
        raise DegenerateGeometryError("log map of a zero-length edge")
    proj = d - (d @ normal_p) * np.asarray(normal_p, dtype=np.float64)
    proj_len = np.linalg.norm(proj)
    if proj_len < TOL_DEGENERATE_EDGE * edge_len:
        raise DegenerateGeometryError(
            "edge is normal to the tangent plane; log map undefined"
        )
    return proj * (edge_len / proj_len)


def align_tangent_rotation(normal_src: np.ndarray, normal_dst: np.ndarray) -> np.ndarray:
    """Rotation taking the source tangent plane onto the destination plane about
    the axis normal_src x normal_dst. Identity for parallel normals; antiparallel
    normals are rejected (the axis is undefined).
    """
    d = float(np.clip(normal_src @ normal_dst, -1.0, 1.0))
    if d < -1.0 + TOL_ANTIPARALLEL:
        raise DegenerateGeometryError(
            "antiparallel normals: tangent-plane alignment is undefined"
        )
    axis = np.cross(normal_src, normal_dst)
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3)
    axis = axis / s
    angle = np.arctan2(s, d)
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def transporter(
    normals: np.ndarray, frames: np.ndarray, p: int, q: int
) -> float:
    """Parallel-transport angle for the directed edge q -> p (see module docstring)."""
    rot = align_tangent_rotation(normals[q], normals[p])
    e1_rotated = rot @ frames[q, :, 0]
    return float(
        wrap_angle(np.arctan2(e1_rotated @ frames[p, :, 1], e1_rotated @ frames[p, :, 0]))
    )


@dataclass(frozen=True)
class GaugeAtlas:
    """Per-vertex gauge data in CSR layout: edges into vertex p occupy
    offsets[p]:offsets[p+1] of neighbor_ids / thetas / transporters, with
    neighbor ids ascending (the canonical reduction order).
    """

    atlas_id: str
    normals: np.ndarray            # (n, 3)
    frames: np.ndarray             # (n, 3, 2)
    reference_neighbors: np.ndarray | None  # (n,) or None after a gauge change
    offsets: np.ndarray            # (n + 1,)
    neighbor_ids: np.ndarray       # (E,)
    thetas: np.ndarray             # (E,) in [0, 2*pi)
    transporters: np.ndarray       # (E,) angle for edge neighbor -> vertex

    @property
    def n_vertices(self) -> int:
        return self.normals.shape[0]

    def neighbors(self, p: int) -> np.ndarray:
        return self.neighbor_ids[self.offsets[p]:self.offsets[p + 1]]

    def _edge_index(self, p: int, q: int) -> int:
        lo, hi = self.offsets[p], self.offsets[p + 1]
        k = lo + int(np.searchsorted(self.neighbor_ids[lo:hi], q))
        if k >= hi or self.neighbor_ids[k] != q:
            raise UsageError(f"no edge {q} -> {p} in atlas")
        return k

    def theta(self, p: int, q: int) -> float:
        return float(self.thetas[self._edge_index(p, q)])

    def transport(self, p: int, q: int) -> float:
        return float(self.transporters[self._edge_index(p, q)])

    def edge_targets(self) -> np.ndarray:
        counts = np.diff(self.offsets)
        return np.repeat(np.arange(self.n_vertices), counts)


def _atlas_id_for(mesh: Mesh, policy: str, policy_seed: int | None) -> str:
    h = hashlib.sha256()
    h.update(mesh.content_hash().encode())
    h.update(policy.encode())
    if policy_seed is not None:
        h.update(str(policy_seed).encode())
    return h.hexdigest()


def build_atlas(
    mesh: Mesh, reference_policy: str = "smallest", policy_seed: int = 0
) -> GaugeAtlas:
    """Construct normals, frames, neighbor angles, and transporters for a manifold mesh.

    reference_policy picks each vertex's reference neighbor (frame direction):
    "smallest" takes the lowest neighbor id; "random" draws uniformly per vertex
    from a generator seeded with policy_seed.
    """
    require_manifold(mesh)
    if reference_policy not in ("smallest", "random"):
        raise UsageError(f"unknown reference policy {reference_policy!r}")

    normals = all_vertex_normals(mesh)
    neighbors = vertex_neighbors(mesh)
    n = mesh.n_vertices

    if reference_policy == "random":
        rng = np.random.default_rng(np.random.SeedSequence(policy_seed))
        reference = np.array(
            [int(rng.choice(nbrs)) for nbrs in neighbors], dtype=np.int64
        )
    else:
        reference = np.array([int(nbrs[0]) for nbrs in neighbors], dtype=np.int64)

    frames = np.zeros((n, 3, 2))
    for p in range(n):
        try:
            ref_log = log_map(mesh.vertices[p], normals[p], mesh.vertices[reference[p]])
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(
                f"vertex {p}, reference {int(reference[p])}: {exc}"
            ) from None
        e1 = ref_log / np.linalg.norm(ref_log)
        frames[p, :, 0] = e1
        frames[p, :, 1] = np.cross(normals[p], e1)

    counts = np.array([len(nbrs) for nbrs in neighbors])
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    neighbor_ids = np.concatenate(neighbors) if n else np.zeros(0, dtype=np.int64)
    thetas = np.zeros(len(neighbor_ids))
    transporters = np.zeros(len(neighbor_ids))

    for p in range(n):
        lo = offsets[p]
        for k, q in enumerate(neighbors[p]):
            q = int(q)
            if q == reference[p]:
                thetas[lo + k] = 0.0  # the reference direction defines angle zero
            else:
                try:
                    lg = log_map(mesh.vertices[p], normals[p], mesh.vertices[q])
                except DegenerateGeometryError as exc:
                    raise DegenerateGeometryError(f"edge ({p}, {q}): {exc}") from None
                thetas[lo + k] = wrap_angle(
                    np.arctan2(lg @ frames[p, :, 1], lg @ frames[p, :, 0])
                )
            transporters[lo + k] = transporter(normals, frames, p, q)

    seed_used = policy_seed if reference_policy == "random" else None
    return GaugeAtlas(
        atlas_id=_atlas_id_for(mesh, reference_policy, seed_used),
        normals=normals,
        frames=frames,
        reference_neighbors=reference,
        offsets=offsets,
        neighbor_ids=neighbor_ids,
        thetas=thetas,
        transporters=transporters,
    )


def apply_gauge_change(atlas: GaugeAtlas, angles: np.ndarray) -> GaugeAtlas:
    """Rotate every frame counterclockwise by its per-vertex angle and update the
    stored angles by the transformation law (thetas drop by the target's angle;
    transporters drop by the target's and gain the source's). Reference-neighbor
    bookkeeping is cleared since frames no longer point at a neighbor.
    """
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if angles.shape[0] != atlas.n_vertices:
        raise UsageError(
            f"need one angle per vertex ({atlas.n_vertices}), got {angles.shape[0]}"
        )
    frames = np.empty_like(atlas.frames)
    for p in range(atlas.n_vertices):
        frames[p] = atlas.frames[p] @ rotation2(angles[p])

    targets = atlas.edge_targets()
    thetas = wrap_angle(atlas.thetas - angles[targets])
    transporters = wrap_angle(
        atlas.transporters - angles[targets] + angles[atlas.neighbor_ids]
    )

    h = hashlib.sha256()
    h.update(atlas.atlas_id.encode())
    h.update(angles.tobytes())
    return GaugeAtlas(
        atlas_id=h.hexdigest(),
        normals=atlas.normals,
        frames=frames,
        reference_neighbors=None,
        offsets=atlas.offsets,
        neighbor_ids=atlas.neighbor_ids,
        thetas=thetas,
        transporters=transporters,
    )


# ---------------------------------------------------------------------------
# Atlas JSON schema ("meshgauge-atlas/1"):
# {
#   "format": "meshgauge-atlas/1",
#   "atlas_id": "<hex>",
#   "vertices": [
#     {"id": 0, "normal": [x, y, z],
#      "frame": [[e1x, e2x], [e1y, e2y], [e1z, e2z]],
#      "reference": 5 | null,
#      "neighbors": [{"id": 3, "theta": 0.0, "transport": 1.25}, ...]},
#     ...
#   ]
# }

ATLAS_FORMAT = "meshgauge-atlas/1"


def atlas_to_json(atlas: GaugeAtlas) -> str:
    vertices = []
    for p in range(atlas.n_vertices):
        lo, hi = int(atlas.offsets[p]), int(atlas.offsets[p + 1])
        ref = atlas.reference_neighbors
        vertices.append(
            {
                "id": p,
                "normal": atlas.normals[p].tolist(),
                "frame": atlas.frames[p].tolist(),
                "reference": int(ref[p]) if ref is not None else None,
                "neighbors": [
                    {
                        "id": int(atlas.neighbor_ids[k]),
                        "theta": float(atlas.thetas[k]),
                        "transport": float(atlas.transporters[k]),
                    }
                    for k in range(lo, hi)
                ],
            }
        )
    doc = {"format": ATLAS_FORMAT, "atlas_id": atlas.atlas_id, "vertices": vertices}
    return json.dumps(doc, indent=2, sort_keys=True)


def atlas_from_json(text: str) -> GaugeAtlas:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"atlas JSON is malformed: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != ATLAS_FORMAT:
        raise UsageError(f"not a {ATLAS_FORMAT} document")
    vertices = doc.get("vertices")
    if not isinstance(vertices, list) or not vertices:
        raise UsageError("atlas JSON has no vertices")

    n = len(vertices)
    normals = np.zeros((n, 3))
    frames = np.zeros((n, 3, 2))
    reference = np.full(n, -1, dtype=np.int64)
    has_reference = True
    neighbor_ids: list[int] = []
    thetas: list[float] = []
    transporters: list[float] = []
    offsets = np.zeros(n + 1, dtype=np.int64)

    order = sorted(vertices, key=lambda rec: rec.get("id", -1))
    for p, rec in enumerate(order):
        if rec.get("id") != p:
            raise UsageError(f"vertex ids must be 0..{n - 1} exactly; saw {rec.get('id')}")
        normals[p] = rec["normal"]
        frames[p] = rec["frame"]
        if rec.get("reference") is None:
            has_reference = False
        else:
            reference[p] = int(rec["reference"])
        nbrs = rec.get("neighbors", [])
        prev = -1
        for item in nbrs:
            q = int(item["id"])
            if q <= prev:
                raise UsageError(f"vertex {p}: neighbor ids must be strictly ascending")
            prev = q
            neighbor_ids.append(q)
            thetas.append(float(item["theta"]))
            transporters.append(float(item["transport"]))
        offsets[p + 1] = offsets[p] + len(nbrs)

    return GaugeAtlas(
        atlas_id=str(doc.get("atlas_id", "")),
        normals=normals,
        frames=frames,
        reference_neighbors=reference if has_reference else None,
        offsets=offsets,
        neighbor_ids=np.array(neighbor_ids, dtype=np.int64),
        thetas=np.array(thetas),
        transporters=np.array(transporters),
    )
