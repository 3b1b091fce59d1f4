"""Triangle meshes: construction, validation, generators, rigid motions, OBJ I/O.

Vertices are float64 (n, 3); faces are int64 (m, 3) with counterclockwise
winding as seen from outside (along the outward normal). All randomness flows
through numpy's default PCG64 generator seeded from explicit 64-bit integers.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, UsageError, ValidationFailure


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray     # (m, 3) int64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise UsageError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise UsageError(f"faces must be (m, 3), got {f.shape}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.vertices.shape).encode())
        h.update(self.vertices.tobytes())
        h.update(repr(self.faces.shape).encode())
        h.update(self.faces.tobytes())
        return h.hexdigest()


@dataclass
class ValidationReport:
    is_manifold: bool
    boundary_vertex_count: int
    defects: list = field(default_factory=list)  # (kind, element) pairs

    def defect_summary(self) -> str:
        if not self.defects:
            return "no defects"
        return "; ".join(f"{kind}: {elem}" for kind, elem in self.defects)


def undirected_edges(mesh: Mesh) -> np.ndarray:
    """Unique undirected edges as a sorted (e, 2) array of vertex-id pairs."""
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def mean_edge_length(mesh: Mesh) -> float:
    e = undirected_edges(mesh)
    d = mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]
    return float(np.mean(np.linalg.norm(d, axis=1)))


def vertex_neighbors(mesh: Mesh) -> list[np.ndarray]:
    """Neighbor ids per vertex, ascending (the canonical reduction order)."""
    nbr = [set() for _ in range(mesh.n_vertices)]
    for a, b in undirected_edges(mesh):
        nbr[a].add(int(b))
        nbr[b].add(int(a))
    return [np.array(sorted(s), dtype=np.int64) for s in nbr]


def validate(mesh: Mesh) -> ValidationReport:
    """Structural validation: index bounds, degenerate faces, edge and fan manifoldness,
    winding consistency. Boundary edges (one incident face) are allowed; every vertex
    fan must be a single closed disk or a single open half-disk.
    """
    defects = []
    n = mesh.n_vertices
    f = mesh.faces

    for i, face in enumerate(f):
        if np.any(face < 0) or np.any(face >= n):
            defects.append(("index", i))
        elif len(set(face.tolist())) != 3:
            defects.append(("degenerate", i))

    if defects:
        return ValidationReport(False, 0, defects)

    # Directed half-edge census. An interior edge must be traversed once in each
    # direction; a repeated direction means two faces wind the same way across it.
    directed: dict[tuple[int, int], int] = {}
    for face in f:
        for a, b in ((face[0], face[1]), (face[1], face[2]), (face[2], face[0])):
            directed[(int(a), int(b))] = directed.get((int(a), int(b)), 0) + 1

    seen_winding = set()
    edge_face_count: dict[tuple[int, int], int] = {}
    for (a, b), c in directed.items():
        key = (min(a, b), max(a, b))
        edge_face_count[key] = edge_face_count.get(key, 0) + c
        if c > 1 and key not in seen_winding:
            defects.append(("winding", key))
            seen_winding.add(key)

    boundary_edges = set()
    for key, c in sorted(edge_face_count.items()):
        if c == 1:
            boundary_edges.add(key)
        elif c > 2:
            defects.append(("edge", key))

    # Fan check: the link of each vertex must form a single path or cycle.
    link_out: list[dict[int, int] | None] = [dict() for _ in range(n)]
    for face in f:
        for k in range(3):
            v, x, y = int(face[k]), int(face[(k + 1) % 3]), int(face[(k + 2) % 3])
            if link_out[v] is None:
                continue
            if x in link_out[v]:
                link_out[v] = None  # duplicate outgoing link edge: pinched fan
                continue
            link_out[v][x] = y

    for v in range(n):
        out = link_out[v]
        if out is None:
            defects.append(("fan", v))
            continue
        if not out:
            defects.append(("isolated", v))
            continue
        nodes = set(out)
        for y in out.values():
            nodes.add(y)
        # walk from a path start if one exists, else from any node (cycle)
        starts = [u for u in nodes if u not in set(out.values())]
        cur = min(starts) if starts else min(nodes)
        visited_edges = 0
        seen_nodes = {cur}
        while cur in out:
            nxt = out[cur]
            visited_edges += 1
            if nxt in seen_nodes:
                break
            seen_nodes.add(nxt)
            cur = nxt
        if visited_edges != len(out) or seen_nodes != nodes:
            defects.append(("fan", v))

    boundary_vertices = {v for e in boundary_edges for v in e}
    return ValidationReport(not defects, len(boundary_vertices), defects)


def require_manifold(mesh: Mesh) -> ValidationReport:
    report = validate(mesh)
    if not report.is_manifold:
        raise ValidationFailure(
            f"mesh failed validation: {report.defect_summary()}", report.defects
        )
    return report


# ---------------------------------------------------------------------------
# generators


def icosahedron() -> Mesh:
    """Regular icosahedron with unit circumradius: 12 vertices, 20 faces, 30 edges,
    every vertex of degree 5, faces counterclockwise from outside.
    """
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts[0])
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return Mesh(verts, faces)


def grid_roughness(smoothing_sigma: float) -> float:
    """Derived roughness metadata for generated grids (3 minus the smoothing width)."""
    return 3.0 - float(smoothing_sigma)


def _smooth_truncated(field2d: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing with a truncated (radius ceil(3*sigma)) kernel, renormalized
    near the boundary over the in-window weights.
    """
    r = math.ceil(3.0 * sigma)
    offs = np.arange(-r, r + 1)
    w1d = np.exp(-(offs.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    w2d = np.outer(w1d, w1d)

    rows, cols = field2d.shape
    num = np.zeros_like(field2d)
    den = np.zeros_like(field2d)
    for di in range(-r, r + 1):
        if abs(di) >= rows:
            continue
        src_i = slice(max(0, -di), rows - max(0, di))
        dst_i = slice(max(0, di), rows - max(0, -di))
        for dj in range(-r, r + 1):
            if abs(dj) >= cols:
                continue
            wgt = w2d[di + r, dj + r]
            src_j = slice(max(0, -dj), cols - max(0, dj))
            dst_j = slice(max(0, dj), cols - max(0, -dj))
            num[dst_i, dst_j] += wgt * field2d[src_i, src_j]
            den[dst_i, dst_j] += wgt
    return num / den


def grid_mesh(
    rows: int,
    cols: int,
    smoothing_sigma: float | None = None,
    seed: int = 0,
) -> Mesh:
    """Rectangular grid of rows x cols vertices, each unit cell split along the fixed
    lower-left to upper-right diagonal. With smoothing_sigma set, every vertex gets an
    independent uniform Z displacement on [-1, 1] (pixel units), the displacement field
    is Gaussian-smoothed with the given width, and the mesh is rescaled to mean edge
    length 1. With smoothing_sigma=None no displacement is applied and the mesh stays
    exactly planar (still rescaled to mean edge length 1).
    """
    if rows < 2 or cols < 2:
        raise UsageError(f"grid_mesh needs rows, cols >= 2, got {rows}x{cols}")
    if smoothing_sigma is not None and smoothing_sigma <= 0:
        raise UsageError(
            f"smoothing_sigma must be positive when displacement is on, got {smoothing_sigma}"
        )

    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    verts = np.zeros((rows * cols, 3), dtype=np.float64)
    verts[:, 0] = jj.ravel()
    verts[:, 1] = ii.ravel()

    if smoothing_sigma is not None:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        disp = rng.uniform(-1.0, 1.0, size=(rows, cols))
        verts[:, 2] = _smooth_truncated(disp, float(smoothing_sigma)).ravel()

    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            ll = r * cols + c
            lr = ll + 1
            ul = ll + cols
            ur = ul + 1
            faces.append((ll, lr, ur))
            faces.append((ll, ur, ul))
    mesh = Mesh(verts, np.array(faces, dtype=np.int64))
    scale = 1.0 / mean_edge_length(mesh)
    return Mesh(mesh.vertices * scale, mesh.faces)


def deform_radial(mesh: Mesh, std: float, seed: int = 0) -> Mesh:
    """Scale each vertex position by an independent factor drawn from N(1, std^2).
    Requires every vertex away from the origin (the deformation is radial).
    """
    norms = np.linalg.norm(mesh.vertices, axis=1)
    if np.any(norms < 1e-12):
        bad = int(np.argmin(norms))
        raise DegenerateGeometryError(
            f"deform_radial: vertex {bad} is at the origin; radial scaling undefined"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    factors = rng.normal(loc=1.0, scale=std, size=mesh.n_vertices)
    return Mesh(mesh.vertices * factors[:, None], mesh.faces)


def apply_rigid(mesh: Mesh, rotation: np.ndarray, translation: np.ndarray) -> Mesh:
    """Apply v -> R v + t. R must be special orthogonal to 1e-10."""
    from .constants import TOL_SPECIAL_ORTHOGONAL

    r = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    if r.shape != (3, 3):
        raise UsageError(f"rotation must be 3x3, got {r.shape}")
    if np.max(np.abs(r.T @ r - np.eye(3))) > TOL_SPECIAL_ORTHOGONAL:
        raise UsageError("rotation is not orthogonal within tolerance")
    if abs(np.linalg.det(r) - 1.0) > TOL_SPECIAL_ORTHOGONAL:
        raise UsageError("rotation must have determinant +1 (no reflections)")
    return Mesh(mesh.vertices @ r.T + t, mesh.faces)


# ---------------------------------------------------------------------------
# OBJ subset I/O: 'v x y z' and 'f i j k' records only (1-based, triangles).


def read_obj(path: str) -> Mesh:
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) != 4:
                    raise UsageError(f"{path}:{lineno}: vertex record needs 3 coordinates")
                try:
                    verts.append([float(x) for x in parts[1:]])
                except ValueError:
                    raise UsageError(f"{path}:{lineno}: non-numeric vertex coordinate") from None
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise UsageError(f"{path}:{lineno}: face record must be a triangle")
                idx = []
                for tok in parts[1:]:
                    if not tok.isdigit():
                        raise UsageError(
                            f"{path}:{lineno}: face indices must be plain positive integers"
                        )
                    idx.append(int(tok) - 1)
                faces.append(idx)
            else:
                raise UsageError(f"{path}:{lineno}: unsupported record {parts[0]!r}")
    if not verts:
        raise UsageError(f"{path}: no vertices found")
    mesh = Mesh(
        np.array(verts, dtype=np.float64),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )
    n = mesh.n_vertices
    if mesh.n_faces and (mesh.faces.min() < 0 or mesh.faces.max() >= n):
        raise UsageError(f"{path}: face index out of range (1..{n})")
    return mesh


def write_obj(mesh: Mesh, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
