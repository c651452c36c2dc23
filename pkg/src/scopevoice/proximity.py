"""Pairwise segment distances powering the patient-context prompt.

Distances are exact minimum Euclidean distances between triangle sets
(0 when meshes intersect), so infiltration sets do not depend on how
finely a vessel happens to be tessellated. Two routes exist on purpose:
``min_distance_brute`` scans every triangle pair and is the oracle;
``min_distance`` prunes the same primitive through a bounding-volume
tree and must agree with the oracle to 1e-9 relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import DegenerateMesh, NoTumorSegment
from .mesh import TriangleMesh
from .scene import PatientCase

_EPS = 1e-30


@njit(cache=True, inline="always")
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True)
def _seg_seg_dist_sq(p0, p1, q0, q1):
    """Squared distance between segments p0p1 and q0q1 (Ericson 5.1.9)."""
    d1x = p1[0] - p0[0]
    d1y = p1[1] - p0[1]
    d1z = p1[2] - p0[2]
    d2x = q1[0] - q0[0]
    d2y = q1[1] - q0[1]
    d2z = q1[2] - q0[2]
    rx = p0[0] - q0[0]
    ry = p0[1] - q0[1]
    rz = p0[2] - q0[2]
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    if a <= _EPS and e <= _EPS:
        return rx * rx + ry * ry + rz * rz
    if a <= _EPS:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= _EPS:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            if denom > _EPS:
                s = _clamp01((b * f - c * e) / denom)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    cx = p0[0] + d1x * s - (q0[0] + d2x * t)
    cy = p0[1] + d1y * s - (q0[1] + d2y * t)
    cz = p0[2] + d1z * s - (q0[2] + d2z * t)
    return cx * cx + cy * cy + cz * cz


@njit(cache=True)
def _point_tri_dist_sq(p, a, b, c):
    """Squared distance from point p to triangle abc (Ericson 5.1.5)."""
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    abz = b[2] - a[2]
    acx = c[0] - a[0]
    acy = c[1] - a[1]
    acz = c[2] - a[2]
    apx = p[0] - a[0]
    apy = p[1] - a[1]
    apz = p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = p[0] - b[0]
    bpy = p[1] - b[1]
    bpz = p[2] - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3) if d1 - d3 != 0.0 else 0.0
        dx = apx - v * abx
        dy = apy - v * aby
        dz = apz - v * abz
        return dx * dx + dy * dy + dz * dz
    cpx = p[0] - c[0]
    cpy = p[1] - c[1]
    cpz = p[2] - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6) if d2 - d6 != 0.0 else 0.0
        dx = apx - w * acx
        dy = apy - w * acy
        dz = apz - w * acz
        return dx * dx + dy * dy + dz * dz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / denom if denom != 0.0 else 0.0
        dx = bpx - w * (c[0] - b[0])
        dy = bpy - w * (c[1] - b[1])
        dz = bpz - w * (c[2] - b[2])
        return dx * dx + dy * dy + dz * dz
    denom = va + vb + vc
    if denom <= _EPS:
        # degenerate triangle: fall back to the nearest edge
        e0 = _seg_seg_dist_sq(p, p, a, b)
        e1 = _seg_seg_dist_sq(p, p, b, c)
        e2 = _seg_seg_dist_sq(p, p, c, a)
        return min(e0, min(e1, e2))
    v = vb / denom
    w = vc / denom
    dx = apx - (v * abx + w * acx)
    dy = apy - (v * aby + w * acy)
    dz = apz - (v * abz + w * acz)
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _edge_pierces_tri(p0, p1, a, b, c):
    """True when segment p0p1 crosses the open interior of triangle abc.

    Coplanar and boundary contacts are excluded here; those configurations
    already yield zero through the edge-edge / vertex-face terms.
    """
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    abz = b[2] - a[2]
    acx = c[0] - a[0]
    acy = c[1] - a[1]
    acz = c[2] - a[2]
    nx = aby * acz - abz * acy
    ny = abz * acx - abx * acz
    nz = abx * acy - aby * acx
    d0 = nx * (p0[0] - a[0]) + ny * (p0[1] - a[1]) + nz * (p0[2] - a[2])
    d1 = nx * (p1[0] - a[0]) + ny * (p1[1] - a[1]) + nz * (p1[2] - a[2])
    if d0 * d1 >= 0.0:
        return False
    t = d0 / (d0 - d1)
    xx = p0[0] + t * (p1[0] - p0[0]) - a[0]
    xy = p0[1] + t * (p1[1] - p0[1]) - a[1]
    xz = p0[2] + t * (p1[2] - p0[2]) - a[2]
    d00 = abx * abx + aby * aby + abz * abz
    d01 = abx * acx + aby * acy + abz * acz
    d11 = acx * acx + acy * acy + acz * acz
    d20 = xx * abx + xy * aby + xz * abz
    d21 = xx * acx + xy * acy + xz * acz
    denom = d00 * d11 - d01 * d01
    if denom <= _EPS:
        return False
    u = (d11 * d20 - d01 * d21) / denom
    v = (d00 * d21 - d01 * d20) / denom
    return u > 0.0 and v > 0.0 and u + v < 1.0


@njit(cache=True)
def _tri_pair_dist_sq(a0, a1, a2, b0, b1, b2):
    """Exact squared distance between two triangles, 0 when they intersect.

    For disjoint triangles the minimum is attained at an edge-edge or
    vertex-face pair; interpenetration needs the explicit pierce test.
    """
    best = _seg_seg_dist_sq(a0, a1, b0, b1)
    d = _seg_seg_dist_sq(a0, a1, b1, b2)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a0, a1, b2, b0)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a1, a2, b0, b1)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a1, a2, b1, b2)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a1, a2, b2, b0)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a2, a0, b0, b1)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a2, a0, b1, b2)
    if d < best:
        best = d
    d = _seg_seg_dist_sq(a2, a0, b2, b0)
    if d < best:
        best = d
    d = _point_tri_dist_sq(a0, b0, b1, b2)
    if d < best:
        best = d
    d = _point_tri_dist_sq(a1, b0, b1, b2)
    if d < best:
        best = d
    d = _point_tri_dist_sq(a2, b0, b1, b2)
    if d < best:
        best = d
    d = _point_tri_dist_sq(b0, a0, a1, a2)
    if d < best:
        best = d
    d = _point_tri_dist_sq(b1, a0, a1, a2)
    if d < best:
        best = d
    d = _point_tri_dist_sq(b2, a0, a1, a2)
    if d < best:
        best = d
    if best > 0.0:
        if (
            _edge_pierces_tri(a0, a1, b0, b1, b2)
            or _edge_pierces_tri(a1, a2, b0, b1, b2)
            or _edge_pierces_tri(a2, a0, b0, b1, b2)
            or _edge_pierces_tri(b0, b1, a0, a1, a2)
            or _edge_pierces_tri(b1, b2, a0, a1, a2)
            or _edge_pierces_tri(b2, b0, a0, a1, a2)
        ):
            best = 0.0
    return best


@njit(cache=True, parallel=True)
def _brute_min_dist_sq(tris_a, tris_b):
    best = np.inf
    for i in prange(tris_a.shape[0]):
        a0 = tris_a[i, 0]
        a1 = tris_a[i, 1]
        a2 = tris_a[i, 2]
        local = np.inf
        for j in range(tris_b.shape[0]):
            d = _tri_pair_dist_sq(a0, a1, a2, tris_b[j, 0], tris_b[j, 1], tris_b[j, 2])
            if d < local:
                local = d
        best = min(best, local)
    return best


# -- bounding-volume tree -----------------------------------------------------

_LEAF_SIZE = 4


@dataclass(frozen=True)
class _Bvh:
    """Flat arrays: internal nodes hold child ids, leaves triangle ranges."""

    bmin: np.ndarray  # (n, 3)
    bmax: np.ndarray  # (n, 3)
    left: np.ndarray  # (n,) child id or -1 for leaf
    right: np.ndarray
    start: np.ndarray  # (n,) leaf triangle range into tris
    count: np.ndarray
    tris: np.ndarray  # (m, 3, 3) reordered so leaves are contiguous


def _build_bvh(tris: np.ndarray) -> _Bvh:
    m = tris.shape[0]
    centroids = tris.mean(axis=1)
    tri_min = tris.min(axis=1)
    tri_max = tris.max(axis=1)
    order = np.arange(m)

    bmin: list[np.ndarray] = []
    bmax: list[np.ndarray] = []
    left: list[int] = []
    right: list[int] = []
    start: list[int] = []
    count: list[int] = []

    def new_node(lo: int, hi: int) -> int:
        idx = len(bmin)
        sel = order[lo:hi]
        bmin.append(tri_min[sel].min(axis=0))
        bmax.append(tri_max[sel].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(lo)
        count.append(hi - lo)
        return idx

    # iterative median split on the widest centroid axis
    root = new_node(0, m)
    stack = [root]
    while stack:
        node = stack.pop()
        lo, n = start[node], count[node]
        if n <= _LEAF_SIZE:
            continue
        hi = lo + n
        sel = order[lo:hi]
        cmin = centroids[sel].min(axis=0)
        cmax = centroids[sel].max(axis=0)
        axis = int(np.argmax(cmax - cmin))
        if cmax[axis] - cmin[axis] <= 0.0:
            continue  # all centroids coincide; keep as leaf
        mid = n // 2
        part = np.argpartition(centroids[sel, axis], mid)
        order[lo:hi] = sel[part]
        lchild = new_node(lo, lo + mid)
        rchild = new_node(lo + mid, hi)
        left[node] = lchild
        right[node] = rchild
        start[node] = -1
        count[node] = 0
        stack += [lchild, rchild]

    return _Bvh(
        bmin=np.array(bmin),
        bmax=np.array(bmax),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        start=np.array(start, dtype=np.int64),
        count=np.array(count, dtype=np.int64),
        tris=np.ascontiguousarray(tris[order]),
    )


@njit(cache=True, inline="always")
def _aabb_dist_sq(amin, amax, bmin, bmax):
    d = 0.0
    for k in range(3):
        gap = bmin[k] - amax[k]
        if gap < 0.0:
            gap = amin[k] - bmax[k]
        if gap > 0.0:
            d += gap * gap
    return d


@njit(cache=True)
def _bvh_pair_min_dist_sq(
    a_bmin, a_bmax, a_left, a_right, a_start, a_count, a_tris,
    b_bmin, b_bmax, b_left, b_right, b_start, b_count, b_tris,
):
    """Branch-and-bound over node pairs; prunes on box-box lower bounds.

    Pruning uses strict >= against the best exact pair distance found so
    far, so the result equals the all-pairs minimum bit for bit.
    """
    cap = 1 << 16
    stack_a = np.empty(cap, dtype=np.int64)
    stack_b = np.empty(cap, dtype=np.int64)
    stack_lb = np.empty(cap, dtype=np.float64)
    top = 0
    stack_a[0] = 0
    stack_b[0] = 0
    stack_lb[0] = _aabb_dist_sq(a_bmin[0], a_bmax[0], b_bmin[0], b_bmax[0])
    top = 1
    best = np.inf
    while top > 0:
        top -= 1
        na = stack_a[top]
        nb = stack_b[top]
        if stack_lb[top] >= best:
            continue
        a_is_leaf = a_left[na] < 0
        b_is_leaf = b_left[nb] < 0
        if a_is_leaf and b_is_leaf:
            for i in range(a_start[na], a_start[na] + a_count[na]):
                for j in range(b_start[nb], b_start[nb] + b_count[nb]):
                    d = _tri_pair_dist_sq(
                        a_tris[i, 0], a_tris[i, 1], a_tris[i, 2],
                        b_tris[j, 0], b_tris[j, 1], b_tris[j, 2],
                    )
                    if d < best:
                        best = d
            continue
        # descend the node with the larger box extent
        if b_is_leaf or (not a_is_leaf and
                         np.sum(a_bmax[na] - a_bmin[na]) >= np.sum(b_bmax[nb] - b_bmin[nb])):
            c0, c1 = a_left[na], a_right[na]
            lb0 = _aabb_dist_sq(a_bmin[c0], a_bmax[c0], b_bmin[nb], b_bmax[nb])
            lb1 = _aabb_dist_sq(a_bmin[c1], a_bmax[c1], b_bmin[nb], b_bmax[nb])
            # push the nearer pair last so it is explored first
            if lb0 < lb1:
                pairs = ((c1, nb, lb1), (c0, nb, lb0))
            else:
                pairs = ((c0, nb, lb0), (c1, nb, lb1))
        else:
            c0, c1 = b_left[nb], b_right[nb]
            lb0 = _aabb_dist_sq(a_bmin[na], a_bmax[na], b_bmin[c0], b_bmax[c0])
            lb1 = _aabb_dist_sq(a_bmin[na], a_bmax[na], b_bmin[c1], b_bmax[c1])
            if lb0 < lb1:
                pairs = ((na, c1, lb1), (na, c0, lb0))
            else:
                pairs = ((na, c0, lb0), (na, c1, lb1))
        for pa, pb, lb in pairs:
            if lb < best:
                if top >= cap:
                    # grow (rare: only pathological trees)
                    new_cap = cap * 2
                    na_ = np.empty(new_cap, dtype=np.int64)
                    nb_ = np.empty(new_cap, dtype=np.int64)
                    nl_ = np.empty(new_cap, dtype=np.float64)
                    na_[:cap] = stack_a
                    nb_[:cap] = stack_b
                    nl_[:cap] = stack_lb
                    stack_a = na_
                    stack_b = nb_
                    stack_lb = nl_
                    cap = new_cap
                stack_a[top] = pa
                stack_b[top] = pb
                stack_lb[top] = lb
                top += 1
    return best


def _require_mesh(mesh: TriangleMesh, name: str) -> np.ndarray:
    if mesh.triangle_count < 1:
        raise DegenerateMesh(f"{name}: no triangles")
    return np.ascontiguousarray(mesh.triangles())


def _bvh_dist(a: _Bvh, b: _Bvh) -> float:
    d_sq = _bvh_pair_min_dist_sq(
        a.bmin, a.bmax, a.left, a.right, a.start, a.count, a.tris,
        b.bmin, b.bmax, b.left, b.right, b.start, b.count, b.tris,
    )
    return math.sqrt(d_sq)


def min_distance(mesh_a: TriangleMesh, mesh_b: TriangleMesh) -> float:
    """Exact minimum surface distance in mm via bounding-volume pruning."""
    tris_a = _require_mesh(mesh_a, "mesh_a")
    tris_b = _require_mesh(mesh_b, "mesh_b")
    return _bvh_dist(_build_bvh(tris_a), _build_bvh(tris_b))


def min_distance_brute(mesh_a: TriangleMesh, mesh_b: TriangleMesh) -> float:
    """Oracle: exhaustive scan over every triangle pair."""
    tris_a = _require_mesh(mesh_a, "mesh_a")
    tris_b = _require_mesh(mesh_b, "mesh_b")
    return math.sqrt(_brute_min_dist_sq(tris_a, tris_b))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric segment-to-segment distances in case order, mm."""

    ids: tuple[str, ...]
    d: np.ndarray

    def value(self, id_a: str, id_b: str) -> float:
        i = self.ids.index(id_a)
        j = self.ids.index(id_b)
        return float(self.d[i, j])

    def to_nested_dict(self, decimals: int | None = None) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for i, a in enumerate(self.ids):
            row = {}
            for j, b in enumerate(self.ids):
                v = float(self.d[i, j])
                row[b] = round(v, decimals) if decimals is not None else v
            out[a] = row
        return out


def distance_matrix(case: PatientCase, method: str = "bvh") -> DistanceMatrix:
    """All-pairs matrix over the case's segments (zero diagonal, symmetric)."""
    ids = tuple(case.segment_ids)
    n = len(ids)
    d = np.zeros((n, n), dtype=np.float64)
    if method == "bvh":
        trees = {sid: _build_bvh(_require_mesh(case.meshes[sid], sid)) for sid in ids}
        for i in range(n):
            for j in range(i + 1, n):
                v = _bvh_dist(trees[ids[i]], trees[ids[j]])
                d[i, j] = v
                d[j, i] = v
    else:
        for i in range(n):
            for j in range(i + 1, n):
                v = min_distance_brute(case.meshes[ids[i]], case.meshes[ids[j]])
                d[i, j] = v
                d[j, i] = v
    return DistanceMatrix(ids=ids, d=d)


def infiltrated(case: PatientCase, m: DistanceMatrix, margin: float) -> set[str]:
    """Non-tumor segments whose surface lies within `margin` mm of the tumor."""
    if margin <= 0:
        raise ValueError("margin must be > 0")
    tumor = case.tumor_segment()
    if tumor is None:
        raise NoTumorSegment(case.case_id)
    ti = m.ids.index(tumor.id)
    hits = set()
    for j, sid in enumerate(m.ids):
        if sid == tumor.id:
            continue
        if m.d[ti, j] <= margin:
            hits.add(sid)
    return hits


def tri_pair_distance(tri_a: np.ndarray, tri_b: np.ndarray) -> float:
    """Exact distance between two single triangles (test hook)."""
    a = np.ascontiguousarray(tri_a, dtype=np.float64)
    b = np.ascontiguousarray(tri_b, dtype=np.float64)
    return math.sqrt(_tri_pair_dist_sq(a[0], a[1], a[2], b[0], b[1], b[2]))
