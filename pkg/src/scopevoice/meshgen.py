"""Deterministic mesh primitives for fixtures and geometry tests."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

# Unit icosahedron: 12 vertices, 20 faces.
_PHI = (1.0 + 5.0 ** 0.5) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
        (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
        (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


def icosphere(center: tuple[float, float, float] = (0.0, 0.0, 0.0),
              radius: float = 1.0, level: int = 3) -> TriangleMesh:
    """Subdivided icosahedron with all vertices exactly on the sphere.

    Faces lie inside the sphere by at most radius*(1-cos(a/2)) where a is
    the edge's central angle; at level 3 that is under 1% of the radius.
    """
    verts = [tuple(v / np.linalg.norm(v)) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = np.add(verts[i], verts[j]) / 2.0
            m /= np.linalg.norm(m)
            cache[key] = len(verts)
            verts.append(tuple(m))
        return cache[key]

    for _ in range(level):
        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces

    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, np.array(faces, dtype=np.int64))


def box(lo: tuple[float, float, float], hi: tuple[float, float, float]) -> TriangleMesh:
    """Axis-aligned box as 12 triangles."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = np.array(
        [
            (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
            (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
        ],
        dtype=np.float64,
    )
    quads = [
        (0, 1, 2, 3), (4, 7, 6, 5), (0, 4, 5, 1),
        (1, 5, 6, 2), (2, 6, 7, 3), (3, 7, 4, 0),
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(faces, dtype=np.int64))


def rotated(mesh: TriangleMesh, axis: str, degrees: float,
            about: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> TriangleMesh:
    """Rigid rotation about a principal axis through `about`."""
    t = np.radians(degrees)
    c, s = np.cos(t), np.sin(t)
    mats = {
        "x": np.array([(1, 0, 0), (0, c, -s), (0, s, c)]),
        "y": np.array([(c, 0, s), (0, 1, 0), (-s, 0, c)]),
        "z": np.array([(c, -s, 0), (s, c, 0), (0, 0, 1)]),
    }
    pivot = np.asarray(about, dtype=np.float64)
    v = (mesh.vertices - pivot) @ mats[axis].T + pivot
    return TriangleMesh(v, mesh.faces.copy())


def random_soup(rng: np.random.Generator, n_triangles: int,
                center: tuple[float, float, float] = (0.0, 0.0, 0.0),
                spread: float = 1.0) -> TriangleMesh:
    """Unstructured triangle soup for property tests (no topology implied)."""
    v = rng.normal(0.0, spread, size=(n_triangles * 3, 3)) + np.asarray(center)
    f = np.arange(n_triangles * 3, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(v, f)
