"""Triangle meshes and the Wavefront-OBJ subset used by case files.

Case meshes are plain OBJ restricted to `v x y z` and `f i j k` lines
(1-based indices, triangles only), coordinates in millimeters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateMesh, MissingFile


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex array (n,3) float64 and face index array (m,3) int64."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DegenerateMesh(f"vertex array has shape {v.shape}, expected (n, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise DegenerateMesh(f"face array has shape {f.shape}, expected (m, 3)")
        if not np.isfinite(v).all():
            raise DegenerateMesh("non-finite vertex coordinate")

    @property
    def triangle_count(self) -> int:
        return int(self.faces.shape[0])

    def triangles(self) -> np.ndarray:
        """Expanded (m, 3, 3) corner array, one row per triangle."""
        return self.vertices[self.faces]

    def validate(self, name: str = "mesh") -> None:
        if self.triangle_count < 1:
            raise DegenerateMesh(f"{name}: no triangles")
        if self.faces.min(initial=0) < 0 or self.faces.max(initial=-1) >= len(self.vertices):
            raise DegenerateMesh(f"{name}: face index out of range")


def load_obj(path: str | Path) -> TriangleMesh:
    """Parse the OBJ subset; unknown line types are rejected, comments skipped."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v" and len(parts) == 4:
            vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif parts[0] == "f" and len(parts) == 4:
            i, j, k = (int(p) for p in parts[1:])
            faces.append((i - 1, j - 1, k - 1))
        else:
            raise DegenerateMesh(f"{path.name}:{line_no}: unsupported OBJ line {parts[0]!r}")
    if not faces:
        raise DegenerateMesh(f"{path.name}: no triangles")
    mesh = TriangleMesh(np.array(vertices), np.array(faces))
    mesh.validate(path.name)
    return mesh


def save_obj(mesh: TriangleMesh, path: str | Path) -> None:
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")
