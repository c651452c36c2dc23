from __future__ import annotations

import numpy as np
import pytest

from scopevoice.errors import DegenerateMesh, MissingFile
from scopevoice.mesh import TriangleMesh, load_obj, save_obj
from scopevoice.meshgen import box, icosphere


def test_obj_round_trip(tmp_path):
    mesh = icosphere((1, 2, 3), 2.5, level=1)
    path = tmp_path / "sphere.obj"
    save_obj(mesh, path)
    loaded = load_obj(path)
    assert loaded.triangle_count == mesh.triangle_count
    assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-6)
    assert np.array_equal(loaded.faces, mesh.faces)


def test_obj_subset_rejects_other_lines(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nvn 1 0 0\nf 1 1 1\n")
    with pytest.raises(DegenerateMesh, match="vn"):
        load_obj(path)


def test_obj_comments_and_blank_lines(tmp_path):
    path = tmp_path / "ok.obj"
    path.write_text("# header\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    assert load_obj(path).triangle_count == 1


def test_missing_file():
    with pytest.raises(MissingFile):
        load_obj("/nonexistent/mesh.obj")


def test_empty_mesh_rejected(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("v 0 0 0\n")
    with pytest.raises(DegenerateMesh):
        load_obj(path)


def test_face_index_bounds():
    with pytest.raises(DegenerateMesh):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 5]])).validate()


def test_icosphere_vertices_on_sphere():
    mesh = icosphere((0, 0, 0), 2.0, level=2)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.allclose(radii, 2.0, atol=1e-12)
    assert mesh.triangle_count == 20 * 4 ** 2


def test_box_counts():
    mesh = box((0, 0, 0), (1, 2, 3))
    assert mesh.triangle_count == 12
    assert mesh.vertices.shape == (8, 3)
