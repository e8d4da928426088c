import json

import numpy as np
import pytest

from willflow.errors import SnapshotIOError
from willflow.flow import FlowConfig, FlowState
from willflow.geometry import energies, scale_translate
from willflow.io import (
    DIAGNOSTICS_HEADER,
    DiagnosticsRow,
    DiagnosticsWriter,
    export_snapshot,
    mesh_faces,
    mesh_vertices,
    read_checkpoint,
    read_diagnostics,
    read_obj,
    read_summary,
    write_checkpoint,
    write_obj,
    write_summary,
)


def make_state(im, **kwargs):
    options = dict(t=0.1, im=im, wf=None, W0=0.0, step_index=7, dt=1.234e-4, clean_steps=3)
    options.update(kwargs)
    return FlowState(**options)


def make_row(t):
    return DiagnosticsRow(t, *[float(k) / 7 for k in range(1, 20)])


def test_mesh_counts(sphere):
    grid = sphere.grid
    faces = mesh_faces(grid.nlat, grid.nlon)
    vertices = mesh_vertices(sphere)
    assert faces.shape == (2 * grid.nlat * grid.nlon, 3), "Two triangles per grid cell, fans included."
    assert vertices.shape == (grid.nlat * grid.nlon + 2, 3), "Grid nodes plus the two poles."
    assert faces.min() == 0 and faces.max() == len(vertices) - 1, "Every vertex is used."


def test_mesh_orientation(sphere):
    v = mesh_vertices(sphere)
    f = mesh_faces(sphere.grid.nlat, sphere.grid.nlon)
    volume = np.sum(np.einsum("ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]]))) / 6
    assert 0.9 * 4 * np.pi / 3 < volume < 4 * np.pi / 3, "Outward orientation encloses positive volume."


def test_obj_roundtrip(sphere, tmp_path):
    path = tmp_path / "sphere.obj"
    write_obj(sphere, path)
    vertices, faces = read_obj(path)
    assert np.allclose(np.linalg.norm(vertices, axis=1), 1.0, atol=1e-12), "Vertices lie on the unit sphere."
    assert np.array_equal(faces, mesh_faces(sphere.grid.nlat, sphere.grid.nlon)), "Faces survive the roundtrip."
    assert np.array_equal(vertices, mesh_vertices(sphere)), "17 significant digits are lossless."


def test_checkpoint_is_bit_exact(bumped, tmp_path):
    path = tmp_path / "state.coeffs"
    write_checkpoint(make_state(bumped), path, initial_W0=0.0123, initial_area=12.5)
    cp = read_checkpoint(path)
    assert np.array_equal(cp.coeffs, bumped.coeffs), "Coefficients are stored bit for bit."
    assert (cp.t, cp.step_index, cp.dt, cp.clean_steps) == (0.1, 7, 1.234e-4, 3), "Header values survive."
    assert (cp.initial_W0, cp.initial_area) == (0.0123, 12.5), "Initial values survive."
    assert cp.reference() is None, "No reference unless written."
    assert np.array_equal(cp.immersion().phi, bumped.phi), "The immersion is rebuilt exactly."


def test_checkpoint_with_reference(sphere, tmp_path):
    path = tmp_path / "state.coeffs"
    moved = scale_translate(sphere, 1.0, (0.1, 0.0, 0.0))
    write_checkpoint(make_state(moved), path, 0.0, 4 * np.pi, reference=sphere)
    cp = read_checkpoint(path)
    assert np.array_equal(cp.reference_coeffs, sphere.coeffs), "The DeTurck reference is stored."


def test_checkpoint_to_state(sphere, tmp_path):
    path = tmp_path / "state.coeffs"
    write_checkpoint(make_state(sphere), path, 0.0, 4 * np.pi)
    state = read_checkpoint(path).to_state(FlowConfig(L_max=12))
    assert (state.t, state.step_index, state.dt, state.clean_steps) == (0.1, 7, 1.234e-4, 3), "Counters are restored."
    assert state.W0 == energies(sphere).W0, "W0 is recomputed."
    assert state.wf is not None, "The Willmore fields are recomputed."


def test_bad_checkpoints(sphere, tmp_path):
    junk = tmp_path / "junk.coeffs"
    junk.write_text("not a checkpoint\n")
    with pytest.raises(SnapshotIOError):
        read_checkpoint(junk)
    good = tmp_path / "good.coeffs"
    write_checkpoint(make_state(sphere), good, 0.0, 4 * np.pi)
    truncated = tmp_path / "truncated.coeffs"
    truncated.write_bytes(good.read_bytes()[:-16])
    with pytest.raises(SnapshotIOError):
        read_checkpoint(truncated)
    with pytest.raises(SnapshotIOError):
        read_checkpoint(tmp_path / "missing.coeffs")


def test_export_snapshot_names(sphere, tmp_path):
    state = make_state(sphere, step_index=42)
    assert export_snapshot(state, "obj", tmp_path).name == "snapshot_000042.obj", "Meshes are numbered by step."
    assert export_snapshot(state, "coeffs", tmp_path).name == "checkpoint_000042.coeffs", "Dumps are numbered by step."
    with pytest.raises(SnapshotIOError):
        export_snapshot(state, "vtk", tmp_path)


def test_diagnostics_header(tmp_path):
    assert DIAGNOSTICS_HEADER == (
        "t,w0,w1,w2,area,bx,by,bz,hopf,balance,r1,r2,r3,r4,"
        "diss_lhs,diss_rhs,dlm,dt,dlm_ratio,area_ratio"
    ), "The column layout is fixed."
    path = tmp_path / "diagnostics.csv"
    with DiagnosticsWriter(path) as writer:
        writer.write(make_row(0.1))
    assert path.read_text().splitlines()[0] == DIAGNOSTICS_HEADER, "The header comes first."


def test_diagnostics_roundtrip(tmp_path):
    path = tmp_path / "diagnostics.csv"
    rows = [make_row(0.1), make_row(0.2)]
    rows[1].dlm_ratio = float("nan")
    with DiagnosticsWriter(path) as writer:
        for row in rows:
            writer.write(row)
    back = read_diagnostics(path)
    assert back[0] == rows[0], "Rows are written with repr precision."
    assert np.isnan(back[1].dlm_ratio), "Undefined ratios are kept as nan."


def test_diagnostics_resume(tmp_path):
    path = tmp_path / "diagnostics.csv"
    with DiagnosticsWriter(path) as writer:
        for t in (0.1, 0.2, 0.3):
            writer.write(make_row(t))
    with DiagnosticsWriter(path, resume_at=0.2) as writer:
        writer.write(make_row(0.25))
    assert [r.t for r in read_diagnostics(path)] == [0.1, 0.2, 0.25], "Rows after the checkpoint are replaced."


def test_bad_diagnostics(tmp_path):
    path = tmp_path / "diagnostics.csv"
    path.write_text("time,energy\n0.1,0.2\n")
    with pytest.raises(SnapshotIOError):
        read_diagnostics(path)


def test_summary_roundtrip(tmp_path):
    summary = {"final_W0": 1e-11, "steps": 10, "converged": True, "max_hopf": None}
    path = tmp_path / "summary.json"
    write_summary(summary, path)
    assert read_summary(path) == summary, "Summaries are plain json."
    assert json.loads(path.read_text())["steps"] == 10, "Readable by any json parser."
