"""Snapshots, checkpoints, diagnostics tables and run summaries.

Mesh files are wavefront ``.obj`` triangle meshes of the collocation grid
closed by two polar fans. Checkpoints are a short text header followed by the
raw coefficients as little-endian complex128 (pairs of float64)::

    WILLFLOW-COEFFS 1
    L_max 32
    t 0x1.999999999999ap-4
    step 1000
    dt 0x1.a36e2eb1c432dp-14
    clean_steps 3
    w0_initial 0x1.4f8b588e368f1p-5
    area_initial 0x1.921fb54442d18p+3
    fields phi_x phi_y phi_z ref_x ref_y ref_z
    end

Floats in the header are written with :meth:`float.hex`, so that a run
resumed from a checkpoint continues bit for bit.
"""

import csv
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from willflow.log import logger
from willflow.errors import SnapshotIOError
from willflow.flow import FlowConfig, FlowState, initial_state
from willflow.geometry import Immersion
from willflow.sphere_spectral import eval_coeffs_at_points, get_grid

PathLike = Union[str, Path]

MAGIC = "WILLFLOW-COEFFS 1"

DIAGNOSTICS_HEADER = (
    "t,w0,w1,w2,area,bx,by,bz,hopf,balance,r1,r2,r3,r4,"
    "diss_lhs,diss_rhs,dlm,dt,dlm_ratio,area_ratio"
)


def read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise SnapshotIOError("cannot read file ({})".format(err), path=path)


# meshes


def mesh_vertices(im: Immersion) -> np.ndarray:
    """North pole, the grid rings from north to south, south pole; shape (n, 3)."""
    poles = eval_coeffs_at_points(im.coeffs, np.array([[0.0, 0.0], [np.pi, 0.0]])).real
    rings = im.phi.reshape(3, -1).T
    return np.vstack([poles[:, 0], rings, poles[:, 1]])


def mesh_faces(nlat: int, nlon: int) -> np.ndarray:
    """Zero-based triangles of the closed lat-long mesh, ``2 nlat nlon`` of them.

    Orientation is counter-clockwise seen from outside the standard embedding.
    """
    south = 1 + nlat * nlon
    ring = lambda i, k: 1 + i * nlon + k % nlon
    faces = []
    for k in range(nlon):
        faces.append((0, ring(0, k), ring(0, k + 1)))
    for i in range(nlat - 1):
        for k in range(nlon):
            a, b = ring(i, k), ring(i, k + 1)
            c, d = ring(i + 1, k + 1), ring(i + 1, k)
            faces.append((a, d, c))
            faces.append((a, c, b))
    for k in range(nlon):
        faces.append((ring(nlat - 1, k), south, ring(nlat - 1, k + 1)))
    return np.array(faces, dtype=int)


def write_obj(im: Immersion, path: PathLike):
    grid = im.grid
    vertices = mesh_vertices(im)
    faces = mesh_faces(grid.nlat, grid.nlon)
    lines = ["# willflow mesh L_max {:d}".format(grid.L_max)]
    lines += ["v {:.17g} {:.17g} {:.17g}".format(*v) for v in vertices]
    lines += ["f {:d} {:d} {:d}".format(*(f + 1)) for f in faces]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as err:
        raise SnapshotIOError("cannot write mesh ({})".format(err), path=path)
    logger.debug("Wrote mesh with {:d} triangles to {}.".format(len(faces), path))


def read_obj(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices (n, 3) and zero-based triangles (k, 3) of an ``.obj`` file."""
    vertices, faces = [], []
    for number, line in enumerate(read_text(path).splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
        except ValueError:
            raise SnapshotIOError("malformed line {:d}".format(number), path=path)
    return np.array(vertices, dtype=float), np.array(faces, dtype=int)


# checkpoints


@dataclass
class Checkpoint:
    """Everything needed to continue a run exactly where it stopped."""

    L_max: int
    t: float
    step_index: int
    dt: float
    clean_steps: int
    initial_W0: float
    initial_area: float
    coeffs: np.ndarray
    reference_coeffs: Optional[np.ndarray] = None

    def immersion(self) -> Immersion:
        return Immersion(get_grid(self.L_max), self.coeffs)

    def reference(self) -> Optional[Immersion]:
        if self.reference_coeffs is None:
            return None
        return Immersion(get_grid(self.L_max), self.reference_coeffs)

    def to_state(self, cfg: FlowConfig) -> FlowState:
        """Rebuilds the flow state, recomputing the Willmore fields."""
        state = initial_state(self.immersion(), cfg)
        state.t = self.t
        state.step_index = self.step_index
        state.dt = self.dt
        state.clean_steps = self.clean_steps
        return state


def write_checkpoint(
    state: FlowState,
    path: PathLike,
    initial_W0: float,
    initial_area: float,
    reference: Immersion = None,
):
    names = ["phi_x", "phi_y", "phi_z"]
    blocks = [state.im.coeffs]
    if reference is not None:
        names += ["ref_x", "ref_y", "ref_z"]
        blocks.append(reference.coeffs)
    header = [
        MAGIC,
        "L_max {:d}".format(state.im.L_max),
        "t {}".format(float(state.t).hex()),
        "step {:d}".format(state.step_index),
        "dt {}".format(float(state.dt).hex()),
        "clean_steps {:d}".format(state.clean_steps),
        "w0_initial {}".format(float(initial_W0).hex()),
        "area_initial {}".format(float(initial_area).hex()),
        "fields {}".format(" ".join(names)),
        "end",
    ]
    payload = np.concatenate(blocks).astype("<c16").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(("\n".join(header) + "\n").encode("ascii"))
            f.write(payload)
    except OSError as err:
        raise SnapshotIOError("cannot write checkpoint ({})".format(err), path=path)
    logger.debug("Wrote checkpoint at t = {:.6f} to {}.".format(state.t, path))


def read_checkpoint(path: PathLike) -> Checkpoint:
    """Parses a coefficient dump written by :func:`write_checkpoint`.

    Raises:
        SnapshotIOError: unreadable file, unknown header or truncated payload.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise SnapshotIOError("cannot read checkpoint ({})".format(err), path=path)
    marker = b"\nend\n"
    cut = raw.find(marker)
    if not raw.startswith(MAGIC.encode("ascii")) or cut < 0:
        raise SnapshotIOError("not a willflow coefficient dump", path=path)
    meta: Dict[str, str] = {}
    for line in raw[:cut].decode("ascii").splitlines()[1:]:
        key, _, value = line.partition(" ")
        meta[key] = value
    try:
        L = int(meta["L_max"])
        names = meta["fields"].split()
        shape = (len(names), L + 1, 2 * L + 1)
        data = np.frombuffer(raw[cut + len(marker):], dtype="<c16")
        if data.size != np.prod(shape):
            raise SnapshotIOError(
                "payload holds {:d} values, expected {:d}".format(data.size, int(np.prod(shape))),
                path=path,
            )
        coeffs = data.reshape(shape).astype(complex)
        return Checkpoint(
            L_max=L,
            t=float.fromhex(meta["t"]),
            step_index=int(meta["step"]),
            dt=float.fromhex(meta["dt"]),
            clean_steps=int(meta["clean_steps"]),
            initial_W0=float.fromhex(meta["w0_initial"]),
            initial_area=float.fromhex(meta["area_initial"]),
            coeffs=coeffs[:3],
            reference_coeffs=coeffs[3:6] if len(names) == 6 else None,
        )
    except (KeyError, ValueError) as err:
        raise SnapshotIOError("malformed header ({})".format(err), path=path)


def export_snapshot(
    state: FlowState,
    fmt: str,
    directory: PathLike,
    initial_W0: float = None,
    initial_area: float = None,
    reference: Immersion = None,
) -> Path:
    """Writes ``state`` as ``snapshot_<step>.obj`` or ``checkpoint_<step>.coeffs``.

    Returns:
        Path: The written file.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise SnapshotIOError("cannot create directory ({})".format(err), path=directory)
    if fmt == "obj":
        path = directory / "snapshot_{:06d}.obj".format(state.step_index)
        write_obj(state.im, path)
    elif fmt == "coeffs":
        path = directory / "checkpoint_{:06d}.coeffs".format(state.step_index)
        write_checkpoint(
            state,
            path,
            initial_W0 if initial_W0 is not None else state.W0,
            initial_area if initial_area is not None else state.im.area(),
            reference,
        )
    else:
        raise SnapshotIOError("unknown snapshot format {!r}".format(fmt), path=directory)
    return path


# diagnostics


@dataclass
class DiagnosticsRow:
    """One line of the diagnostics table, in header order."""

    t: float
    w0: float
    w1: float
    w2: float
    area: float
    bx: float
    by: float
    bz: float
    hopf: float
    balance: float
    r1: float
    r2: float
    r3: float
    r4: float
    diss_lhs: float
    diss_rhs: float
    dlm: float
    dt: float
    dlm_ratio: float
    area_ratio: float

    @classmethod
    def from_report(cls, report, initial_W0: float, initial_area: float) -> "DiagnosticsRow":
        e = report.energies
        dlm_ratio = e.dlm_distance / np.sqrt(e.W0) if e.W0 > 0 else float("nan")
        area_ratio = (
            abs(e.area - initial_area) / (initial_area * initial_W0)
            if initial_W0 > 0
            else float("nan")
        )
        r = report.noether
        return cls(
            report.t, e.W0, e.W1, e.W2, e.area,
            e.barycenter[0], e.barycenter[1], e.barycenter[2],
            report.hopf, report.balance,
            r[0], r[1], r[2], r[3],
            report.dissipation_lhs, report.dissipation_rhs,
            e.dlm_distance, report.dt_used,
            float(dlm_ratio), float(area_ratio),
        )

    def as_list(self) -> List[str]:
        return [repr(float(getattr(self, f.name))) for f in fields(self)]


class DiagnosticsWriter:
    """Appends one CSV row per accepted step.

    With ``resume_at`` an existing table is kept up to and including that
    time, so a resumed run continues it without gaps or duplicates.
    """

    def __init__(self, path: PathLike, resume_at: float = None):
        self.path = Path(path)
        self.rows_written = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if resume_at is not None and self.path.exists():
                kept = [r for r in read_diagnostics(self.path) if r.t <= resume_at]
                self._file = open(self.path, "w", newline="")
                self._writer = csv.writer(self._file, lineterminator="\n")
                self._file.write(DIAGNOSTICS_HEADER + "\n")
                for row in kept:
                    self._writer.writerow(row.as_list())
                logger.info("Kept {:d} diagnostics rows up to t = {:.6f}.".format(len(kept), resume_at))
            else:
                self._file = open(self.path, "w", newline="")
                self._writer = csv.writer(self._file, lineterminator="\n")
                self._file.write(DIAGNOSTICS_HEADER + "\n")
        except OSError as err:
            raise SnapshotIOError("cannot open diagnostics ({})".format(err), path=self.path)

    def write(self, row: DiagnosticsRow):
        try:
            self._writer.writerow(row.as_list())
            self._file.flush()
        except OSError as err:
            raise SnapshotIOError("cannot write diagnostics ({})".format(err), path=self.path)
        self.rows_written += 1

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path: PathLike) -> List[DiagnosticsRow]:
    """Rows of a diagnostics table; the header must match exactly."""
    lines = read_text(path).splitlines()
    if not lines or lines[0] != DIAGNOSTICS_HEADER:
        raise SnapshotIOError("unexpected diagnostics header", path=path)
    rows = []
    for number, values in enumerate(csv.reader(lines[1:]), start=2):
        try:
            rows.append(DiagnosticsRow(*[float(v) for v in values]))
        except (TypeError, ValueError):
            raise SnapshotIOError("malformed row {:d}".format(number), path=path)
    return rows


# summaries


def _finite_max(values) -> Optional[float]:
    values = np.asarray(values, dtype=float)
    if not np.any(np.isfinite(values)):
        return None
    return float(np.nanmax(np.where(np.isfinite(values), values, np.nan)))


def run_summary(
    trajectory, rows: List[DiagnosticsRow], wall_time: float, seed: int, aborted: bool = False
) -> dict:
    """Machine-readable outcome of a run."""
    final = trajectory.final
    drift = []
    if rows and trajectory.initial_W0 > 0:
        b0 = np.array([rows[0].bx, rows[0].by, rows[0].bz])
        drift = [
            np.linalg.norm(np.array([r.bx, r.by, r.bz]) - b0) / trajectory.initial_W0
            for r in rows
        ]
    return {
        "final_W0": float(final.W0),
        "final_t": float(final.t),
        "steps": int(final.step_index),
        "wall_time": float(wall_time),
        "converged": bool(trajectory.converged),
        "aborted": bool(aborted),
        "dt_halvings": int(trajectory.halvings),
        "seed": int(seed),
        "initial_W0": float(trajectory.initial_W0),
        "max_dlm_ratio": _finite_max([r.dlm_ratio for r in rows]),
        "max_area_ratio": _finite_max([r.area_ratio for r in rows]),
        "max_barycenter_drift_ratio": _finite_max(drift),
        "max_hopf": _finite_max([r.hopf for r in rows]),
        "max_balance": _finite_max([r.balance for r in rows]),
        "max_stability_bound": _finite_max([r.stability_bound for r in trajectory.reports]),
    }


def write_summary(summary: dict, path: PathLike):
    try:
        Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as err:
        raise SnapshotIOError("cannot write summary ({})".format(err), path=path)


def read_summary(path: PathLike) -> dict:
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as err:
        raise SnapshotIOError("malformed summary ({})".format(err), path=path)
