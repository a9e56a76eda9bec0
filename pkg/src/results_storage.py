"""
Artifact storage: KWSP snapshots, CSV tables, JSON summaries and the run manifest
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from src.exceptions import SnapshotFormatError
from src.models import EquationParams, Grid, InvariantLog, RunManifest, SpectralField, Trajectory

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"KWSP"
SNAPSHOT_VERSION = 1
# magic, version (u32), n (u64), box_length (f64), t (f64)
_HEADER = struct.Struct("<4sIQdd")

PathLike = Union[str, Path]


def save_snapshot(path: PathLike, field: SpectralField) -> None:
    """Write one spectral field as a KWSP snapshot"""
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.grid.n, field.grid.box_length, field.t)
    body = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(body)


def load_snapshot(path: PathLike) -> SpectralField:
    """
    Read a KWSP snapshot

    Raises:
        SnapshotFormatError: Bad magic, unsupported version or truncated data
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, box_length, t = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 16 * n
    if len(data) != expected:
        raise SnapshotFormatError(f"{path}: expected {expected} bytes for n={n}, found {len(data)}")
    coeffs = np.frombuffer(data, dtype="<c16", offset=_HEADER.size, count=n).astype(complex)
    return SpectralField(coeffs, Grid(int(n), float(box_length)), float(t))


def file_checksum(path: PathLike) -> str:
    """SHA-256 hex digest of a file"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ResultsStorage:
    """Writes run artifacts under one output directory and tracks their checksums"""

    def __init__(self, output_dir: str):
        """
        Initialize results storage

        Args:
            output_dir: Directory to store artifacts
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: Dict[str, str] = {}

    def _register(self, path: Path) -> Path:
        self.artifacts[path.relative_to(self.output_dir).as_posix()] = file_checksum(path)
        return path

    def save_json(self, name: str, data: Dict[str, Any]) -> Path:
        """Save a JSON document (sorted keys so reruns are byte-identical)"""
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True, default=_json_default)
        logger.info(f"Saved {path}")
        return self._register(path)

    def save_table(self, name: str, table: pd.DataFrame) -> Path:
        """Save a table as CSV with round-trip float precision"""
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"Saved {len(table)} rows to {path}")
        return self._register(path)

    def save_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return self._register(path)

    def save_trajectory(self, name: str, traj: Trajectory, dt: Optional[float] = None,
                        log: Optional[InvariantLog] = None) -> Path:
        """
        Save a trajectory as a directory of KWSP snapshots plus trajectory.json

        Args:
            name: Directory name below the output directory
            traj: Trajectory to save
            dt: Integrator step, recorded in trajectory.json
            log: Invariant log, recorded in trajectory.json
        """
        directory = self.output_dir / name
        directory.mkdir(parents=True, exist_ok=True)
        snapshots = []
        for i, state in enumerate(traj.states):
            path = directory / f"snapshot_{i:05d}.kwsp"
            save_snapshot(path, state)
            self._register(path)
            snapshots.append(path.name)
        meta = {
            "params": traj.params.to_dict(),
            "dt": dt,
            "times": [float(t) for t in traj.times],
            "snapshots": snapshots,
            "invariants": log.to_dict() if log is not None else None,
        }
        self.save_json(f"{name}/trajectory.json", meta)
        logger.info(f"Saved trajectory with {len(snapshots)} snapshots to {directory}")
        return directory

    def write_manifest(self, manifest: RunManifest) -> Path:
        """Write manifest.json; the manifest does not list itself"""
        path = self.output_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest.to_dict(), f, indent=2, ensure_ascii=False, default=_json_default)
        logger.info(f"Manifest lists {len(manifest.artifacts)} artifacts")
        return path


def load_trajectory(directory: PathLike) -> Trajectory:
    """Read a trajectory written by ResultsStorage.save_trajectory"""
    directory = Path(directory)
    with open(directory / "trajectory.json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    params = EquationParams(**meta["params"])
    states = [load_snapshot(directory / name) for name in meta["snapshots"]]
    return Trajectory(np.array(meta["times"], dtype=float), states, params)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
