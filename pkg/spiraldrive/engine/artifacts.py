"""
Artifact I/O: CSV with '#'-prefixed provenance/metadata lines and JSON reports.

Floats are written with 17 significant digits and read back with pandas'
round-trip parser, so every artifact reloads bit-exactly.
"""
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from spiraldrive.engine.antenna_engine import FieldSample
from spiraldrive.engine.analysis.odmr_engine import OdmrPoint
from spiraldrive.engine.analysis.rabi_engine import RabiTrace
from spiraldrive.engine.errors import ParseError
from spiraldrive.engine.pulse_engine import LandscapeGrid
from spiraldrive.engine.spin_core import Trajectory
from spiraldrive.engine.waveforms import ControlWaveform

log = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"

TRAJECTORY_COLUMNS = ["t", "p_up", "p_down", "re_up", "im_up", "re_down", "im_down"]
WAVEFORM_COLUMNS = ["time", "value"]
FIELD_COLUMNS = ["x_um", "y_um", "z_um", "bx_G_per_A", "by_G_per_A", "bz_G_per_A"]
ODMR_COLUMNS = ["current_A", "f_minus_MHz", "f_plus_MHz"]
RABI_COLUMNS = ["time_us", "signal"]


# --- Generic CSV / JSON ---

def _header_lines(provenance: Optional[Dict[str, Any]], metadata: Optional[Dict[str, Any]]) -> List[str]:
    lines = []
    for block in (provenance or {}, metadata or {}):
        for key, value in block.items():
            lines.append(f"# {key} = {value}")
    return lines


def write_csv(path: PathLike, frame: pd.DataFrame, provenance: Optional[Dict[str, Any]] = None,
              metadata: Optional[Dict[str, Any]] = None, index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for line in _header_lines(provenance, metadata):
            handle.write(line + "\n")
        frame.to_csv(handle, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_csv(path: PathLike, columns: Sequence[str]) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """
    Reads a '#'-annotated CSV and checks `columns` are present and numeric.
    Returns the frame and the `# key = value` metadata; errors carry file line numbers.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc

    metadata: Dict[str, str] = {}
    header: Optional[List[str]] = None
    rows: List[Tuple[int, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:]
            if "=" in body:
                key, value = body.split("=", 1)
                metadata[key.strip()] = value.strip()
            continue
        fields = [field.strip() for field in next(csv.reader([line], skipinitialspace=True))]
        if header is None:
            header = fields
            missing = [c for c in columns if c not in header]
            if missing:
                raise ParseError(f"missing column(s) {missing}; header is {header}", line=number, path=str(path))
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(fields)}", line=number, path=str(path))
        rows.append((number, line))
    if header is None:
        raise ParseError("no header row", path=str(path))
    if not rows:
        raise ParseError("no data rows", path=str(path))

    body = "\n".join([",".join(header)] + [line for _, line in rows])
    frame = pd.read_csv(io.StringIO(body), float_precision="round_trip", skipinitialspace=True)
    for column in columns:
        if pd.api.types.is_numeric_dtype(frame[column]):
            continue
        for (number, _), value in zip(rows, frame[column]):
            try:
                float(value)
            except (TypeError, ValueError):
                raise ParseError(f"column {column!r}: cannot parse {value!r} as a number",
                                 line=number, path=str(path)) from None
        frame[column] = frame[column].astype(float)
    return frame, metadata


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(path: PathLike, payload: Dict[str, Any], provenance: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"provenance": provenance} if provenance is not None else {}
    document.update(payload)
    path.write_text(json.dumps(document, indent=2, default=_to_jsonable) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from exc


# --- Waveforms ---

def waveform_frame(w: ControlWaveform) -> pd.DataFrame:
    return pd.DataFrame({"time": w.times, "value": w.values})


def write_waveform_csv(path: PathLike, w: ControlWaveform, provenance: Optional[Dict[str, Any]] = None) -> Path:
    metadata = {"unconstrained": str(w.unconstrained).lower(), "flags": "|".join(w.flags)}
    return write_csv(path, waveform_frame(w), provenance, metadata)


def read_waveform_csv(path: PathLike) -> ControlWaveform:
    frame, metadata = read_csv(path, WAVEFORM_COLUMNS)
    flags = tuple(f for f in metadata.get("flags", "").split("|") if f)
    return ControlWaveform(times=frame["time"].to_numpy(), values=frame["value"].to_numpy(),
                           unconstrained=metadata.get("unconstrained", "false") == "true", flags=flags)


def waveform_to_json(w: ControlWaveform) -> Dict[str, Any]:
    return {"times": w.times.tolist(), "values": w.values.tolist(),
            "unconstrained": w.unconstrained, "flags": list(w.flags)}


def waveform_from_json(document: Dict[str, Any]) -> ControlWaveform:
    return ControlWaveform(times=document["times"], values=document["values"],
                           unconstrained=document.get("unconstrained", False),
                           flags=tuple(document.get("flags", ())))


# --- Trajectories ---

def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    states = traj.states
    return pd.DataFrame({
        "t": traj.times,
        "p_up": traj.populations[:, 0],
        "p_down": traj.populations[:, 1],
        "re_up": states[:, 0].real,
        "im_up": states[:, 0].imag,
        "re_down": states[:, 1].real,
        "im_down": states[:, 1].imag,
    })


def read_trajectory_csv(path: PathLike) -> pd.DataFrame:
    frame, _ = read_csv(path, TRAJECTORY_COLUMNS)
    return frame


# --- Landscapes ---

def landscape_frame(grid: LandscapeGrid) -> pd.DataFrame:
    """Rows are offsets, columns are phases, cells are 1 - F."""
    frame = pd.DataFrame(grid.infidelity, index=pd.Index(grid.offsets, name="offset"),
                         columns=[FLOAT_FORMAT % phi for phi in grid.phases])
    return frame


def write_landscape_csv(path: PathLike, grid: LandscapeGrid, provenance: Optional[Dict[str, Any]] = None) -> Path:
    metadata = {"omega0": grid.system.omega0, "omega_d": grid.system.omega_d, "theta_d": grid.system.theta_d,
                "envelope": grid.spec_template.envelope_kind, "duration": grid.spec_template.duration_tpi}
    return write_csv(path, landscape_frame(grid), provenance, metadata, index=True)


def read_landscape_csv(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(offsets, phases, infidelity) from a landscape CSV."""
    frame, _ = read_csv(path, ["offset"])
    offsets = frame["offset"].to_numpy()
    value_columns = [c for c in frame.columns if c != "offset"]
    try:
        phases = np.array([float(c) for c in value_columns])
    except ValueError as exc:
        raise ParseError(f"phase header is not numeric: {exc}", line=None, path=str(path)) from exc
    matrix = frame[value_columns].to_numpy(dtype=float)
    return offsets, phases, matrix


def write_gnuplot_matrix(path: PathLike, grid: LandscapeGrid, provenance: Optional[Dict[str, Any]] = None) -> Path:
    """gnuplot 'nonuniform matrix' text: '#' header, first row N then phases, then one row per offset."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = _header_lines(provenance, {"omega_d": grid.system.omega_d, "theta_d": grid.system.theta_d})
    lines += [" ".join([str(len(grid.phases))] + [FLOAT_FORMAT % p for p in grid.phases])]
    for offset, row in zip(grid.offsets, grid.infidelity):
        lines.append(" ".join([FLOAT_FORMAT % offset] + [FLOAT_FORMAT % v for v in row]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --- Antenna ---

def field_map_frame(samples: Iterable[FieldSample]) -> pd.DataFrame:
    rows = [s.position + s.b_per_current for s in samples]
    return pd.DataFrame(rows, columns=FIELD_COLUMNS)


def read_field_map_csv(path: PathLike) -> List[FieldSample]:
    frame, _ = read_csv(path, FIELD_COLUMNS)
    return [FieldSample(position=tuple(row[:3]), b_per_current=tuple(row[3:]))
            for row in frame[FIELD_COLUMNS].itertuples(index=False, name=None)]


# --- Measurement ingestion ---

def read_odmr_csv(path: PathLike) -> List[OdmrPoint]:
    frame, _ = read_csv(path, ODMR_COLUMNS)
    return [tuple(row) for row in frame[ODMR_COLUMNS].itertuples(index=False, name=None)]


def write_odmr_csv(path: PathLike, data: Sequence[OdmrPoint], provenance: Optional[Dict[str, Any]] = None) -> Path:
    return write_csv(path, pd.DataFrame(list(data), columns=ODMR_COLUMNS), provenance)


def read_rabi_csv(path: PathLike) -> RabiTrace:
    """Rabi trace with the drive current in a `# current_A = ...` header row."""
    frame, metadata = read_csv(path, RABI_COLUMNS)
    if "current_A" not in metadata:
        raise ParseError("missing '# current_A = <value>' header row", path=str(path))
    try:
        current = float(metadata["current_A"])
    except ValueError as exc:
        raise ParseError(f"current_A header is not numeric: {metadata['current_A']!r}", path=str(path)) from exc
    if not math.isfinite(current):
        raise ParseError("current_A header must be finite", path=str(path))
    return RabiTrace(times=frame["time_us"].to_numpy(), signal=frame["signal"].to_numpy(), current=current)


def write_rabi_csv(path: PathLike, trace: RabiTrace, provenance: Optional[Dict[str, Any]] = None) -> Path:
    frame = pd.DataFrame({"time_us": trace.times, "signal": trace.signal})
    return write_csv(path, frame, provenance, {"current_A": repr(float(trace.current))})
