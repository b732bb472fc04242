"""
Artifact persistence.

CSV tables (via pandas) for signals, ground truth, ridges, recovered
components, bound curves and cube slices; JSON for reports and summaries;
a binary container for whole transform cubes.
"""
import json
import logging
import os
import struct
from typing import Any, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from core.chirplet import SigmaSchedule, slice_plane
from core.errors import InvalidArgumentError
from core.models import (
    BoundReport, CubeGrid, RecoveredComponent, RidgeSet, SampledSignal, SignalModel, TransformCube,
)
from core.signal_model import ground_truth_curves

logger = logging.getLogger(__name__)

CUBE_MAGIC = b"CT3SCUBE"
CUBE_VERSION = 1


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (list, tuple)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(obj: Any, path: str) -> str:
    """Write a pydantic model, dict or list as indented JSON."""
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(obj), f, indent=2, ensure_ascii=False)
    return path


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _write_frame(frame: pd.DataFrame, path: str) -> str:
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    frame.to_csv(path, index=False)
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def signal_frame(signal: SampledSignal) -> pd.DataFrame:
    return pd.DataFrame({"t": signal.times, "re": signal.samples.real, "im": signal.samples.imag})


def write_signal_csv(signal: SampledSignal, path: str) -> str:
    return _write_frame(signal_frame(signal), path)


def read_signal_csv(path: str) -> SampledSignal:
    """SampledSignal from a t, re, im CSV; the rate comes from the first time step."""
    frame = pd.read_csv(path)
    missing = {"t", "re", "im"} - set(frame.columns)
    if missing:
        raise InvalidArgumentError(f"{path} is missing columns {sorted(missing)}")
    t = frame["t"].to_numpy(dtype=float)
    if t.size < 2:
        raise InvalidArgumentError(f"{path} holds fewer than 2 samples")
    step = (t[-1] - t[0]) / (t.size - 1)
    if not np.allclose(np.diff(t), step, rtol=1e-6, atol=1e-12):
        raise InvalidArgumentError(f"{path} is not uniformly sampled")
    samples = frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float)
    return SampledSignal(samples=samples, sample_rate=1.0 / step, t_start=float(t[0]))


def truth_frame(model: SignalModel, times: Sequence[float]) -> pd.DataFrame:
    times = np.asarray(times, dtype=float)
    amps, d1, d2 = ground_truth_curves(model, times)
    rows = [
        pd.DataFrame({"component": k, "t": times, "amplitude": amps[k], "if": d1[k], "chirp_rate": d2[k]})
        for k in range(amps.shape[0])
    ]
    return pd.concat(rows, ignore_index=True)


def write_truth_csv(model: SignalModel, times: Sequence[float], path: str) -> str:
    return _write_frame(truth_frame(model, times), path)


def ridge_frame(ridge: RidgeSet) -> pd.DataFrame:
    frames = []
    for k in range(ridge.n_components):
        flag = np.where(ridge.gap[k], "gap", np.where(ridge.excess_slices, "excess", "ok"))
        frames.append(pd.DataFrame({
            "component": k,
            "t": ridge.t_axis,
            "eta_hat": ridge.eta_hat[k],
            "lambda_hat": ridge.lambda_hat[k],
            "q_re": ridge.q_value[k].real,
            "q_im": ridge.q_value[k].imag,
            "flag": flag,
        }))
    return pd.concat(frames, ignore_index=True)


def write_ridges_csv(ridge: RidgeSet, path: str) -> str:
    return _write_frame(ridge_frame(ridge), path)


def recovered_frame(component: RecoveredComponent) -> pd.DataFrame:
    return pd.DataFrame({
        "component": component.component_index,
        "t": component.t_axis,
        "re": component.samples.real,
        "im": component.samples.imag,
        "amp": component.amplitude_estimate,
    })


def write_recovered_csvs(components: Sequence[RecoveredComponent], out_dir: str) -> List[str]:
    """One recovered_<k>.csv per component."""
    return [
        _write_frame(recovered_frame(c), os.path.join(out_dir, f"recovered_{c.component_index}.csv"))
        for c in components
    ]


def bound_curves_frame(reports: Sequence[BoundReport]) -> pd.DataFrame:
    """t, pi, upsilon, res_k, bd1_k, bd2_k, bd3_k and passed; invalid bounds are empty cells."""
    rows = []
    for report in reports:
        row = {"t": report.t, "pi": report.pi, "upsilon": report.upsilon}
        for name in ("res", "bd1", "bd2", "bd3"):
            for k, value in enumerate(getattr(report, name)):
                row[f"{name}_{k}"] = np.nan if value is None else value
        row["passed"] = report.passed
        rows.append(row)
    return pd.DataFrame(rows)


def write_bound_curves_csv(reports: Sequence[BoundReport], path: str) -> str:
    return _write_frame(bound_curves_frame(reports), path)


def slice_frame(cube: TransformCube, t_index: int) -> pd.DataFrame:
    plane = slice_plane(cube, t_index)
    E, L = np.meshgrid(cube.grid.eta_axis, cube.grid.lambda_axis, indexing="ij")
    return pd.DataFrame({
        "eta": E.ravel(), "lambda": L.ravel(),
        "re": plane.real.ravel(), "im": plane.imag.ravel(), "abs": np.abs(plane).ravel(),
    })


def write_slice_csv(cube: TransformCube, t_index: int, path: str) -> str:
    return _write_frame(slice_frame(cube, t_index), path)


def _sigma_spec(grid: CubeGrid):
    if isinstance(grid.sigma, SigmaSchedule):
        return grid.sigma.to_spec()
    return [[float(t), float(s)] for t, s in zip(grid.t_axis, grid.sigma_values())]


def write_cube(cube: TransformCube, path: str) -> str:
    """
    Binary cube: magic, uint32 header length, JSON header, then the values as
    little-endian complex128 (interleaved float64 re/im), row-major (t, η, λ).
    """
    grid = cube.grid
    header = {
        "version": CUBE_VERSION,
        "shape": list(grid.shape),
        "t_axis": grid.t_axis.tolist(),
        "eta_axis": grid.eta_axis.tolist(),
        "lambda_axis": grid.lambda_axis.tolist(),
        "eta_bins": grid.eta_bins.tolist(),
        "sigma": _sigma_spec(grid),
        "sample_rate": grid.sample_rate,
        "n_fft": grid.n_fft,
        "boundary_flags": cube.boundary_flags.tolist(),
    }
    encoded = json.dumps(header).encode("utf-8")
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "wb") as f:
        f.write(CUBE_MAGIC)
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        f.write(np.ascontiguousarray(cube.values).astype("<c16").tobytes())
    logger.info("wrote cube %s to %s", grid.shape, path)
    return path


def read_cube(path: str) -> TransformCube:
    """
    Raises:
        InvalidArgumentError: if the file is not a cube container or is truncated
    """
    with open(path, "rb") as f:
        if f.read(len(CUBE_MAGIC)) != CUBE_MAGIC:
            raise InvalidArgumentError(f"{path} is not a cube file")
        (length,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(length).decode("utf-8"))
        payload = f.read()

    shape = tuple(header["shape"])
    expected = int(np.prod(shape)) * 16
    if len(payload) != expected:
        raise InvalidArgumentError(f"{path} holds {len(payload)} value bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<c16").astype(complex).reshape(shape)
    values.setflags(write=False)
    grid = CubeGrid(
        t_axis=header["t_axis"], eta_axis=header["eta_axis"], lambda_axis=header["lambda_axis"],
        eta_bins=header["eta_bins"], sigma=SigmaSchedule(header["sigma"]),
        sample_rate=header["sample_rate"], n_fft=header["n_fft"],
    )
    flags = np.asarray(header["boundary_flags"], dtype=bool)
    return TransformCube(grid=grid, values=values, boundary_flags=flags)
