"""
Artifact Writers
Deterministic CSV and JSON output. Every file is written to a temporary sibling
and renamed into place so partially finished runs never leave torn files.
"""
import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import numpy as np

from app.schemas import AuxTrace, PhaseTrace, WaveSample, Trajectory, ResidualRecord, RunReport

PathLike = Union[str, Path]


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def write_json(path: PathLike, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_aux(path: PathLike, aux: AuxTrace) -> Path:
    return write_csv(
        path,
        ("t", "sigma", "sigma_dot", "alpha", "alpha_dot"),
        zip(aux.mesh, aux.sigma, aux.sigma_dot, aux.alpha, aux.alpha_dot),
    )


def write_phase(path: PathLike, trace: PhaseTrace) -> Path:
    return write_csv(
        path,
        ("t", "eps", "part_invariant", "part_metric"),
        zip(trace.mesh, trace.eps, trace.part_invariant, trace.part_metric),
    )


def write_wave(path: PathLike, wave: WaveSample) -> Path:
    values = wave.values
    return write_csv(path, ("x", "re", "im", "abs2"), zip(wave.x, values.real, values.imag, np.abs(values) ** 2))


def write_trajectory(directory: PathLike, trajectory: Trajectory) -> List[Path]:
    directory = Path(directory)
    written = [
        write_wave(directory / f"state_{i:05d}.csv", state) for i, state in enumerate(trajectory.states)
    ]
    written.append(write_csv(
        directory / "norms.csv",
        ("t", "plain_norm", "eta_norm"),
        zip(trajectory.times, trajectory.plain_norm, trajectory.eta_norm),
    ))
    return written


def _sanitize(value):
    """Replace non-finite floats by null so the JSON stays standard"""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_residuals(path: PathLike, records: Sequence[ResidualRecord]) -> Path:
    return write_json(path, _sanitize([r.model_dump() for r in records]))


def write_report(path: PathLike, report: RunReport) -> Path:
    payload = report.model_dump(mode="json")
    payload["passed"] = report.passed
    return write_json(path, _sanitize(payload))
