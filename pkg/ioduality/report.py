"""Deterministic CSV and JSON outputs."""
from typing import Any
from typing import Iterable
from typing import List
from typing import Optional
from typing import Union

import io
import os
import json

import fsspec
import numpy as np
import pandas as pd

from ioduality._version import __version__
from ioduality.duality import Detection
from ioduality.duality import PhaseCurve
from ioduality.exceptions import ConfigError
from ioduality.oracles import OracleEigenvalue
from ioduality.synth import DensityProbeResult
from ioduality.synth import SynthesisResult

FLOAT_FORMAT = "%.17g"


def header(config_hash: str, **extra: Any) -> dict:
    """Header fields shared by every output file"""
    fields = {"version": __version__, "config_hash": config_hash}
    fields.update(extra)
    return fields


def _comment_block(fields: dict) -> str:
    return "".join(f"# {key}: {value}\n" for key, value in fields.items())


def _write(path: Union[str, os.PathLike], text: str):
    with fsspec.open(str(path), "w", encoding="utf-8", newline="\n", auto_mkdir=True) as OUT:
        OUT.write(text)


def frame_to_csv(frame: pd.DataFrame, fields: dict) -> str:
    """CSV text with a '#' comment header and 17 significant digits"""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return _comment_block(fields) + buffer.getvalue()


def write_sweep_csv(
    curve: PhaseCurve, path: Union[str, os.PathLike], config_hash: str
) -> pd.DataFrame:
    """Sweep table, one row per grid point

    Skipped samples keep their row with empty phase columns and `skipped` set to 1, the
    reasons are listed in the comment header.
    """
    frame = curve.to_dataframe()
    fields = header(config_hash, problem=str(curve.problem), sigma=curve.problem.sigma)
    for sample in curve.samples:
        if sample.skipped:
            fields[f"skipped {sample.lam!r}"] = sample.reason
    _write(path, frame_to_csv(frame, fields))
    return frame


def read_sweep_csv(path: Union[str, os.PathLike]) -> pd.DataFrame:
    with fsspec.open(str(path), "r", encoding="utf-8") as IN:
        return pd.read_csv(IN, comment="#")


def to_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_detections_json(
    detections: Iterable[Detection],
    path: Union[str, os.PathLike],
    config_hash: str,
    unasserted: Optional[List[OracleEigenvalue]] = None,
    **extra: Any,
) -> dict:
    payload = {
        "header": header(config_hash, **extra),
        "detections": [d.model_dump() for d in sorted(detections, key=lambda d: d.lambda_hat)],
        "unasserted": [e.model_dump() for e in unasserted or []],
    }
    _write(path, to_json(payload))
    return payload


def write_json(payload: dict, path: Union[str, os.PathLike]):
    _write(path, to_json(payload))


def write_synthesis(
    result: SynthesisResult,
    out_dir: Union[str, os.PathLike],
    config_hash: str,
    **extra: Any,
):
    """Residual table and one long table of the synthesized densities"""
    fields = header(config_hash, **extra)
    residuals = pd.DataFrame(
        {
            "alpha": result.alphas,
            "surrogate_residual": result.surrogate_residuals,
            "data_residual": result.data_residuals,
            "trace_misfit": result.trace_misfits,
            "psi_norm": result.psi_norms,
        }
    )
    fields_res = dict(
        fields, target_norm=repr(result.target_norm), trace_norm=repr(result.trace_norm)
    )
    _write(os.path.join(out_dir, "synthesis_residuals.csv"), frame_to_csv(residuals, fields_res))
    n = result.psis.shape[1]
    densities = pd.DataFrame(
        {
            "alpha": np.repeat(result.alphas, n),
            "node": np.tile(np.arange(n), len(result.alphas)),
            "re": result.psis.real.ravel(),
            "im": result.psis.imag.ravel(),
        }
    )
    _write(os.path.join(out_dir, "synthesis_psi.csv"), frame_to_csv(densities, fields))
    return residuals


def read_density_csv(path: Union[str, os.PathLike], n_nodes: int) -> np.ndarray:
    """Complex nodal values from a CSV with `re` and `im` columns

    Raises:
        ConfigError: if the file lacks the columns or holds the wrong number of rows
    """
    try:
        with fsspec.open(str(path), "r", encoding="utf-8") as IN:
            frame = pd.read_csv(IN, comment="#")
    except FileNotFoundError:
        raise ConfigError(f"Density file {path} not found") from None
    if not {"re", "im"} <= set(frame.columns):
        raise ConfigError(f"Density file {path} needs 're' and 'im' columns")
    if len(frame) != n_nodes:
        raise ConfigError(
            f"Density file {path} has {len(frame)} rows, the source curve has {n_nodes} nodes"
        )
    return frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float)


def write_density_probe(
    probe: DensityProbeResult, out_dir: Union[str, os.PathLike], config_hash: str
) -> pd.DataFrame:
    """Tikhonov path of the density probe, mode gains and warnings go to the header"""
    gains = " ".join(f"{m}:{g!r}" for m, g in zip(probe.modes.tolist(), probe.mode_gains.tolist()))
    fields = header(
        config_hash,
        target_norm=repr(probe.target_norm),
        condition_ratio=repr(probe.condition_ratio),
        mode_gains=gains,
    )
    for i, msg in enumerate(probe.warnings):
        fields[f"warning {i}"] = msg
    frame = pd.DataFrame(
        {
            "alpha": probe.alphas,
            "residual": probe.residuals,
            "relative_residual": probe.relative_residuals,
        }
    )
    _write(os.path.join(out_dir, "density_probe.csv"), frame_to_csv(frame, fields))
    return frame
