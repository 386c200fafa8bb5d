from typing import Iterable
from typing import Optional
from typing import Union

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ioduality.duality import Detection
from ioduality.duality import PhaseCurve

SVG_RC = {"svg.hashsalt": "ioduality", "svg.fonttype": "none", "path.simplify": False}


def plot_phase_curve(
    curve: PhaseCurve,
    path: Union[str, os.PathLike],
    detections: Optional[Iterable[Detection]] = None,
    title: Optional[str] = None,
):
    """Static SVG of the duality indicator against the spectral parameter

    Detections are marked by vertical lines. The file carries no timestamp, so identical
    curves give identical files.

    Args:
        curve: phase curve of a sweep
        path: output SVG path
        detections: optional detections to mark
        title: plot title, defaults to the problem description
    """
    valid = curve.valid
    lams = np.array([s.lam for s in valid])
    psi = np.array([s.psi for s in valid])
    with matplotlib.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(lams, psi, color="black", linewidth=0.8)
        for det in detections or []:
            ax.axvline(det.lambda_hat, color="tab:red", linestyle="--", linewidth=0.8)
        ax.set_xlabel("lambda")
        ax.set_ylabel("psi")
        ax.set_xlim(*curve.interval)
        ax.set_ylim(0, 2 * np.pi)
        ax.set_title(title or str(curve.problem))
        fig.tight_layout()
        fig.savefig(str(path), format="svg", metadata={"Date": None})
        plt.close(fig)
