"""Dirichlet-to-Neumann maps of a disk as Fourier multipliers."""
from typing import Literal
from typing import Optional

import numpy as np

from dataclasses import dataclass
from scipy import fft

from ioduality import specfun
from ioduality.exceptions import PoleError
from ioduality.geometry import DiscretizedCurve
from ioduality.potentials import OperatorMatrix
from ioduality.potentials import WaveContext

POLE_TOL = 1e-6

DtNKind = Literal["interior", "exterior", "interior_n"]


@dataclass
class DtNSymbol:
    """Multiplier of a rotation invariant map on the circle of radius `radius`

    `values[i]` is the symbol of order `orders[i]`, for orders -M..M.
    """

    kind: str
    radius: float
    orders: np.ndarray
    values: np.ndarray

    @property
    def M(self) -> int:
        return int(np.max(np.abs(self.orders)))

    def symbol(self, m: np.ndarray) -> np.ndarray:
        return self.values[np.asarray(m) + self.M]

    def _nodal_multiplier(self, N: int) -> np.ndarray:
        freqs = np.rint(fft.fftfreq(N, d=1.0 / N)).astype(int)
        if N // 2 > self.M:
            raise ValueError(f"Symbol known up to order {self.M}, need {N // 2} for {N} nodes")
        # the Nyquist bin stands for both +N/2 and -N/2, symbols are even in m
        return self.symbol(freqs)

    def apply(self, trace: np.ndarray) -> np.ndarray:
        """Apply the map to nodal values on uniform nodes (leading axis)"""
        trace = np.asarray(trace)
        mult = self._nodal_multiplier(trace.shape[0])
        shape = (-1,) + (1,) * (trace.ndim - 1)
        return fft.ifft(mult.reshape(shape) * fft.fft(trace, axis=0), axis=0)

    def inverse(self) -> "DtNSymbol":
        return DtNSymbol(f"inv({self.kind})", self.radius, self.orders, 1 / self.values)

    def __add__(self, other: "DtNSymbol") -> "DtNSymbol":
        kind = f"{self.kind}+{other.kind}"
        return DtNSymbol(kind, self.radius, self.orders, self.values + other.values)

    def __sub__(self, other: "DtNSymbol") -> "DtNSymbol":
        kind = f"{self.kind}-{other.kind}"
        return DtNSymbol(kind, self.radius, self.orders, self.values - other.values)

    def __mul__(self, other: "DtNSymbol") -> "DtNSymbol":
        kind = f"{self.kind}*{other.kind}"
        return DtNSymbol(kind, self.radius, self.orders, self.values * other.values)

    def as_operator(self, curve: DiscretizedCurve) -> OperatorMatrix:
        """Nodal matrix of the multiplier on a discretized circle"""
        entries = self.apply(np.eye(len(curve), dtype=complex))
        return OperatorMatrix(entries, curve, curve, "DtN", {"symbol": self.kind})


def dtn_disk(
    kind: DtNKind,
    a: float,
    ctx: WaveContext,
    n: Optional[float] = None,
    M: int = 64,
) -> DtNSymbol:
    """Dirichlet-to-Neumann symbol of a disk of radius `a`, outward normal

    `interior` gives k J_m'(ka) / J_m(ka), `exterior` the radiating k H_m'(ka) / H_m(ka) and
    `interior_n` the interior map for the index n, sqrt(n) k J_m'(sqrt(n) ka) / J_m(sqrt(n) ka).

    Args:
        kind: which map
        a: disk radius
        ctx: spectral parameter
        n: refractive index, only for `interior_n`
        M: highest order

    Raises:
        PoleError: when an interior symbol has a pole, i.e. J_m vanishes at the boundary
    """
    orders = np.arange(-M, M + 1)
    absm = np.abs(orders)
    if kind == "exterior":
        x = ctx.k * a
        values = ctx.k * specfun.deriv_hankel1(absm, x) / specfun.hankel1(absm, x)
        return DtNSymbol(kind, a, orders, values)

    if kind == "interior":
        kk = ctx.k
    elif kind == "interior_n":
        if n is None or n <= 0:
            raise ValueError("The interior_n map needs a positive refractive index")
        kk = np.sqrt(n) * ctx.k
    else:
        raise ValueError(f"Unknown DtN kind {kind!r}")
    x = kk * a
    jm = specfun.bessel_j(absm, x)
    djm = specfun.deriv_j(absm, x)
    poles = np.abs(jm) < POLE_TOL * np.abs(djm)
    if np.any(poles):
        m = int(absm[poles][0])
        idx = np.flatnonzero(poles)[0]
        zero = x - jm[idx] / djm[idx]
        raise PoleError(
            f"{kind} DtN map has a pole in mode {m}: J_{m} vanishes near {zero:.9f}",
            mode=m,
            zero=float(zero),
        )
    return DtNSymbol(kind, a, orders, (kk * djm / jm).astype(complex))
