"""One-dimensional oracle: the law of ``X_t - e^{tA} x`` by Fourier inversion of its characteristic function.

Grid conventions: ``x_j = -L + j dx`` with ``dx = 2L/n`` and frequencies
``z_k = k dz`` with ``dz = pi/L``. Then ``e^{-i z_k x_j} = (-1)^k e^{-2 pi i jk/n}``
and the inversion sum is one real inverse FFT.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridError, UnsupportedError
from .functions import TestFunction
from .levy_model import LevyModel, log_cf_1d

CF_FLOOR = 1e-12
MASS_TOL = 1e-10
LEAK_TOL = 1e-6
LEAK_TARGET = 1e-8
N_DEFAULT = 2**14
N_MAX = 2**25
Z_SCAN_MAX = 1e8
ROUNDOFF_MASS = 1e-13


@dataclass(frozen=True)
class GridConfig:
    n: int = N_DEFAULT
    n_max: int = N_MAX
    cf_floor: float = CF_FLOOR
    mass_tol: float = MASS_TOL
    oversample: float = 2.0


@dataclass
class DensityTable:
    """Density ``p_t`` of ``Y = X_t - e^{tA} x`` and its derivative on a uniform grid."""

    t: float
    L: float
    x: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    cf: np.ndarray = field(repr=False)  # mu^_t(z_k), k = 0..n/2
    flow_factor: float = 1.0  # e^{tA}
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def dz(self) -> float:
        return math.pi / self.L

    @property
    def z(self):
        return self.dz * np.arange(len(self.cf))

    @property
    def mass(self) -> float:
        return float(self.p.sum() * self.dx)

    @property
    def leak(self) -> float:
        return self.diagnostics["leak"]

    def _active(self):
        """Frequencies ``z_k > 0`` whose coefficient is not negligible, with trapezoid weights."""
        mag = np.abs(self.cf)
        live = np.flatnonzero(mag > 1e-18)
        last = int(live[-1]) if live.size else 0
        k = np.arange(1, last + 1)
        w = np.ones(last)
        if last == len(self.cf) - 1:
            w[-1] = 0.5  # the Nyquist term is shared by +-z
        return k, self.dz * k, self.cf[1:last + 1] * w

    def density_at(self, y):
        """Band-limited interpolant of ``p`` at arbitrary points (the periodic Fourier sum)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        _, z, c = self._active()
        cr, ci = c.real, c.imag
        odd = bool(np.any(ci))  # symmetric laws have a real cf
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            # Re(c e^{-i z y}) = Re(c) cos(zy) + Im(c) sin(zy)
            th = z * yi
            acc = cr @ np.cos(th)
            if odd:
                acc += ci @ np.sin(th)
            out[i] = (1.0 + 2.0 * acc) / (2.0 * self.L)
        return out

    def cdf_at(self, y):
        """``int_{-L}^{y} p`` for the periodised density, by integrating the Fourier sum term by term."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        k, z, c = self._active()
        sign = np.where(k % 2 == 0, 1.0, -1.0)
        cr, ci = c.real / z, c.imag / z
        odd = bool(np.any(ci))
        base = float(ci @ sign) if odd else 0.0
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            # Re(c (e^{-i z y} - (-1)^k) / (-i z)) = (Re c sin(zy) - Im c cos(zy) + (-1)^k Im c) / z
            th = z * yi
            acc = cr @ np.sin(th)
            if odd:
                acc += base - ci @ np.cos(th)
            out[i] = (yi + self.L) / (2.0 * self.L) + acc / self.L
        return out

    def to_csv(self, path=None, stride: int = 1) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "p", "dp"])
        for xi, pi, di in zip(self.x[::stride], self.p[::stride], self.dp[::stride]):
            writer.writerow([f"{xi:.12g}", f"{pi:.12g}", f"{di:.12g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _cf_on(model: LevyModel, t: float, z):
    return np.exp(log_cf_1d(model, t, z))


def _cutoff_frequency(model: LevyModel, t: float, floor: float) -> float:
    """First scanned ``z`` with ``|mu^_t(z)| < floor``."""
    z = np.geomspace(1e-3, Z_SCAN_MAX, 1100)
    mag = np.abs(_cf_on(model, t, z))
    below = np.flatnonzero(mag < floor)
    if below.size == 0:
        raise GridError(
            "characteristic function does not decay below the cutoff; no usable density",
            {"z_max_scanned": Z_SCAN_MAX, "cf_at_max": float(mag[-1]), "floor": floor},
        )
    # require it to stay below from there on (no late bumps on the scan grid)
    k = int(below[0])
    if np.any(mag[k:] >= floor):
        k = int(np.flatnonzero(mag >= floor)[-1]) + 1
    return float(z[k])


def _invert(model: LevyModel, t: float, n: int, L: float):
    dz = math.pi / L
    k = np.arange(n // 2 + 1)
    z = dz * k
    cf = _cf_on(model, t, z)
    cf[0] = 1.0
    alt = np.where(k % 2 == 0, 1.0, -1.0)
    scale = dz / (2.0 * math.pi) * n
    p = scale * np.fft.irfft(np.conj(alt * cf), n)
    dp = scale * np.fft.irfft(np.conj(alt * (-1j * z) * cf), n)
    x = -L + (2.0 * L / n) * np.arange(n)
    return x, p, dp, cf


def _shell_masses(x, p, dx, L):
    """Masses in ``L/8 < |x| <= L/4``, ``L/4 < |x| <= L/2`` and ``|x| > L/2``."""
    a = np.abs(x)
    m_a = float(p[(a > L / 8.0) & (a <= L / 4.0)].sum() * dx)
    m_b = float(p[(a > L / 4.0) & (a <= L / 2.0)].sum() * dx)
    m_out = float(p[a > L / 2.0].sum() * dx)
    return m_a, m_b, m_out


def _leak_estimate(m_a: float, m_b: float, m_out: float) -> float:
    """Mass beyond ``L`` from the decay ratio of the two inner shells.

    The outer shell is polluted by the periodic wrap-around, so it is only used
    when the inner shells carry no mass. Exact for power tails ``|x|^{-p}``.
    """
    if m_b <= ROUNDOFF_MASS:
        # inner shells hold only round-off: the tail is already negligible
        return max(m_out, m_b, 0.0)
    if m_a <= 0.0:
        return math.inf
    q = m_b / m_a
    return m_b * q * q / (1.0 - q) if q < 1.0 else math.inf


def density_from_cf(model: LevyModel, t: float, grid: GridConfig = GridConfig()) -> DensityTable:
    """Fourier inversion of ``mu^_t`` on an adaptively sized grid.

    The frequency cutoff fixes ``dx`` (``oversample`` points per Nyquist
    interval at the first ``z`` with ``|mu^_t| < cf_floor``); the half-width is
    then grown (with ``n``) until the mass in ``L/2 < |x| <= L`` is below
    ``mass_tol``, the extrapolated mass beyond ``L`` (``leak``, from two inner
    shells) is below ``LEAK_TARGET``, or ``n`` reaches ``n_max``.
    """
    if model.dim != 1:
        raise UnsupportedError("the spectral oracle is one-dimensional")
    if model.has_atoms:
        raise UnsupportedError("the law of X_t has an atom (pure compound Poisson); no density")
    if not t > 0.0:
        raise DomainError("t must be positive")
    z_cut = _cutoff_frequency(model, t, grid.cf_floor)
    dx = math.pi / (grid.oversample * z_cut)
    n = grid.n
    L = 0.5 * n * dx
    while True:
        x, p, dp, cf = _invert(model, t, n, L)
        m_a, m_b, m_out = _shell_masses(x, p, dx, L)
        leak = _leak_estimate(m_a, m_b, m_out)
        # heavy tails never meet the mass criterion; stop once the leak is far below tolerance
        if m_out < grid.mass_tol or leak < LEAK_TARGET or 2 * n > grid.n_max:
            break
        grow = 4 if 4 * n <= grid.n_max else 2
        n *= grow
        L *= grow
    a = float(model.A[0, 0])
    diag = {
        "z_cut": z_cut,
        "n": n,
        "L": L,
        "dx": dx,
        "outer_mass": m_out,
        "mass_criterion_met": m_out < grid.mass_tol,
        "leak": leak,
        "min_p": float(p.min()),
        "mass": float(p.sum() * dx),
        "cf_at_nyquist": float(abs(cf[-1])),
    }
    return DensityTable(t, L, x, p, dp, cf, math.exp(a * t), diag)


def plancherel_error(table: DensityTable) -> float:
    """``sum_k |p^(z_k) - mu^_t(z_k)|`` with ``p^`` the forward transform of the tabulated density."""
    n = table.n
    k = np.arange(n // 2 + 1)
    alt = np.where(k % 2 == 0, 1.0, -1.0)
    # p^(z_k) = dx sum_j p_j e^{i z_k x_j} = dx (-1)^k sum_j p_j e^{2 pi i jk/n}
    recovered = table.dx * alt * np.conj(np.fft.rfft(table.p))
    return float(np.abs(recovered[:-1] - table.cf[:-1]).sum())


@dataclass(frozen=True)
class SpectralValues:
    x: np.ndarray
    value: np.ndarray
    gradient: np.ndarray
    leak: float


def semigroup_and_gradient(table: DensityTable, f: TestFunction, xs, model: LevyModel | None = None,
                           values: bool = True) -> SpectralValues:
    """``P_t f(x) = int f(e^{tA} x + y) p_t(y) dy`` and its derivative in ``x``.

    Smooth ``f`` uses the trapezoid rule on the table grid. Step functions use
    the exact Fourier-series antiderivative of ``p`` at the jump locations,
    because a grid rule on a discontinuous integrand is only first order.
    With ``values=False`` step functions skip the antiderivative and ``value`` is NaN.
    """
    if table.leak > LEAK_TOL:
        raise GridError("probability mass beyond the grid exceeds tolerance; widen the grid",
                        {"leak": table.leak, "limit": LEAK_TOL, "L": table.L, "n": table.n})
    if model is not None:
        factor = math.exp(float(model.A[0, 0]) * table.t)
        if abs(factor - table.flow_factor) > 1e-14 * factor:
            raise DomainError("table was built for a different model")
    if f.dim != 1:
        raise DomainError("the spectral oracle takes 1-D test functions")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    e = table.flow_factor
    centers = e * xs
    if np.any(np.abs(centers) > table.L / 4.0):
        raise GridError("evaluation points too close to the grid edge", {"L": table.L})
    steps = f.steps_1d()
    if steps is None:
        vals = np.empty_like(xs)
        grads = np.empty_like(xs)
        for i, c in enumerate(centers):
            fv = f(c + table.x)
            vals[i] = float(np.dot(fv, table.p)) * table.dx
            grads[i] = -e * float(np.dot(fv, table.dp)) * table.dx
    else:
        v0, jumps = steps
        vals = np.full_like(xs, v0 if values else np.nan)
        grads = np.zeros_like(xs)
        for loc, height in jumps:
            y = loc - centers
            if values:
                vals += height * (1.0 - table.cdf_at(y))
            grads += height * e * table.density_at(y)
    return SpectralValues(xs, vals, grads, table.leak)


def spectral_semigroup(model: LevyModel, t: float, f: TestFunction, xs, grid: GridConfig = GridConfig(),
                       values: bool = True):
    table = density_from_cf(model, t, grid)
    return semigroup_and_gradient(table, f, xs, model, values)


def sup_gradient(model: LevyModel, t: float, f: TestFunction, xs=None, grid: GridConfig = GridConfig()) -> float:
    """``max |d/dx P_t f|`` over a 21-point grid on ``[-3, 3]`` (stand-in for the sup over the line)."""
    xs = np.linspace(-3.0, 3.0, 21) if xs is None else xs
    return float(np.max(np.abs(spectral_semigroup(model, t, f, xs, grid, values=False).gradient)))
