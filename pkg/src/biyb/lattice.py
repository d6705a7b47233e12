"""Derivatives on the (tau, sigma) lattice.

Fields on a lattice are arrays whose axis 0 is time and axis 1 is the
periodic (or cut) spatial direction; trailing axes hold coefficient vectors
or matrices.  Finite differences are central and return only the valid
interior, so callers trim the other arrays with :func:`trim`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "spectral_derivative",
    "fourier_resample",
    "fd_weights",
    "central_difference",
    "trim",
    "Jet",
    "lattice_jet",
]


def spectral_derivative(f, length, axis=0):
    """First derivative of periodic samples via FFT (Nyquist mode dropped)."""
    f = np.asarray(f)
    n = f.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = n
    df = np.fft.ifft(np.fft.fft(f, axis=axis) * k.reshape(shape), axis=axis)
    return df.real if np.isrealobj(f) else df


def fourier_resample(f, factor, axis=0):
    """Trigonometric interpolation of periodic samples onto a grid ``factor``
    times finer (the original samples are reproduced at every ``factor``-th
    point)."""
    f = np.asarray(f)
    n = f.shape[axis]
    m = n * factor
    F = np.fft.fft(f, axis=axis)
    F = np.moveaxis(F, axis, 0)
    G = np.zeros((m,) + F.shape[1:], dtype=complex)
    half = n // 2
    G[:half] = F[:half]
    G[m - half + 1:] = F[half + 1:]
    if n % 2 == 0:
        # split the Nyquist mode symmetrically
        G[half] = 0.5 * F[half]
        G[m - half] = 0.5 * F[half]
    else:
        G[half] = F[half]
    out = np.fft.ifft(G, axis=0) * factor
    out = np.moveaxis(out, 0, axis)
    return out.real if np.isrealobj(f) else out


@lru_cache(maxsize=None)
def fd_weights(order, deriv=1):
    """Central finite-difference weights of the given (even) accuracy order."""
    if order % 2 or order < 2:
        raise ValueError("central stencils need an even order >= 2")
    m = order // 2 + (deriv - 1) // 2
    offsets = np.arange(-m, m + 1)
    V = np.vander(offsets, increasing=True).T.astype(float)
    rhs = np.zeros(len(offsets))
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    w = np.linalg.solve(V, rhs)
    w[np.abs(w) < 1e-14] = 0.0
    w.flags.writeable = False
    return w


def central_difference(f, h, axis=0, order=4, periodic=False):
    """Derivative along ``axis`` by central differences.

    Non-periodic input loses ``order // 2`` points at each end.
    """
    f = np.asarray(f)
    w = fd_weights(order)
    m = len(w) // 2
    f = np.moveaxis(f, axis, 0)
    if periodic:
        out = sum(wk * np.roll(f, -(k - m), axis=0) for k, wk in enumerate(w) if wk)
    else:
        n = f.shape[0]
        if n < 2 * m + 1:
            raise ValueError(f"need at least {2 * m + 1} samples, got {n}")
        out = sum(wk * f[k:n - 2 * m + k] for k, wk in enumerate(w) if wk)
    return np.moveaxis(out / h, 0, axis)


def trim(f, tau=0, sigma=0):
    """Drop ``tau`` time slices and ``sigma`` sites from each end."""
    f = np.asarray(f)
    t_end = f.shape[0] - tau
    s_end = f.shape[1] - sigma
    return f[tau:t_end, sigma:s_end]


@dataclass(frozen=True)
class Jet:
    """A lattice field together with its first derivatives.

    ``dplus``/``dminus`` follow the light-cone convention
    ``d_pm = (d_tau +- d_sigma) / 2``.
    """

    value: np.ndarray
    dtau: np.ndarray
    dsigma: np.ndarray

    @property
    def dplus(self):
        return 0.5 * (self.dtau + self.dsigma)

    @property
    def dminus(self):
        return 0.5 * (self.dtau - self.dsigma)

    def map(self, linear):
        """Apply a linear (constant-coefficient) map to value and derivatives."""
        return Jet(linear(self.value), linear(self.dtau), linear(self.dsigma))

    def trimmed(self, tau=0, sigma=0):
        return Jet(trim(self.value, tau, sigma), trim(self.dtau, tau, sigma),
                   trim(self.dsigma, tau, sigma))


def lattice_jet(field, dtau, dsigma, tau_order=4, sigma_order=None, length=None):
    """First derivatives of a lattice field on a common interior region.

    Parameters
    ----------
    field : ndarray, shape (T, N, ...)
    dtau, dsigma : float
        Lattice spacings.
    tau_order : int
        Accuracy order of the central differences in time.
    sigma_order : int or None
        ``None`` selects spectral differentiation (periodic ``sigma`` with
        period ``length``, default ``N * dsigma``); an integer selects
        non-periodic central differences of that order.

    Returns
    -------
    Jet
        Arrays trimmed to the points where both derivatives are available.
    """
    field = np.asarray(field)
    mt = len(fd_weights(tau_order)) // 2
    if sigma_order is None:
        ms = 0
        if length is None:
            length = field.shape[1] * dsigma
        ds = spectral_derivative(field, length, axis=1)
    else:
        ms = len(fd_weights(sigma_order)) // 2
        ds = central_difference(field, dsigma, axis=1, order=sigma_order)
    dt = central_difference(field, dtau, axis=0, order=tau_order)
    return Jet(trim(field, mt, ms), trim(dt, 0, ms), trim(ds, mt, 0))
