"""Lax connections of the deformed model and their one-parameter limits.

The connection convention is ``-l^-1 d_pm l = L_pm`` so flatness reads
``d_+ L_- - d_- L_+ + [L_-, L_+] = 0``.  Lax components are complex
coefficient arrays over the su(n) basis (i.e. sl(n, C)-valued).  The
functions take a :class:`~biyb.model.BiYBModel` for the algebra, ``R`` and,
where noted, the deformation parameters.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import SpectralPoleError
from .group import adjoint_matrix
from .lattice import Jet

__all__ = [
    "SpectralParameter",
    "LaxSample",
    "lax_operators",
    "bi_yb_lax",
    "bi_yb_lax_from_g",
    "lax_jets",
    "curvature_residual",
    "offshell_identity_defect",
    "zm_lax",
    "yb_lax_D",
    "yb_lax_K",
    "lax_J_form",
    "mobius",
    "mobius_inverse",
    "gauge_transform",
    "gauge_of_yb_lax_D",
    "limit_chain_defects",
    "zeta_samples",
    "SWEEP_COLUMNS",
    "write_sweep_csv",
]

POLE_EXCLUSION = 1e-6


@dataclass(frozen=True)
class SpectralParameter:
    """A point of the Riemann sphere, stored either as ``zeta`` or ``1/zeta``.

    Construct with ``SpectralParameter(zeta)`` or
    ``SpectralParameter.from_reciprocal(w)``; ``w = 0`` is ``zeta = infinity``
    and is evaluated exactly.
    """

    value: complex = None
    reciprocal: complex = None

    def __post_init__(self):
        if (self.value is None) == (self.reciprocal is None):
            raise ValueError("give exactly one of value or reciprocal")
        for s in (1, -1):
            if abs(self.pole_denominator(s)) < POLE_EXCLUSION * max(1.0, abs(self._w_or_1())):
                raise SpectralPoleError(f"spectral parameter at the pole zeta = {-s}")

    @classmethod
    def from_reciprocal(cls, w):
        return cls(reciprocal=complex(w))

    @classmethod
    def coerce(cls, zeta):
        return zeta if isinstance(zeta, cls) else cls(complex(zeta))

    def _w_or_1(self):
        return 1.0 if self.reciprocal is None else self.reciprocal

    def pole_denominator(self, sign):
        if self.reciprocal is None:
            return 1.0 + sign * self.value
        return self.reciprocal + sign

    def pole_factor(self, sign):
        """``1 / (1 + sign * zeta)``."""
        if self.reciprocal is None:
            return 1.0 / (1.0 + sign * self.value)
        return self.reciprocal / (self.reciprocal + sign)

    def inverse_pole_factor(self, sign):
        """``1 / (1 + sign / zeta)``."""
        if self.reciprocal is None:
            return self.value / (self.value + sign)
        return 1.0 / (1.0 + sign * self.reciprocal)

    @property
    def is_infinite(self):
        return self.reciprocal == 0

    def __complex__(self):
        if self.reciprocal is None:
            return complex(self.value)
        if self.reciprocal == 0:
            return complex(np.inf)
        return 1.0 / self.reciprocal


@dataclass(frozen=True)
class LaxSample:
    L_plus: np.ndarray
    L_minus: np.ndarray
    zeta: SpectralParameter = None

    def __iter__(self):
        return iter((self.L_plus, self.L_minus))


def _apply(op, x):
    return np.einsum("...ij,...j->...i", op, x)


def lax_operators(model, zeta, imag_shift=2.0):
    """``M_pm = beta (R - i) + (imag_shift i beta +- c) / (1 +- zeta)``.

    The Lax pair in current form is ``L_pm = M_pm J_pm``.  ``imag_shift = 2``
    is the integrable value; other values give a deliberately broken
    connection for negative controls.
    """
    zeta = SpectralParameter.coerce(zeta)
    a, b = model.params.alpha, model.params.beta
    c = 1 + a * a - b * b
    eye = np.eye(model.basis.dim)
    base = b * (model.R - 1j * eye)
    m_plus = base + (imag_shift * 1j * b + c) * zeta.pole_factor(+1) * eye
    m_minus = base + (imag_shift * 1j * b - c) * zeta.pole_factor(-1) * eye
    return m_plus, m_minus


def bi_yb_lax(model, j_plus, j_minus, zeta, imag_shift=2.0):
    """Lax pair from the currents."""
    zeta = SpectralParameter.coerce(zeta)
    m_plus, m_minus = lax_operators(model, zeta, imag_shift)
    return LaxSample(_apply(m_plus, j_plus), _apply(m_minus, j_minus), zeta)


def bi_yb_lax_from_g(model, g, a_plus, a_minus, zeta):
    """Lax pair from ``g`` and ``A_pm = g^-1 d_pm g``:
    ``-+ M_pm (I +- alpha R_g +- beta R)^-1 A_pm``."""
    zeta = SpectralParameter.coerce(zeta)
    m_plus, m_minus = lax_operators(model, zeta)
    x_plus = model._solve(model.deformation(g, +1), a_plus)
    x_minus = model._solve(model.deformation(g, -1), a_minus)
    return LaxSample(-_apply(m_plus, x_plus), _apply(m_minus, x_minus), zeta)


def lax_jets(model, jp, jm, zeta, imag_shift=2.0):
    """Jets of ``L_pm`` from jets of ``J_pm`` (the operators are constant)."""
    m_plus, m_minus = lax_operators(model, zeta, imag_shift)
    return (jp.map(lambda x: _apply(m_plus, x)), jm.map(lambda x: _apply(m_minus, x)))


def curvature_residual(basis, lp, lm):
    """``d_+ L_- - d_- L_+ + [L_-, L_+]`` from jets."""
    return lm.dplus - lp.dminus + basis.bracket(lm.value, lp.value)


def offshell_identity_defect(model, jp, jm, zeta):
    """Curvature of the current-form Lax pair minus ``M_+ V_- + M_- V_+``.

    Holds for arbitrary (non-solution) current jets; returns the pointwise
    max-norm array.
    """
    lp, lm = lax_jets(model, jp, jm, zeta)
    curv = curvature_residual(model.basis, lp, lm)
    v_plus, v_minus = model.v_residuals(jp, jm)
    m_plus, m_minus = lax_operators(model, zeta)
    combo = _apply(m_plus, v_minus) + _apply(m_minus, v_plus)
    return np.max(np.abs(curv - combo), axis=-1)


def zm_lax(a_plus, a_minus, zeta):
    """Principal chiral Lax pair ``-A_pm / (1 +- zeta)``."""
    zeta = SpectralParameter.coerce(zeta)
    return LaxSample(-np.asarray(a_plus) * zeta.pole_factor(+1),
                     -np.asarray(a_minus) * zeta.pole_factor(-1), zeta)


def yb_lax_D(model, g, a_plus, a_minus, alpha, zeta):
    """``-(1 + alpha^2) / (1 +- zeta) (I +- alpha R_g)^-1 A_pm``."""
    zeta = SpectralParameter.coerce(zeta)
    R_g = model.R_g(g) if alpha else 0.0
    eye = np.eye(model.basis.dim)
    out = []
    for sign, a in ((1, a_plus), (-1, a_minus)):
        a = np.asarray(a)
        op = np.broadcast_to(eye + sign * alpha * R_g, a.shape[:-1] + eye.shape)
        x = model._solve(op, a)
        out.append(-(1 + alpha ** 2) * zeta.pole_factor(sign) * x)
    return LaxSample(*out, zeta)


def lax_J_form(model, a_plus, a_minus, beta, lam):
    """``(beta^2 -+ beta R - (1 + beta^2) / (1 +- lam)) (I +- beta R)^-1 A_pm``."""
    lam = SpectralParameter.coerce(lam)
    eye = np.eye(model.basis.dim)
    out = []
    for sign, a in ((1, a_plus), (-1, a_minus)):
        x = _apply(np.linalg.inv(eye + sign * beta * model.R), a)
        coeff = (beta ** 2 - (1 + beta ** 2) * lam.pole_factor(sign)) * eye - sign * beta * model.R
        out.append(_apply(coeff, x))
    return LaxSample(*out, lam)


def mobius(zeta, beta):
    """``lambda = (zeta - i beta) / (1 - i zeta beta)``."""
    den = 1 - 1j * zeta * beta
    if abs(den) < POLE_EXCLUSION:
        raise SpectralPoleError(f"Mobius map singular at zeta = {zeta} for beta = {beta}")
    return (zeta - 1j * beta) / den


def mobius_inverse(lam, beta):
    """``zeta = (lambda + i beta) / (1 + i lambda beta)``."""
    den = 1 + 1j * lam * beta
    if abs(den) < POLE_EXCLUSION:
        raise SpectralPoleError(f"inverse Mobius map singular at lambda = {lam}")
    return (lam + 1j * beta) / den


def yb_lax_K(model, a_plus, a_minus, beta, zeta):
    """The one-parameter Lax pair in the ``lambda(zeta)`` form."""
    zeta = complex(zeta)
    return lax_J_form(model, a_plus, a_minus, beta, mobius(zeta, beta))


def gauge_transform(basis, lax, g, a_plus, a_minus):
    """``g L_pm g^-1 + d_pm g g^-1`` with ``d_pm g g^-1 = Ad_g A_pm``."""
    ad = adjoint_matrix(basis, g)
    lp, lm = lax
    return LaxSample(_apply(ad, lp) + _apply(ad, a_plus),
                     _apply(ad, lm) + _apply(ad, a_minus),
                     getattr(lax, "zeta", None))


def gauge_of_yb_lax_D(model, g, a_plus, a_minus, alpha, zeta):
    """Closed form of the gauge-transformed one-parameter Lax pair:
    ``-(alpha^2 -+ alpha R - (1 + alpha^2) / (1 +- 1/zeta)) (I +- alpha R)^-1 d_pm g g^-1``."""
    zeta = SpectralParameter.coerce(zeta)
    ad = adjoint_matrix(model.basis, g)
    eye = np.eye(model.basis.dim)
    out = []
    for sign, a in ((1, a_plus), (-1, a_minus)):
        x = _apply(np.linalg.inv(eye + sign * alpha * model.R), _apply(ad, a))
        coeff = ((alpha ** 2 - (1 + alpha ** 2) * zeta.inverse_pole_factor(sign)) * eye
                 - sign * alpha * model.R)
        out.append(-_apply(coeff, x))
    return LaxSample(*out, zeta)


def limit_chain_defects(model, g, a_plus, a_minus, zeta, alpha, beta):
    """Max deviations of the two-parameter Lax pair from its limits.

    Keys: ``zm`` (at ``alpha = beta = 0``), ``dlax_D`` (at ``beta = 0``,
    parameter ``alpha``), ``dlax_J`` (at ``alpha = 0``, parameter ``beta``,
    through the Mobius map) and ``gauge`` (the gauge transform of the
    ``dlax_D`` pair by ``g`` against the ``lambda``-form pair of ``g^-1``
    at ``lambda = 1 / zeta``).
    """
    from .model import ModelParams

    def dev(x, y):
        return float(max(np.max(np.abs(x.L_plus - y.L_plus)),
                         np.max(np.abs(x.L_minus - y.L_minus))))

    zeta_c = complex(zeta)
    out = {}
    m0 = model.with_params(ModelParams(0.0, 0.0))
    out["zm"] = dev(bi_yb_lax_from_g(m0, g, a_plus, a_minus, zeta_c),
                    zm_lax(a_plus, a_minus, zeta_c))
    ma = model.with_params(ModelParams(alpha, 0.0))
    out["dlax_D"] = dev(bi_yb_lax_from_g(ma, g, a_plus, a_minus, zeta_c),
                        yb_lax_D(model, g, a_plus, a_minus, alpha, zeta_c))
    mb = model.with_params(ModelParams(0.0, beta))
    out["dlax_J"] = dev(bi_yb_lax_from_g(mb, g, a_plus, a_minus, zeta_c),
                        yb_lax_K(model, a_plus, a_minus, beta, zeta_c))
    ad = adjoint_matrix(model.basis, g)
    gauged = gauge_transform(model.basis, yb_lax_D(model, g, a_plus, a_minus, alpha, zeta_c),
                             g, a_plus, a_minus)
    dual = lax_J_form(model, -_apply(ad, a_plus), -_apply(ad, a_minus), alpha,
                      SpectralParameter.from_reciprocal(zeta_c))
    out["gauge"] = dev(gauged, dual)
    return out


def zeta_samples(radii=(0.5, 2.0), count=20, exclusion=0.05):
    """Points on circles ``|zeta| = r``, half-step offset in angle, with disks
    of radius ``exclusion`` around the poles removed."""
    theta = 2 * np.pi * (np.arange(count) + 0.5) / count
    pts = np.concatenate([r * np.exp(1j * theta) for r in radii])
    keep = (np.abs(pts - 1) > exclusion) & (np.abs(pts + 1) > exclusion)
    return pts[keep]


SWEEP_COLUMNS = ("re_zeta", "im_zeta", "alpha", "beta", "n_sigma",
                 "max_residual", "l2_residual")


def write_sweep_csv(path, rows):
    """Write residual sweep rows (dicts keyed by :data:`SWEEP_COLUMNS`)."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(row[k])) if k != "n_sigma" else int(row[k]))
                        for k in SWEEP_COLUMNS})
