"""The two-parameter deformed principal chiral model on a periodic lattice.

Conventions
-----------
Light-cone coordinates are ``xi_pm = tau +- sigma`` with
``d_pm = (d_tau +- d_sigma) / 2``.  ``g`` is SU(n)-valued, ``A_pm =
g^-1 d_pm g`` and the currents are::

    J_pm = -+ (I +- alpha R_g +- beta R)^-1 A_pm,     R_g = Ad_{g^-1} R Ad_g.

On solutions the currents satisfy ``V_+ = V_- = 0`` with::

    V_pm = +- d_pm J_mp +- beta [J_mp, R J_pm] +- (c / 2) [J_-, J_+],
    c = 1 + alpha**2 - beta**2,

and the evolution integrates the first-order system obtained by solving
these for ``d_- J_+`` and ``d_+ J_-`` together with ``d_tau g = g (A_+ +
A_-)``.  ``J_pm`` are evolved as independent fields; the relation between
``g`` and ``J`` is only monitored (see :meth:`BiYBModel.constraint_residual`).
"""

import io
import json
import logging
import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .algebra import build_cartan_weyl, canonical_R
from .errors import (AliasingError, InstabilityError, ParameterError,
                     SingularOperatorError)
from .group import adjoint_matrix, dressed_R, reproject_unitary, unitarity_defect
from .lattice import Jet, lattice_jet, spectral_derivative

logger = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "Worldsheet",
    "FieldState",
    "Trajectory",
    "InitialData",
    "BiYBModel",
    "state_to_json",
    "state_from_json",
    "state_to_bytes",
    "state_from_bytes",
]

SNAPSHOT_VERSION = 1
_MAGIC = b"BYBS"


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.0
    beta: float = 0.0
    max_abs: float = 5.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or abs(v) > self.max_abs:
                raise ParameterError(
                    f"{name}={v!r} outside the supported range |{name}| <= {self.max_abs}")

    @property
    def c(self):
        return 1.0 + self.alpha ** 2 - self.beta ** 2

    def swapped(self):
        return replace(self, alpha=self.beta, beta=self.alpha)


@dataclass(frozen=True)
class Worldsheet:
    """Uniform periodic sigma grid and time step.

    ``dt`` defaults to ``cfl * length / n_sigma``.
    """

    n_sigma: int = 128
    length: float = 2 * np.pi
    cfl: float = 0.5
    dt: float = None
    cfl_limit: float = 0.8

    def __post_init__(self):
        n = self.n_sigma
        if n < 8 or n & (n - 1):
            raise ParameterError(f"n_sigma must be a power of two >= 8, got {n}")
        if self.dt is None:
            object.__setattr__(self, "dt", self.cfl * self.dsigma)
        if not 0 < self.dt <= self.cfl_limit * self.dsigma:
            raise ParameterError(
                f"dt={self.dt:.4g} violates dt <= {self.cfl_limit} * dsigma "
                f"= {self.cfl_limit * self.dsigma:.4g}")

    @property
    def dsigma(self):
        return self.length / self.n_sigma

    @property
    def sigma(self):
        return np.arange(self.n_sigma) * self.dsigma


@dataclass(frozen=True)
class FieldState:
    """Snapshot of ``(g, J_+, J_-)`` at time ``tau``.

    ``g`` has shape ``(N, n, n)``; the currents are real coefficient arrays
    of shape ``(N, d)``.
    """

    tau: float
    g: np.ndarray
    J_plus: np.ndarray
    J_minus: np.ndarray

    @property
    def n_sites(self):
        return self.g.shape[0]


@dataclass(frozen=True)
class InitialData:
    """Band-limited seed for :meth:`BiYBModel.initial_state`.

    ``g(sigma, 0) = exp X(sigma)`` and ``g^-1 d_tau g = V(sigma)`` where
    ``X`` and ``V`` are random trigonometric polynomials of degree
    ``modes`` with coefficient scales ``amplitude`` and ``velocity``.
    """

    modes: int = 2
    amplitude: float = 0.1
    velocity: float = None
    seed: int = 0

    def profiles(self, dim, sigma, length):
        rng = np.random.default_rng(self.seed)
        vel = self.amplitude if self.velocity is None else self.velocity
        theta = 2 * np.pi * np.asarray(sigma) / length
        k = np.arange(1, self.modes + 1)
        coeffs = rng.normal(size=(4, self.modes, dim)) / np.sqrt(dim)
        cos, sin = np.cos(np.outer(theta, k)), np.sin(np.outer(theta, k))
        x = self.amplitude * (cos @ coeffs[0] + sin @ coeffs[1])
        dx = self.amplitude * (2 * np.pi / length) * (
            (-sin * k) @ coeffs[0] + (cos * k) @ coeffs[1])
        v = vel * (cos @ coeffs[2] + sin @ coeffs[3])
        return x, dx, v


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered snapshots at a uniform step ``dt``."""

    taus: np.ndarray
    g: np.ndarray
    J_plus: np.ndarray
    J_minus: np.ndarray
    worldsheet: Worldsheet
    reprojections: int = 0

    def __len__(self):
        return len(self.taus)

    @property
    def dt(self):
        return float(self.taus[1] - self.taus[0])

    def state(self, k):
        return FieldState(float(self.taus[k]), self.g[k], self.J_plus[k], self.J_minus[k])

    def current_jets(self, tau_order=4):
        """Jets of ``J_pm``: time differences of the stored history and
        spectral sigma derivatives."""
        ws = self.worldsheet
        kw = dict(tau_order=tau_order, length=ws.length)
        return (lattice_jet(self.J_plus, self.dt, ws.dsigma, **kw),
                lattice_jet(self.J_minus, self.dt, ws.dsigma, **kw))

    @classmethod
    def from_states(cls, states, worldsheet, reprojections=0):
        return cls(np.array([s.tau for s in states]),
                   np.array([s.g for s in states]),
                   np.array([s.J_plus for s in states]),
                   np.array([s.J_minus for s in states]),
                   worldsheet, reprojections)


def _apply(op, x):
    return np.einsum("...ij,...j->...i", op, x)


class BiYBModel:
    """Bi-Yang-Baxter model for SU(n) with deformation parameters ``alpha, beta``.

    Parameters
    ----------
    basis : CartanWeylBasis
    params : ModelParams
    R : ndarray, optional
        Yang-Baxter operator on coefficients; the canonical one by default.
    """

    def __init__(self, basis, params=None, R=None):
        self.basis = basis
        self.params = ModelParams() if params is None else params
        self.R = canonical_R(basis) if R is None else np.asarray(R)
        self._eye = np.eye(basis.dim)

    @classmethod
    def su(cls, n=2, alpha=0.0, beta=0.0):
        return cls(build_cartan_weyl(n), ModelParams(alpha, beta))

    def with_params(self, params):
        return BiYBModel(self.basis, params, self.R)

    def __repr__(self):
        p = self.params
        return f"BiYBModel({self.basis.basis_id}, alpha={p.alpha}, beta={p.beta})"

    # -- operators ------------------------------------------------------------

    def R_g(self, g):
        return dressed_R(self.basis, self.R, g)

    def deformation(self, g, sign):
        """``I + sign (alpha R_g + beta R)``, batched over sites."""
        p = self.params
        op = np.broadcast_to(self._eye + sign * p.beta * self.R,
                             np.shape(g)[:-2] + self._eye.shape).copy()
        if p.alpha:
            op = op + sign * p.alpha * self.R_g(g)
        return op

    def _solve(self, op, rhs, tol=1e-8):
        smin = np.linalg.svd(op, compute_uv=False)[..., -1]
        if np.min(smin, initial=np.inf) < tol:
            site = np.unravel_index(np.argmin(smin), smin.shape)
            raise SingularOperatorError(
                f"deformation operator nearly singular (smallest singular value "
                f"{np.min(smin):.2e}) at site {site}", site=site)
        return np.linalg.solve(op, rhs[..., None])[..., 0]

    # -- currents -------------------------------------------------------------

    def maurer_cartan(self, g, dg):
        """Coefficients of ``g^-1 dg`` (real for SU(n) fields)."""
        return self.basis.coefficients(np.linalg.solve(g, dg), real=True, atol=1e-8)

    def currents(self, g, a_plus, a_minus):
        """``J_pm = -+ (I +- alpha R_g +- beta R)^-1 A_pm``."""
        jp = -self._solve(self.deformation(g, +1), a_plus)
        jm = self._solve(self.deformation(g, -1), a_minus)
        return jp, jm

    def currents_from_g(self, g, dtau_g, dsigma_g):
        """Currents from ``g`` and its tau/sigma derivatives (matrix arrays)."""
        a_plus = self.maurer_cartan(g, 0.5 * (dtau_g + dsigma_g))
        a_minus = self.maurer_cartan(g, 0.5 * (dtau_g - dsigma_g))
        return self.currents(g, a_plus, a_minus)

    def connection(self, g, j_plus, j_minus):
        """Inverse of :meth:`currents`: ``A_pm = -+ (I +- alpha R_g +- beta R) J_pm``."""
        a_plus = -_apply(self.deformation(g, +1), j_plus)
        a_minus = _apply(self.deformation(g, -1), j_minus)
        return a_plus, a_minus

    # -- residuals ------------------------------------------------------------

    def _rj(self, j):
        return _apply(self.R, j)

    def v_residuals(self, jp, jm):
        """``(V_+, V_-)`` from jets of ``J_+`` and ``J_-``."""
        b, c = self.params.beta, self.params.c
        br = self.basis.bracket
        comm = br(jm.value, jp.value)
        v_plus = jm.dplus + b * br(jm.value, self._rj(jp.value)) + 0.5 * c * comm
        v_minus = -jp.dminus - b * br(jp.value, self._rj(jm.value)) - 0.5 * c * comm
        return v_plus, v_minus

    def eom_residual(self, jp, jm):
        """``d_+ J_- - d_- J_+ + beta [J_-, J_+]_R``."""
        br = self.basis.bracket
        r_br = br(self._rj(jm.value), jp.value) + br(jm.value, self._rj(jp.value))
        return jm.dplus - jp.dminus + self.params.beta * r_br

    def bianchi_residual(self, jp, jm):
        """``d_+ J_- + d_- J_+ + beta [J_-, R J_+] + beta [J_+, R J_-] + c [J_-, J_+]``."""
        b, c = self.params.beta, self.params.c
        br = self.basis.bracket
        return (jm.dplus + jp.dminus + b * br(jm.value, self._rj(jp.value))
                + b * br(jp.value, self._rj(jm.value)) + c * br(jm.value, jp.value))

    def constraint_residual(self, state, worldsheet):
        """``g^-1 d_sigma g - (A_+ - A_-)`` with a spectral sigma derivative.

        Zero when the stored currents are those of the stored ``g``.
        """
        dg = spectral_derivative(state.g, worldsheet.length, axis=0)
        s = self.basis.coefficients(np.linalg.solve(state.g, dg)).real
        a_plus, a_minus = self.connection(state.g, state.J_plus, state.J_minus)
        return s - (a_plus - a_minus)

    def action_density(self, g, a_plus, a_minus):
        """``(A_+, (I - alpha R_g - beta R)^-1 A_-)`` in the trace form."""
        return self.basis.inner(a_plus, self._solve(self.deformation(g, -1), a_minus))

    # -- evolution ------------------------------------------------------------

    def rhs(self, g, jp, jm, worldsheet):
        """Tau derivatives ``(d_tau g, d_tau J_+, d_tau J_-)``."""
        b, c = self.params.beta, self.params.c
        br = self.basis.bracket
        comm = br(jm, jp)
        dminus_jp = -b * br(jp, self._rj(jm)) - 0.5 * c * comm
        dplus_jm = -b * br(jm, self._rj(jp)) - 0.5 * c * comm
        ds_jp = spectral_derivative(jp, worldsheet.length, axis=0)
        ds_jm = spectral_derivative(jm, worldsheet.length, axis=0)
        a_plus, a_minus = self.connection(g, jp, jm)
        dg = g @ self.basis.to_matrix(a_plus + a_minus)
        return dg, ds_jp + 2 * dminus_jp, -ds_jm + 2 * dplus_jm

    def step(self, state, worldsheet, dt=None, reproject_tol=1e-10):
        """One classical RK4 step.

        ``g`` is re-projected onto SU(n) (and the event logged) only when its
        unitarity defect exceeds ``reproject_tol``.
        """
        return self._step(state, worldsheet, dt, reproject_tol)[0]

    def _step(self, state, worldsheet, dt, reproject_tol):
        dt = worldsheet.dt if dt is None else dt
        y0 = (state.g, state.J_plus, state.J_minus)

        def shift(y, k, h):
            return tuple(a + h * b for a, b in zip(y, k))

        k1 = self.rhs(*y0, worldsheet)
        k2 = self.rhs(*shift(y0, k1, dt / 2), worldsheet)
        k3 = self.rhs(*shift(y0, k2, dt / 2), worldsheet)
        k4 = self.rhs(*shift(y0, k3, dt), worldsheet)
        g, jp, jm = (y + dt / 6 * (a + 2 * b + 2 * c + d)
                     for y, a, b, c, d in zip(y0, k1, k2, k3, k4))
        tau = state.tau + dt
        peak = max(np.max(np.abs(jp), initial=0.0), np.max(np.abs(jm), initial=0.0))
        if not (np.all(np.isfinite(g)) and np.isfinite(peak)) or peak > 1e6:
            raise InstabilityError(
                f"evolution diverged at tau={tau:.4g} (max |J| = {peak:.3e}, "
                f"dt={dt:.3g}, n_sigma={worldsheet.n_sigma})")
        defect = unitarity_defect(g)
        if reproject_tol is not None and defect > reproject_tol:
            logger.info("re-projecting g onto SU(n) at tau=%.6g (defect %.3e)",
                        tau, defect)
            return FieldState(tau, reproject_unitary(g), jp, jm), True
        return FieldState(tau, g, jp, jm), False

    def evolve(self, state, worldsheet, t_final, reproject_tol=1e-10):
        """Integrate to ``t_final`` (rounded to whole steps) keeping every step."""
        steps = int(round((t_final - state.tau) / worldsheet.dt))
        states = [state]
        count = 0
        for _ in range(steps):
            state, projected = self._step(state, worldsheet, None, reproject_tol)
            count += projected
            states.append(state)
        return Trajectory.from_states(states, worldsheet, reprojections=count)

    # -- initial data and symmetries ------------------------------------------

    def initial_state(self, worldsheet, seed=None):
        """Smooth periodic initial data consistent with the current definition.

        Raises
        ------
        AliasingError
            If the seed uses modes above ``n_sigma / 4``.
        """
        seed = InitialData() if seed is None else seed
        if seed.modes > worldsheet.n_sigma // 4:
            raise AliasingError(
                f"{seed.modes} modes exceed the band limit n_sigma/4 = "
                f"{worldsheet.n_sigma // 4}")
        x, dx, v = seed.profiles(self.basis.dim, worldsheet.sigma, worldsheet.length)
        xm, dxm = self.basis.to_matrix(x), self.basis.to_matrix(dx)
        g = np.empty_like(xm)
        dg = np.empty_like(xm)
        for i in range(len(xm)):
            g[i], dg[i] = scipy.linalg.expm_frechet(xm[i], dxm[i])
        s = self.maurer_cartan(g, dg)
        jp, jm = self.currents(g, 0.5 * (v + s), 0.5 * (v - s))
        return FieldState(0.0, g, jp, jm)

    def invert_solution(self, state):
        """Map ``g -> g^-1`` and swap ``(alpha, beta)``.

        Returns the new state and the model with swapped parameters; the
        currents are recomputed from ``(g^-1)^-1 d(g^-1) = -Ad_g A``.
        """
        a_plus, a_minus = self.connection(state.g, state.J_plus, state.J_minus)
        ad = adjoint_matrix(self.basis, state.g)
        h = np.linalg.inv(state.g)
        other = self.with_params(self.params.swapped())
        jp, jm = other.currents(h, -_apply(ad, a_plus), -_apply(ad, a_minus))
        return FieldState(state.tau, h, jp, jm), other


# -- snapshots -----------------------------------------------------------------


def _header(state, worldsheet, params):
    return {
        "schema": "biyb.snapshot",
        "version": SNAPSHOT_VERSION,
        "tau": float(state.tau),
        "n_sites": int(state.n_sites),
        "n": int(state.g.shape[-1]),
        "dim": int(state.J_plus.shape[-1]),
        "length": float(worldsheet.length),
        "dt": float(worldsheet.dt),
        "alpha": float(params.alpha),
        "beta": float(params.beta),
    }


def state_to_json(state, worldsheet, params):
    doc = _header(state, worldsheet, params)
    doc.update({
        "g_real": state.g.real.tolist(),
        "g_imag": state.g.imag.tolist(),
        "J_plus": np.asarray(state.J_plus).tolist(),
        "J_minus": np.asarray(state.J_minus).tolist(),
    })
    return json.dumps(doc)


def _check_header(doc):
    if doc.get("schema") != "biyb.snapshot" or doc.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot {doc.get('schema')!r} v{doc.get('version')}")


def _meta(doc):
    ws = Worldsheet(n_sigma=doc["n_sites"], length=doc["length"], dt=doc["dt"])
    return ws, ModelParams(doc["alpha"], doc["beta"])


def state_from_json(text):
    """Inverse of :func:`state_to_json`; returns ``(state, worldsheet, params)``."""
    doc = json.loads(text)
    _check_header(doc)
    g = np.array(doc["g_real"]) + 1j * np.array(doc["g_imag"])
    state = FieldState(doc["tau"], g, np.array(doc["J_plus"], dtype=float),
                       np.array(doc["J_minus"], dtype=float))
    return (state, *_meta(doc))


def state_to_bytes(state, worldsheet, params):
    """Binary snapshot: magic, header length, JSON header, little-endian float64
    payload ``[Re g, Im g, J_+, J_-]``."""
    header = json.dumps(_header(state, worldsheet, params)).encode()
    payload = np.concatenate([state.g.real.ravel(), state.g.imag.ravel(),
                              np.ravel(state.J_plus), np.ravel(state.J_minus)])
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(payload.astype("<f8").tobytes())
    return buf.getvalue()


def state_from_bytes(data):
    if data[:4] != _MAGIC:
        raise ValueError("not a snapshot file")
    (hlen,) = struct.unpack("<I", data[4:8])
    doc = json.loads(data[8:8 + hlen].decode())
    _check_header(doc)
    values = np.frombuffer(data[8 + hlen:], dtype="<f8")
    N, n, d = doc["n_sites"], doc["n"], doc["dim"]
    sizes = [N * n * n, N * n * n, N * d, N * d]
    parts = np.split(values, np.cumsum(sizes)[:-1])
    g = (parts[0] + 1j * parts[1]).reshape(N, n, n)
    state = FieldState(doc["tau"], g, parts[2].reshape(N, d).copy(),
                       parts[3].reshape(N, d).copy())
    return (state, *_meta(doc))
