"""Group-level operations: exponential, adjoint action, Iwasawa factorization.

Group elements are plain ``(..., n, n)`` complex arrays.  The Iwasawa
factorization is ``l = b u`` with ``b`` in AN (upper triangular, positive
real diagonal, unit determinant) and ``u`` special unitary.
"""

import logging

import numpy as np
import scipy.linalg

from .errors import ConditioningError, SubspaceError

logger = logging.getLogger(__name__)

__all__ = [
    "exp_map",
    "adjoint_matrix",
    "adjoint_action",
    "dressed_R",
    "unitarity_defect",
    "reproject_unitary",
    "iwasawa",
    "iwasawa_gram_schmidt",
    "an_defect",
    "r_minus_i",
    "lie_an_residual",
    "invert_R_minus_i",
    "iwasawa_split",
    "random_special_unitary",
    "random_sl",
]


def exp_map(basis, x):
    """Matrix exponential of the algebra element with coefficients ``x``."""
    return scipy.linalg.expm(basis.to_matrix(x))


def adjoint_matrix(basis, g, g_inv=None):
    """Matrix of ``X -> g X g^-1`` on coefficient vectors.

    Real orthogonal for unitary ``g``; complex for elements of SL(n, C).
    """
    g = np.asarray(g)
    if g_inv is None:
        g_inv = np.linalg.inv(g)
    conj = np.einsum("...ab,jbc,...cd->...jad", g, basis.matrices, g_inv)
    ad = -np.einsum("kda,...jad->...kj", basis.matrices, conj)
    if np.iscomplexobj(g) and np.max(np.abs(ad.imag), initial=0.0) < 1e-13 * max(
            1.0, float(np.max(np.abs(ad.real), initial=0.0))):
        ad = ad.real
    return ad


def adjoint_action(basis, g, x):
    """Coefficients of ``g X g^-1``."""
    return np.einsum("...ij,...j->...i", adjoint_matrix(basis, g), x)


def dressed_R(basis, R, g):
    """``R_g = Ad_{g^-1} R Ad_g`` as a coefficient matrix (batched over g)."""
    g = np.asarray(g)
    g_inv = np.linalg.inv(g)
    ad = adjoint_matrix(basis, g, g_inv)
    ad_inv = adjoint_matrix(basis, g_inv, g)
    return ad_inv @ R @ ad


def unitarity_defect(g):
    """Max over sites of ``max(|g g^+ - 1|, |det g - 1|)``."""
    g = np.asarray(g)
    n = g.shape[-1]
    gram = g @ np.conj(np.swapaxes(g, -1, -2)) - np.eye(n)
    det = np.linalg.det(g) - 1.0
    return float(max(np.max(np.abs(gram), initial=0.0),
                     np.max(np.abs(det), initial=0.0)))


def reproject_unitary(g):
    """Nearest special unitary matrix (polar factor, determinant phase removed)."""
    U, _, Vh = np.linalg.svd(g)
    u = U @ Vh
    n = g.shape[-1]
    phase = np.linalg.det(u) ** (1.0 / n)
    return u / phase[..., None, None]


def iwasawa(l, cond_cap=1e8):
    """Factor ``l = b u`` with ``b`` in AN and ``u`` in SU(n).

    ``b`` is the upper-triangular factor of ``l l^+ = b b^+`` with positive
    diagonal (a Cholesky factorization of the index-reversed matrix), then
    ``u = b^-1 l``.  Works on stacks of matrices.

    Raises
    ------
    ConditioningError
        If any ``l`` has condition number above ``cond_cap`` or a
        determinant far from one.
    """
    l = np.asarray(l, dtype=complex)
    cond = np.linalg.cond(l)
    if not np.all(np.isfinite(cond)) or np.max(cond, initial=0.0) > cond_cap:
        worst = np.unravel_index(np.nanargmax(np.where(np.isfinite(cond), cond, np.inf)),
                                 cond.shape) if cond.ndim else ()
        raise ConditioningError(
            f"Iwasawa factorization refused: condition number "
            f"{np.max(cond):.3e} exceeds cap {cond_cap:.1e} at index {worst}")
    det = np.linalg.det(l)
    if np.max(np.abs(det - 1.0), initial=0.0) > 1e-8:
        raise ConditioningError(
            f"Iwasawa factorization needs det l = 1, got deviation "
            f"{np.max(np.abs(det - 1.0)):.3e}")
    gram = l @ np.conj(np.swapaxes(l, -1, -2))
    flipped = gram[..., ::-1, ::-1]
    lower = np.linalg.cholesky(flipped)
    b = lower[..., ::-1, ::-1]
    u = np.linalg.solve(b, l)
    return b, u


def iwasawa_gram_schmidt(l):
    """Reference Iwasawa factorization by Gram-Schmidt on the rows of ``l``.

    Rows are orthonormalized from the last one upwards, which produces the
    upper-triangular factor directly.  Slow; meant as an independent check.
    """
    l = np.asarray(l, dtype=complex)
    if l.ndim > 2:
        pairs = [iwasawa_gram_schmidt(m) for m in l.reshape(-1, *l.shape[-2:])]
        b = np.array([p[0] for p in pairs]).reshape(l.shape)
        u = np.array([p[1] for p in pairs]).reshape(l.shape)
        return b, u
    n = l.shape[0]
    b = np.zeros((n, n), dtype=complex)
    u = np.zeros((n, n), dtype=complex)
    for i in range(n - 1, -1, -1):
        v = l[i].copy()
        for j in range(i + 1, n):
            b[i, j] = np.vdot(u[j], v)
            v = v - b[i, j] * u[j]
        b[i, i] = np.linalg.norm(v)
        u[i] = v / b[i, i]
    return b, u


def an_defect(b):
    """Distance of ``b`` from AN: lower part, diagonal phase, det and positivity."""
    b = np.asarray(b)
    lower = np.tril(b, -1)
    diag = np.diagonal(b, axis1=-2, axis2=-1)
    return float(max(
        np.max(np.abs(lower), initial=0.0),
        np.max(np.abs(diag.imag), initial=0.0),
        np.max(np.abs(np.prod(diag, axis=-1) - 1.0), initial=0.0),
        np.max(np.maximum(-diag.real, 0.0), initial=0.0),
    ))


# -- the map (R - i) from su(n) onto Lie(AN) --------------------------------


def r_minus_i(R, x):
    """Complex coefficients of ``(R - i) X`` for real ``X``."""
    return np.einsum("ij,...j->...i", R, x) - 1j * np.asarray(x)


def lie_an_residual(R, xi):
    """Norm of the component of ``xi`` outside the image of ``(R - i)``.

    Writing ``xi = (R - i) k`` forces ``k = -Im xi`` and then
    ``Re xi + R Im xi = 0``; the residual is the max-norm of the latter.
    """
    xi = np.asarray(xi)
    miss = xi.real + np.einsum("ij,...j->...i", R, xi.imag)
    return np.max(np.abs(miss), axis=-1, initial=0.0)


def invert_R_minus_i(R, xi, tol=1e-10):
    """Real ``K`` with ``(R - i) K = xi``.

    Raises
    ------
    SubspaceError
        If ``xi`` is further than ``tol`` (relative) from the image.
    """
    xi = np.asarray(xi, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(xi), initial=0.0)))
    res = float(np.max(lie_an_residual(R, xi), initial=0.0))
    if res > tol * scale:
        raise SubspaceError(
            f"element lies outside Lie(AN): membership residual {res:.3e}")
    return -xi.imag.copy()


def iwasawa_split(R, z):
    """Split ``z`` in sl(n, C) as ``(R - i) k + w`` with ``k, w`` in su(n).

    Returns ``(k, w)``; ``(R - i) k`` is the Lie(AN) part and ``w`` the
    compact part.
    """
    z = np.asarray(z, dtype=complex)
    k = -z.imag
    w = z.real + np.einsum("ij,...j->...i", R, z.imag)
    return k, w


def random_special_unitary(n, rng, size=None):
    """Haar-random SU(n) matrices."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    z = (rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n)))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    return q / (np.linalg.det(q) ** (1.0 / n))[..., None, None]


def random_sl(n, rng, size=None, scale=1.0):
    """Random SL(n, C) matrices as exponentials of random sl(n, C) elements."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    z = scale * (rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n)))
    tr = np.trace(z, axis1=-2, axis2=-1) / n
    z = z - tr[..., None, None] * np.eye(n)
    return scipy.linalg.expm(z)
