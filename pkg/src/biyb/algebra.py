"""Cartan-Weyl machinery for su(n) and the canonical Yang-Baxter operator.

Elements of the compact algebra ``su(n)`` (and of its complexification
``sl(n, C)``) are stored as coefficient vectors over a fixed real basis::

    T^mu = i H^mu,
    B^a  = i (E^a + E^-a) / sqrt(2),
    C^a  = (E^a - E^-a) / sqrt(2),

ordered as all ``T`` first and then ``(B, C)`` pairs, one pair per positive
root ``e_i - e_j`` (``i < j``) in lexicographic order.  The Cartan
generators ``H^mu`` are the real traceless diagonal matrices orthonormal for
the trace form, so the basis is orthonormal for ``-Tr(XY)``.  Real
coefficient vectors describe ``su(n)``; complex ones describe ``sl(n, C)``.
Every function here broadcasts over leading axes.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import BasisMismatchError, ConsistencyError, InvalidDimensionError

__all__ = [
    "CartanWeylBasis",
    "build_cartan_weyl",
    "canonical_R",
    "mybe_residual",
    "r_bracket",
    "jacobi_residual",
]


@dataclass(frozen=True, eq=False)
class CartanWeylBasis:
    """Real basis of su(n) built from the Cartan-Weyl basis of sl(n, C).

    Attributes
    ----------
    n : int
        Degree of the special unitary group.
    matrices : ndarray, shape (n*n - 1, n, n)
        The basis matrices, anti-Hermitian and traceless.
    cartan : ndarray, shape (n - 1, n, n)
        Hermitian Cartan generators ``H^mu``.
    positive_roots : list of tuple
        ``(i, j)`` with ``i < j`` labelling the root ``e_i - e_j``.
    step_generators : ndarray, shape (n_roots, 2, n, n)
        ``E^a`` (matrix unit ``E_ij``) and ``E^-a`` (``E_ji``) per root.
    structure_constants : ndarray, shape (d, d, d)
        ``[b_i, b_j] = f[i, j, k] b_k``.
    """

    n: int
    matrices: np.ndarray
    cartan: np.ndarray
    positive_roots: list
    step_generators: np.ndarray
    structure_constants: np.ndarray
    family: str = "su"

    @property
    def dim(self):
        return self.matrices.shape[0]

    @property
    def rank(self):
        return self.n - 1

    @property
    def basis_id(self):
        return f"{self.family}({self.n})"

    @property
    def cartan_slice(self):
        return slice(0, self.rank)

    def b_index(self, root):
        """Position of ``B^a`` for the ``root``-th positive root."""
        return self.rank + 2 * root

    def c_index(self, root):
        return self.rank + 2 * root + 1

    def check(self, *arrays):
        for a in arrays:
            if np.shape(a)[-1:] != (self.dim,):
                raise BasisMismatchError(
                    f"coefficient vector of length {np.shape(a)[-1:]} does not "
                    f"belong to {self.basis_id} (dimension {self.dim})")

    # -- coordinates ---------------------------------------------------------

    def to_matrix(self, coeffs):
        """Matrix ``sum_i c_i b_i`` for real or complex coefficients."""
        coeffs = np.asarray(coeffs)
        self.check(coeffs)
        return np.tensordot(coeffs, self.matrices, axes=([-1], [0]))

    def coefficients(self, matrix, real=False, atol=None):
        """Coefficients of a traceless matrix in the basis.

        With ``real=True`` the imaginary part is checked against ``atol``
        (default 1e-10 relative to the matrix size) and dropped.  With
        ``atol`` given, the traceless part is also checked to be
        reproduced exactly.
        """
        matrix = np.asarray(matrix)
        c = -np.einsum("kab,...ba->...k", self.matrices, matrix)
        if atol is not None:
            scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
            rebuilt = self.to_matrix(c)
            if np.max(np.abs(rebuilt - matrix), initial=0.0) > atol * scale:
                raise ConsistencyError(
                    "matrix does not lie in the span of the basis")
        if real:
            tol = 1e-10 if atol is None else atol
            scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
            if np.max(np.abs(c.imag), initial=0.0) > tol * scale:
                raise ConsistencyError("element is not in the compact real form")
            return c.real.copy()
        return c

    # -- forms and brackets -------------------------------------------------

    def inner(self, x, y):
        """Trace form ``Tr(XY)`` (negative definite on su(n))."""
        self.check(x, y)
        return -np.sum(np.asarray(x) * np.asarray(y), axis=-1)

    def bracket(self, x, y):
        self.check(x, y)
        return np.einsum("...i,...j,ijk->...k", x, y, self.structure_constants)

    def to_json(self):
        return json.dumps({
            "family": self.family,
            "n": self.n,
            "basis": [
                {"real": m.real.tolist(), "imag": m.imag.tolist()}
                for m in self.matrices
            ],
            "positive_roots": [list(r) for r in self.positive_roots],
        })


def _cartan_generators(n):
    hs = []
    for k in range(1, n):
        d = np.zeros(n)
        d[:k] = 1.0
        d[k] = -k
        hs.append(np.diag(d / np.sqrt(k * (k + 1))))
    return np.array(hs, dtype=complex)


def build_cartan_weyl(n):
    """Build the ordered real basis of su(n) described in the module docs."""
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"su(n) needs an integer n >= 2, got {n!r}")
    n = int(n)
    cartan = _cartan_generators(n)
    roots = [(i, j) for i in range(n) for j in range(i + 1, n)]
    steps = np.zeros((len(roots), 2, n, n), dtype=complex)
    mats = [1j * h for h in cartan]
    s = 1.0 / np.sqrt(2.0)
    for r, (i, j) in enumerate(roots):
        steps[r, 0, i, j] = 1.0
        steps[r, 1, j, i] = 1.0
        e_pos, e_neg = steps[r]
        mats.append(1j * s * (e_pos + e_neg))
        mats.append(s * (e_pos - e_neg))
    mats = np.array(mats)

    comm = (np.einsum("iab,jbc->ijac", mats, mats)
            - np.einsum("jab,ibc->ijac", mats, mats))
    f = -np.einsum("kab,ijba->ijk", mats, comm)
    if np.max(np.abs(f.imag)) > 1e-12:
        raise ConsistencyError("structure constants are not real")
    f = f.real
    rebuilt = np.einsum("ijk,kab->ijab", f, mats)
    if np.max(np.abs(rebuilt - comm)) > 1e-12:
        raise ConsistencyError("basis is not closed under the bracket")
    return CartanWeylBasis(n=n, matrices=mats, cartan=cartan,
                           positive_roots=roots, step_generators=steps,
                           structure_constants=f)


def canonical_R(basis):
    """Matrix of ``R T = 0, R B^a = C^a, R C^a = -B^a`` acting on coefficients."""
    R = np.zeros((basis.dim, basis.dim))
    for r in range(len(basis.positive_roots)):
        b, c = basis.b_index(r), basis.c_index(r)
        R[c, b] = 1.0
        R[b, c] = -1.0
    return R


def _apply(op, x):
    return np.einsum("...ij,...j->...i", op, x)


def mybe_residual(basis, R, x, y):
    """``[RX, RY] - R([RX, Y] + [X, RY]) - [X, Y]``."""
    Rx, Ry = _apply(R, x), _apply(R, y)
    return (basis.bracket(Rx, Ry)
            - _apply(R, basis.bracket(Rx, y) + basis.bracket(x, Ry))
            - basis.bracket(x, y))


def r_bracket(basis, R, x, y):
    """The second bracket ``[X, Y]_R = [RX, Y] + [X, RY]``."""
    return basis.bracket(_apply(R, x), y) + basis.bracket(x, _apply(R, y))


def jacobi_residual(bracket, x, y, z):
    """Cyclic Jacobi sum for an arbitrary bilinear ``bracket(x, y)``."""
    return (bracket(x, bracket(y, z)) + bracket(y, bracket(z, x))
            + bracket(z, bracket(x, y)))
