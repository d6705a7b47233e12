"""
Algebra tour
============

Build the real Cartan-Weyl basis of su(n), the canonical R-matrix, and check
the identities the rest of the package relies on.
"""

# %%
# The basis
# ---------
# Cartan generators come first, then one (B, C) pair per positive root.  The
# basis is orthonormal for the negative trace form.
import numpy as np

from biyb.algebra import build_cartan_weyl, canonical_R, mybe_residual, r_bracket, jacobi_residual
from biyb.group import dressed_R, iwasawa, random_sl, random_special_unitary

basis = build_cartan_weyl(3)
print("dim su(3) =", basis.dim)
gram = -np.real(np.einsum("aij,bji->ab", basis.matrices, basis.matrices))
print("Gram matrix is the identity:", np.allclose(gram, np.eye(basis.dim)))

# %%
# The R-matrix
# ------------
# R kills the Cartan part and rotates each (B, C) pair by a quarter turn.
R = canonical_R(basis)
print("R^3 + R =", np.abs(R @ R @ R + R).max())

rng = np.random.default_rng(0)
x, y, z = rng.normal(size=(3, 50, basis.dim))
print("mYBE residual of R      :", np.abs(mybe_residual(basis, R, x, y)).max())
R_g = dressed_R(basis, R, random_special_unitary(3, rng))
print("mYBE residual of Ad-R   :", np.abs(mybe_residual(basis, R_g, x, y)).max())
jac = jacobi_residual(lambda a, b: r_bracket(basis, R, a, b), x, y, z)
print("Jacobi residual of [,]_R:", np.abs(jac).max())

# %%
# A wrong R fails
# ---------------
# Taking absolute values of the entries destroys the rotation structure.
print("mYBE residual of |R|    :", np.abs(mybe_residual(basis, np.abs(R), x, y)).max())

# %%
# Iwasawa factorization
# ---------------------
# Every l in SL(3, C) splits as l = b u with b upper triangular (positive
# diagonal) and u special unitary.
ls = random_sl(3, rng, 5, scale=0.5)
b, u = iwasawa(ls)
print("round trip:", np.abs(b @ u - ls).max())
print("b lower part:", np.abs(np.tril(b, -1)).max())
print("u unitarity:", np.abs(u @ np.conj(np.swapaxes(u, -1, -2)) - np.eye(3)).max())
