"""Kernel PCA and the closed-form optimum of the unregularized linear 2-layer K2AE."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from kae.errors import RankError
from kae.kernels import validate_gram

RANK_TOL = 1e-12


@dataclass
class SpectralDecomposition:
    """Eigenpairs of a Gram matrix, eigenvalues non-increasing.

    Attributes
    ----------
    eigvals : ndarray, shape (n,)
        Clipped at zero.
    eigvecs : ndarray, shape (n, n)
        Orthonormal columns; each column's largest-magnitude entry is
        non-negative (first such entry on ties).
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray

    @classmethod
    def of(cls, k):
        w, U = linalg.eigh(k)
        # stable sort keeps index order inside tied eigenvalues
        order = np.argsort(-w, kind="stable")
        w = np.clip(w[order], 0.0, None)
        U = U[:, order]
        pivot = np.argmax(np.abs(U), axis=0)
        signs = np.where(U[pivot, np.arange(U.shape[1])] < 0, -1.0, 1.0)
        return cls(w, U * signs)

    def rank(self, tol=RANK_TOL):
        if self.eigvals.size == 0 or self.eigvals[0] <= 0:
            return 0
        return int(np.sum(self.eigvals > tol * self.eigvals[0]))

    def check_components(self, p):
        r = self.rank()
        if int(p) != p or p < 1 or p > r:
            raise RankError(f"requested {p} components but the numerical rank is {r}")


def center_gram(k):
    """Double centering ``H K H`` with ``H = I - 11^T / n``."""
    k = np.asarray(k, dtype=np.float64)
    row = k.mean(axis=0)
    return k - row[None, :] - row[:, None] + row.mean()


def kpca(k, p, center=False):
    """Kernel PCA codes ``(s_1 u_1, ..., s_p u_p)`` with ``s_i = sqrt(eigval_i)``.

    Parameters
    ----------
    k : ndarray, shape (n, n)
        Valid Gram matrix.
    p : int
        Number of components, at most the numerical rank.
    center : bool
        Double-center ``k`` before the decomposition.

    Raises
    ------
    RankError
        If ``p`` exceeds the number of eigenvalues above ``1e-12 * eigval_1``.
    """
    k = validate_gram(k)
    if center:
        k = center_gram(k)
    dec = SpectralDecomposition.of(k)
    dec.check_components(p)
    return dec.eigvecs[:, :p] * np.sqrt(dec.eigvals[:p])


def k2ae_linear_closed_form(k, p):
    """Optimal codes and distortion of the unregularized linear 2-layer K2AE.

    Returns
    -------
    codes : ndarray, shape (n, p)
        Column ``i`` is ``eigval_i^(1/4) u_i``.
    distortion : float
        ``sum_{i > p} eigval_i``, the rank-``p`` truncation error.
    """
    k = validate_gram(k)
    dec = SpectralDecomposition.of(k)
    dec.check_components(p)
    codes = dec.eigvecs[:, :p] * dec.eigvals[:p] ** 0.25
    return codes, float(np.sum(dec.eigvals[p:]))
