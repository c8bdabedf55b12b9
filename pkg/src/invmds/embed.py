"""Similarity-invariant, distance-ratio-preserving point embeddings.

The embedding is classical MDS of the cloud's own distance matrix, with every
column rescaled by the square root of its eigenvalue over the top eigenvalue.
Pairwise row distances then equal ``dist(F_i, F_j) / sqrt(lam_1)``, and the
result no longer depends on translation, rotation, reflection or uniform
scaling of ``F`` -- except for one sign per column, handled by
:func:`canonical_sign` or :func:`sign_variants`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_distance_matrix, check_int, check_points
from .exceptions import ConfigurationError, DegenerateInputError, InvalidInputError
from .geometry import pairwise_distances
from .linalg import DEFAULT_TOL, _center_squared, _eig_topk

NEGATIVE_CLAMP = 1e-9
ZERO_EIGENVALUE = 1e-12
SIGN_TIE = 1e-9
MAX_ENUM_COLUMNS = 8


@dataclass(frozen=True, eq=False)
class InvariantEmbedding:
    """Normalized embedding ``H`` plus what is needed to interpret it.

    ``sign_mode`` is ``"raw"``, ``"canonical"`` or ``"variant:<index>"``.
    ``ambiguous_columns`` lists columns whose sign could not be fixed.
    """

    H: np.ndarray
    top_eigenvalue: float
    eigenvalues: np.ndarray
    effective_rank: int
    sign_mode: str = "raw"
    ambiguous_columns: Tuple[int, ...] = ()
    multiplicity_warning: bool = False

    @property
    def k(self):
        return self.H.shape[1]

    @property
    def scale(self):
        """Ratio between embedded and original distances, ``1 / sqrt(lam_1)``."""
        return 1.0 / np.sqrt(self.top_eigenvalue)

    @property
    def is_ambiguous(self):
        return bool(self.ambiguous_columns)

    def sidecar(self):
        return {
            "top_eigenvalue": float(self.top_eigenvalue),
            "effective_rank": int(self.effective_rank),
            "sign_mode": self.sign_mode,
            "ambiguous_columns": [int(c) for c in self.ambiguous_columns],
        }


@dataclass(frozen=True, eq=False)
class MdsEmbedding:
    H_tilde: np.ndarray
    eigenvalues: np.ndarray = field(default=None)


def similarity_matrix(D):
    D = check_distance_matrix(D)
    return -0.5 * D * D


def centered_similarity(F):
    X = check_points(F)
    return _center_squared(cdist(X, X, "sqeuclidean"))


def _spectrum(F, k, tol, method):
    X = check_points(F, min_points=2)
    n, d = X.shape
    k = d if k is None else check_int(k, "k", low=1, high=d)
    k = min(k, n)
    S = centered_similarity(X)
    if not (tol > 0):
        raise InvalidInputError("tol must be positive")
    if method not in ("auto", "jacobi", "subspace"):
        raise InvalidInputError(f"unknown eigensolver {method!r}")
    eig = _eig_topk(S, k, tol=tol, method=method, warn=False)
    lam = eig.values.copy()
    top = lam[0]
    if not top > 0:
        raise DegenerateInputError("all points coincide; the embedding is undefined")
    # tiny negatives are rounding noise on a PSD matrix; tiny positives are rank-deficiency noise
    lam[lam < -NEGATIVE_CLAMP * top] = 0.0
    lam[lam <= ZERO_EIGENVALUE * top] = 0.0
    vectors = eig.vectors
    if vectors.shape[1] < k:
        vectors = np.hstack([vectors, np.zeros((n, k - vectors.shape[1]))])
    return lam, vectors, eig.multiplicity_warning, k


def classical_mds(F, k=None, tol=DEFAULT_TOL, method="auto"):
    """Classical MDS coordinates ``X sqrt(Lambda)`` in the units of ``F``."""
    lam, X, _, _ = _spectrum(F, k, tol, method)
    return MdsEmbedding(X * np.sqrt(lam), lam)


def tinv_embed(F, k=None, tol=DEFAULT_TOL, method="auto"):
    """Embed a cloud as ``X sqrt(Lambda / lam_1)`` with raw eigenvector signs.

    ``k`` defaults to the coordinate dimension. Columns for zero eigenvalues
    are kept as exact zeros so all clouds of one dataset share a shape.
    """
    lam, X, flag, k = _spectrum(F, k, tol, method)
    top = lam[0]
    H = X * np.sqrt(lam / top)
    H[:, lam == 0.0] = 0.0
    return InvariantEmbedding(
        H=H,
        top_eigenvalue=float(top),
        eigenvalues=lam,
        effective_rank=int(np.count_nonzero(lam)),
        sign_mode="raw",
        multiplicity_warning=bool(flag),
    )


def _column_sign(col, rule):
    """+1 / -1 to apply to ``col``, or 0 when the rule cannot decide."""
    norm = np.linalg.norm(col)
    if norm == 0.0:
        return 1
    total = col.sum()
    if abs(total) >= SIGN_TIE * norm:
        return 1 if total > 0 else -1
    if rule == "sum":
        return 0
    # centred columns always sum to zero; fall back to the third moment
    cubic = np.sum(col**3)
    if abs(cubic) >= SIGN_TIE * np.sum(np.abs(col) ** 3):
        return 1 if cubic > 0 else -1
    return 0


def canonical_sign(E, rule="sum_then_cubic"):
    """Fix each column's sign so its entries sum to a positive value.

    ``rule="sum"`` applies exactly that test. Because the centred similarity
    matrix annihilates the all-ones vector, every nonzero embedding column
    sums to zero up to rounding, so on real embeddings ``"sum"`` flags every
    column as ambiguous. The default ``"sum_then_cubic"`` breaks such ties with
    the sign of the sum of cubes. Columns neither test can decide are left
    as they are and listed in ``ambiguous_columns``. Idempotent.
    """
    if rule not in ("sum", "sum_then_cubic"):
        raise ConfigurationError(f"unknown sign rule {rule!r}")
    H = np.array(E.H, dtype=np.float64)
    ambiguous = []
    for j in range(H.shape[1]):
        s = _column_sign(H[:, j], rule)
        if s == 0:
            ambiguous.append(j)
        elif s < 0:
            H[:, j] = -H[:, j]
    return replace(E, H=H, sign_mode="canonical", ambiguous_columns=tuple(ambiguous))


def sign_variants(E):
    """All ``2**k`` column-sign flips; bit ``i`` of the index flips column ``i``."""
    if E.sign_mode.startswith("variant"):
        raise InvalidInputError("sign_variants expects a raw or canonical embedding")
    k = E.H.shape[1]
    if k > MAX_ENUM_COLUMNS:
        raise ConfigurationError(f"refusing to enumerate 2**{k} sign variants (limit k <= {MAX_ENUM_COLUMNS})")
    out = []
    for idx in range(2**k):
        flips = np.array([-1.0 if (idx >> i) & 1 else 1.0 for i in range(k)])
        out.append(replace(E, H=E.H * flips, sign_mode=f"variant:{idx}"))
    return out


def select_sign(E, sign="canonical"):
    """Raw or canonical embedding; an ambiguous canonical column keeps its raw sign."""
    if sign == "raw":
        return E
    if sign == "canonical":
        return canonical_sign(E)
    raise ConfigurationError(f"unknown sign mode {sign!r}")


def mean_frobenius(Hs):
    Hs = [getattr(H, "H", H) for H in Hs]
    if not Hs:
        raise ConfigurationError("cannot compute a Frobenius constant from an empty batch")
    return float(np.mean([np.linalg.norm(H) for H in Hs]))


def frobenius_normalize(batch, training_mean_fro):
    """Divide every embedding by a constant computed once on the training split."""
    if not (training_mean_fro > 0) or not np.isfinite(training_mean_fro):
        raise ConfigurationError("training Frobenius constant must be positive and finite")
    out = []
    for E in batch:
        if isinstance(E, InvariantEmbedding):
            out.append(replace(E, H=E.H / training_mean_fro))
        else:
            out.append(np.asarray(E, dtype=np.float64) / training_mean_fro)
    return out


def verify_distance_preservation(F, E, eps=1e-12):
    """Worst relative violation of ``dist(H_i, H_j) = c' dist(F_i, F_j)`` and ``c'``.

    The error for each pair is ``|dist(H) - c' dist(F)| / max(c' dist(F), eps)``.
    """
    X = check_points(F)
    H = getattr(E, "H", E)
    if H.shape[0] != X.shape[0]:
        raise InvalidInputError("embedding and cloud have different numbers of points")
    c = 1.0 / np.sqrt(E.top_eigenvalue)
    if X.shape[0] < 2:
        return 0.0, c
    DF = pairwise_distances(X)
    DH = pairwise_distances(H)
    iu = np.triu_indices(X.shape[0], 1)
    target = c * DF[iu]
    err = np.abs(DH[iu] - target) / np.maximum(target, eps)
    return float(err.max()), float(c)


def match_up_to_sign(A, B):
    """Per-column max abs difference after choosing the better of ``+B`` and ``-B``."""
    A = np.asarray(A)
    B = np.asarray(B)
    plus = np.max(np.abs(A - B), axis=0, initial=0.0)
    minus = np.max(np.abs(A + B), axis=0, initial=0.0)
    return np.minimum(plus, minus)


class InvariantMDS(TransformerMixin, BaseEstimator):
    """Per-cloud invariant embedding in scikit-learn form.

    ``fit(X)`` embeds one ``(N, d)`` cloud; ``fit_transform`` returns the
    ``(N, n_components)`` embedding. Fitted attributes mirror
    :class:`sklearn.manifold.MDS`: ``embedding_``, ``eigenvalues_``,
    ``top_eigenvalue_``, ``ambiguous_columns_``.

    Parameters
    ----------
    n_components : int or None
        Embedding width; ``None`` uses the coordinate dimension.
    sign : {"canonical", "raw"}
    tol : float
        Eigensolver residual tolerance.
    eigen_solver : {"auto", "jacobi", "subspace"}
    """

    def __init__(self, n_components=None, sign="canonical", tol=DEFAULT_TOL, eigen_solver="auto"):
        self.n_components = n_components
        self.sign = sign
        self.tol = tol
        self.eigen_solver = eigen_solver

    def fit(self, X, y=None):
        E = select_sign(tinv_embed(X, self.n_components, self.tol, self.eigen_solver), self.sign)
        self.result_ = E
        self.embedding_ = E.H
        self.eigenvalues_ = E.eigenvalues
        self.top_eigenvalue_ = E.top_eigenvalue
        self.effective_rank_ = E.effective_rank
        self.ambiguous_columns_ = E.ambiguous_columns
        self.multiplicity_warning_ = E.multiplicity_warning
        self.n_features_in_ = check_points(X).shape[1]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        # the embedding is intrinsic to each cloud; nothing carries over from fit
        check_is_fitted(self, "embedding_")
        return select_sign(tinv_embed(X, self.n_components, self.tol, self.eigen_solver), self.sign).H


class FrobeniusScaler(TransformerMixin, BaseEstimator):
    """Scale a list of embeddings by the mean Frobenius norm of the fitting batch."""

    def fit(self, X, y=None):
        self.mean_fro_ = mean_frobenius(X)
        if not self.mean_fro_ > 0:
            raise ConfigurationError("training embeddings are all zero")
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_fro_")
        return frobenius_normalize(X, self.mean_fro_)
