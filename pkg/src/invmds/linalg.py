"""Dense symmetric linear algebra: double centering and a deterministic top-k eigensolver.

Two solvers sit behind :func:`sym_eig_topk`:

* ``jacobi`` -- cyclic Jacobi rotations over the full matrix. Pivot pairs are
  visited in a fixed round-robin schedule so that each round is a set of
  disjoint rotations applied together.
* ``subspace`` -- block subspace iteration with Rayleigh-Ritz refinement
  (the small projected problem goes to LAPACK ``eigh``). Aimed at positive
  semidefinite matrices of low rank, where a block slightly wider than the
  rank converges in one or two products and the cost is O(n^2 k).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_distance_matrix, check_int, check_symmetric
from .exceptions import ConvergenceError, InvalidInputError, MultiplicityWarning

DEFAULT_TOL = 1e-10
MULTIPLICITY_GAP = 1e-6
JACOBI_MAX_N = 32


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Leading eigenpairs, eigenvalues descending.

    ``residual_bound`` is the largest ``||S x - lam x|| / ||S||_F`` over the
    returned pairs. ``multiplicity_warning`` is set when two leading
    eigenvalues are closer than ``1e-6 * |lam_1|``.
    """

    values: np.ndarray
    vectors: np.ndarray
    residual_bound: float
    multiplicity_warning: bool = False
    method: str = "jacobi"
    iterations: int = 0


def double_center(D):
    """``-1/2 J (D*D) J`` with ``J = I - 11^T/N``, via row/column/grand means."""
    D = check_distance_matrix(D)
    return _center_squared(D * D)


def _center_squared(D2):
    """Double-centre a symmetric squared-distance matrix in place (row means double as column means)."""
    S = np.multiply(D2, -0.5, out=D2)
    row = S.mean(axis=1)
    S -= row[:, None]
    S -= row[None, :]
    S += row.mean()
    return S


def _round_robin(m):
    """Rounds of disjoint index pairs covering every pair of ``range(m)`` once (m even)."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array([players[i] for i in range(m // 2)])
        q = np.array([players[m - 1 - i] for i in range(m // 2)])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_full(S, max_sweeps=100):
    """All eigenpairs of symmetric ``S`` (unsorted) and the number of sweeps used."""
    n = S.shape[0]
    A = np.array(S, dtype=np.float64)
    V = np.eye(n)
    if n == 1:
        return np.diag(A).copy(), V, 0
    m = n + (n % 2)
    rounds = []
    for p, q in _round_robin(m):
        keep = q < n  # drop the pairing with the phantom index
        rounds.append((p[keep], q[keep]))
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return np.zeros(n), V, 0
    target = 1e-15 * norm
    prev_off = np.inf
    sweeps = 0
    # small matrices: one block-rotation product per round beats per-column updates
    dense_rounds = n <= 64
    for sweeps in range(1, max_sweeps + 1):
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            if dense_rounds:
                J = np.eye(n)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
            else:
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = Ap * c - Aq * s
                A[:, q] = Ap * s + Aq * c
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c[:, None] * Ap - s[:, None] * Aq
                A[q, :] = s[:, None] * Ap + c[:, None] * Aq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = Vp * c - Vq * s
                V[:, q] = Vp * s + Vq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target or off >= prev_off:
            break
        prev_off = off
    return np.diag(A).copy(), V, sweeps


def _sort_desc(values, vectors):
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


def _primes(count):
    out, c = [], 2
    while len(out) < count:
        if all(c % q for q in out if q * q <= c):
            out.append(c)
        c += 1
    return out


def _deterministic_block(n, p):
    """Fixed, data-independent start block: all-ones plus Weyl-sequence columns, orthonormalized."""
    i = np.arange(1, n + 1, dtype=np.float64)[:, None]
    alphas = np.sqrt(np.array(_primes(p), dtype=np.float64))
    Q = np.mod(i * alphas[None, :], 1.0) - 0.5
    Q[:, 0] += 1.0
    return np.linalg.qr(Q)[0]


def _subspace(S, k, tol, max_iter, norm):
    n = S.shape[0]
    p = min(n, k + max(k, 6))
    Q = _deterministic_block(n, p)
    best = np.inf
    for it in range(1, max_iter + 1):
        Z = S @ Q
        T = Q.T @ Z
        T = 0.5 * (T + T.T)
        theta, W = np.linalg.eigh(T)
        theta, W = theta[::-1], W[:, ::-1]
        X = Q @ W
        SX = Z @ W
        res = np.linalg.norm(SX[:, :k] - X[:, :k] * theta[:k], axis=0) / norm
        best = min(best, float(res.max()))
        if res.max() <= tol:
            return theta, X, it
        Q = np.linalg.qr(SX)[0]
    raise ConvergenceError(
        f"subspace iteration did not converge in {max_iter} iterations (residual {best:.3e})", residual=best
    )


def sym_eig_topk(S, k, tol=DEFAULT_TOL, method="auto", max_iter=None, warn=True):
    """Top-``k`` eigenpairs of a symmetric matrix by algebraic value.

    Parameters
    ----------
    S : (n, n) array_like
        Symmetric matrix.
    k : int
        Number of eigenpairs, ``1 <= k <= n``.
    tol : float
        Required residual ``||S x - lam x|| <= tol * ||S||_F`` for each pair.
    method : {"auto", "jacobi", "subspace"}
        ``auto`` uses Jacobi up to ``JACOBI_MAX_N`` rows, subspace iteration
        above. Subspace iteration targets dominant eigenvalues, which are the
        leading ones for the positive semidefinite matrices built by
        :func:`double_center`; it falls back to Jacobi if it finds a negative
        eigenvalue dominating the block.
    max_iter : int, optional
        Iteration cap: Jacobi sweeps or subspace products. Defaults to ``100 * n``.

    Returns
    -------
    EigenDecomposition
        Eigenvector signs are whatever the solver produced.

    Raises
    ------
    ConvergenceError
        If the residual target is not met within ``max_iter``.
    """
    S = check_symmetric(S, name="matrix", rtol=1e-12)
    k = check_int(k, "k", low=1, high=S.shape[0])
    if not (tol > 0):
        raise InvalidInputError("tol must be positive")
    if method not in ("auto", "jacobi", "subspace"):
        raise InvalidInputError(f"unknown eigensolver {method!r}")
    return _eig_topk(S, k, tol, method, max_iter, warn, stacklevel=3)


def _eig_topk(S, k, tol=DEFAULT_TOL, method="auto", max_iter=None, warn=True, stacklevel=2):
    # trusted entry point: S is already a validated float64 symmetric matrix
    n = S.shape[0]
    if max_iter is None:
        max_iter = 100 * n
    norm = float(np.linalg.norm(S))
    if norm == 0.0:
        vals = np.zeros(k)
        vecs = np.eye(n)[:, :k]
        return EigenDecomposition(vals, vecs, 0.0, _near_degenerate(np.zeros(min(n, k + 1)), k), "trivial", 0)

    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_N else "subspace"
    if method == "subspace":
        theta, X, iters = _subspace(S, k, tol, max_iter, norm)
        if theta[-1] < 0 and abs(theta[-1]) > theta[k - 1]:
            method = "jacobi"
        else:
            values, vectors, spectrum = theta[:k], X[:, :k], theta
    if method == "jacobi":
        vals, vecs, iters = _jacobi_full(S, max_sweeps=max_iter)
        spectrum, vecs = _sort_desc(vals, vecs)
        values, vectors = spectrum[:k], vecs[:, :k]

    resid = np.linalg.norm(S @ vectors - vectors * values, axis=0) / norm
    bound = float(resid.max())
    if bound > tol:
        raise ConvergenceError(f"{method} eigensolver residual {bound:.3e} exceeds tol {tol:.1e}", residual=bound)
    flag = _near_degenerate(spectrum, k)
    if flag and warn:
        warnings.warn("near-degenerate leading eigenvalues; eigenvectors are not unique", MultiplicityWarning,
                      stacklevel=stacklevel)
    return EigenDecomposition(values.copy(), vectors.copy(), bound, flag, method, iters)


def _near_degenerate(spectrum, k, rel_gap=MULTIPLICITY_GAP, floor=1e-12):
    """True if some leading positive eigenvalue ``i <= k`` is within ``rel_gap`` of its successor."""
    spectrum = np.asarray(spectrum)
    if spectrum.size < 2:
        return False
    scale = abs(spectrum[0])
    if scale == 0:
        return False
    m = min(k, spectrum.size - 1)
    for i in range(m):
        if spectrum[i] <= floor * scale:
            break
        if spectrum[i] - spectrum[i + 1] < rel_gap * scale:
            return True
    return False
