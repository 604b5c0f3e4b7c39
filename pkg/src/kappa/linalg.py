"""Dense real linear algebra kernels.

Determinants come in two independent flavours: LU (library-backed, the
oracle) and pivotal condensation (the recursive scheme the curvature
formulas are built around).  The rest is small-matrix plumbing: inversion
with a singularity guard, deterministic orthonormal complements, and a
Cholesky+Jacobi generalized symmetric eigensolver.  Everything here targets
matrices of order <= ~12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LinalgError(ValueError):
    pass


class SingularMatrixError(LinalgError):
    def __init__(self, determinant):
        super().__init__(f"matrix is numerically singular (det = {determinant:.6e})")
        self.determinant = determinant


class NotSPDError(LinalgError):
    def __init__(self, pivot, index):
        super().__init__(
            f"matrix is not positive definite (Cholesky pivot {pivot:.6e} at index {index})"
        )
        self.pivot = pivot
        self.index = index


class PivotFailureError(LinalgError):
    def __init__(self, level):
        super().__init__(f"condensation pivot vanished at level {level} of a nonzero matrix")
        self.level = level


class RankDeficientError(LinalgError):
    pass


def _as_square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError("matrix has non-finite entries")
    return a


def det_lu(a):
    """Determinant via partially pivoted LU (LAPACK); sign is exact."""
    a = _as_square(a)
    return float(np.linalg.det(a))


def det_chio(a, pivot="max-abs"):
    """Determinant by recursive pivotal condensation.

    Each step picks a nonzero pivot a_pq, swaps it to the (0, 0) corner
    (tracking the sign), condenses the n x n matrix to (n-1) x (n-1) with
    entries a_00*a_ij - a_i0*a_0j, and divides the remaining determinant by
    a_00^(n-2).  ``pivot`` is "max-abs" or a fixed (row, col) pair applied
    at every level.
    """
    a = _as_square(a).copy()
    n = a.shape[0]
    if n < 2:
        return float(a[0, 0])
    sign = 1.0
    divisor = 1.0
    level = 0
    while a.shape[0] > 1:
        m = a.shape[0]
        if pivot == "max-abs":
            p, q = np.unravel_index(np.argmax(np.abs(a)), a.shape)
        else:
            p, q = pivot
            if not (0 <= p < m and 0 <= q < m):
                raise LinalgError(f"fixed pivot {pivot} out of range at level {level}")
        if a[p, q] == 0.0:
            if not np.any(a):
                return 0.0
            raise PivotFailureError(level)
        if p != 0:
            a[[0, p]] = a[[p, 0]]
            sign = -sign
        if q != 0:
            a[:, [0, q]] = a[:, [q, 0]]
            sign = -sign
        piv = a[0, 0]
        a = piv * a[1:, 1:] - np.outer(a[1:, 0], a[0, 1:])
        divisor *= piv ** (m - 2)
        level += 1
    return float(sign * a[0, 0] / divisor)


def invert(a):
    """Inverse with a scaled singularity guard (1e-12 * matrix norm)."""
    a = _as_square(a)
    det = det_lu(a)
    if abs(det) <= 1e-12 * max(1.0, float(np.linalg.norm(a))):
        raise SingularMatrixError(det)
    return np.linalg.inv(a)


def complement_with_order(tangents, candidates=None, count=None):
    """Orthonormal complement of the span of ``tangents`` columns.

    Candidates (default: identity columns) are adjoined one at a time by a
    pivoted modified Gram-Schmidt: at every step the candidate with the
    largest residual norm wins, ties broken by lowest candidate index.
    ``count`` caps how many complement vectors are extracted (default: up to
    the full dimension; pass the candidate-span codimension when the
    candidates span a proper subspace).  Returns (complement columns,
    accepted candidate indices) so callers can replay the same elimination
    order in other arithmetic (jets).
    """
    t = np.asarray(tangents, dtype=float)
    if t.ndim != 2:
        raise LinalgError("tangent block must be a 2-d array of column vectors")
    dim, m = t.shape
    if candidates is None:
        candidates = np.eye(dim)
    else:
        candidates = np.asarray(candidates, dtype=float)
    want = (dim - m) if count is None else int(count)
    if want < 0 or (count is None and want == 0):
        raise LinalgError(f"no complement: {m} columns in dimension {dim}")

    basis = []
    for k in range(m):
        v = t[:, k].copy()
        for b in basis:
            v -= (b @ v) * b
        nrm = np.linalg.norm(v)
        if nrm <= 1e-10 * (1.0 + np.linalg.norm(t[:, k])):
            raise RankDeficientError(f"tangent column {k} is linearly dependent")
        basis.append(v / nrm)

    chosen = []
    remaining = list(range(candidates.shape[1]))
    while len(chosen) < want:
        best_idx, best_norm, best_vec = -1, -1.0, None
        for idx in remaining:
            v = candidates[:, idx].copy()
            for b in basis:
                v -= (b @ v) * b
            nrm = np.linalg.norm(v)
            if nrm > best_norm + 1e-15:
                best_idx, best_norm, best_vec = idx, nrm, v
        if best_idx < 0 or best_norm <= 1e-10:
            raise RankDeficientError("candidate set cannot complete the complement")
        basis.append(best_vec / best_norm)
        chosen.append(best_idx)
        remaining.remove(best_idx)
    comp = np.column_stack(basis[m:]) if basis[m:] else np.zeros((dim, 0))
    return comp, chosen


def orthonormal_complement(tangents, candidates=None):
    """Columns spanning the orthogonal complement; see complement_with_order."""
    comp, _ = complement_with_order(tangents, candidates)
    return comp


def cholesky_lower(b):
    """Lower Cholesky factor; raises NotSPDError naming the failing pivot."""
    b = _as_square(b)
    n = b.shape[0]
    scale = max(1.0, float(np.max(np.abs(b))))
    lower = np.zeros_like(b)
    for j in range(n):
        d = b[j, j] - lower[j, :j] @ lower[j, :j]
        if d <= 1e-14 * scale:
            raise NotSPDError(d, j)
        lower[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            lower[i, j] = (b[i, j] - lower[i, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def _jacobi_eigh(c, max_sweeps=64):
    """Cyclic Jacobi for a symmetric matrix; returns (values, vectors)."""
    a = c.copy()
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= 1e-15 * max(1.0, np.max(np.abs(np.diag(a)))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * max(1.0, abs(a[p, p]) + abs(a[q, q])):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * cs
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = cs
                rot[p, q] = sn
                rot[q, p] = -sn
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(vals)
    return vals[order], v[:, order]


@dataclass
class Spectrum:
    """Eigen-decomposition with tolerance-grouped multiplicities."""

    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, B-orthonormal for the generalized problem
    groups: list  # list of index lists, one per distinct eigenvalue

    @property
    def multiplicities(self):
        return [len(g) for g in self.groups]

    @property
    def distinct_values(self):
        return [float(np.mean(self.values[g])) for g in self.groups]


def _group(values, tol):
    groups = []
    for i, v in enumerate(values):
        if groups and v - values[groups[-1][0]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def sym_gen_eig(a, b, group_tol=1e-7):
    """Solve A v = lambda B v for symmetric A and SPD B.

    Reduction: B = L L^T, C = L^{-1} A L^{-T}, Jacobi on C, eigenvectors
    mapped back through L^{-T} (hence B-orthonormal).  Eigenvalues ascend;
    multiplicities are grouped at ``group_tol * max|lambda|``.
    """
    a = _as_square(a)
    b = _as_square(b)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise LinalgError("matrix A is not symmetric within 1e-10")
    lower = cholesky_lower(b)
    # C = L^-1 A L^-T via two triangular solves
    y = np.linalg.solve(lower, a)
    c = np.linalg.solve(lower, y.T).T
    c = 0.5 * (c + c.T)
    vals, vecs = _jacobi_eigh(c)
    back = np.linalg.solve(lower.T, vecs)
    tol = group_tol * max(np.max(np.abs(vals)), 1e-300)
    return Spectrum(values=vals, vectors=back, groups=_group(vals, tol))
