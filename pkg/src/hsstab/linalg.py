"""Dense complex matrix kernel.

Matrices are plain ``numpy.ndarray`` objects of complex dtype. The metric
used throughout the package is the normalized Hilbert-Schmidt norm
``||a||_2 = sqrt(tr(a* a) / n)``, for which every unitary has norm one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from hsstab.errors import EigensolverError, NotNormalError, NotUnitaryError

#: Default tolerance for unitarity of user-supplied matrices.
INPUT_TOL = 1e-8
#: Default tolerance for matrices synthesized by this package.
OUTPUT_TOL = 1e-12

TWO_PI = 2.0 * math.pi


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def normalized_trace(a) -> complex:
    a = as_matrix(a)
    return complex(np.trace(a) / a.shape[0])


def hs_norm(a) -> float:
    """Normalized Hilbert-Schmidt norm, ``sqrt(tr(a* a) / n)``."""
    a = np.asarray(a)
    n = a.shape[0]
    return float(np.sqrt(np.vdot(a, a).real / n))


def hs_distance(a, b) -> float:
    return hs_norm(np.asarray(a) - np.asarray(b))


def principal_arg(z):
    """Argument in ``(-pi, pi]``.

    ``numpy.angle`` returns ``-pi`` for negative reals with a ``-0.0``
    imaginary part; those are folded onto ``+pi``.
    """
    phi = np.angle(z)
    return np.where(phi <= -math.pi, phi + TWO_PI, phi)


def principal_power(z, t):
    """Borel branch ``|z|^t exp(i t Arg z)`` applied elementwise."""
    z = np.asarray(z, dtype=complex)
    t = float(t)
    mod = np.abs(z)
    with np.errstate(divide="ignore"):
        mag = mod**t
    return mag * np.exp(1j * t * principal_arg(z))


# --------------------------------------------------------------------------
# unitarity


@dataclass(frozen=True)
class UnitarityCheck:
    """Outcome of :func:`assert_unitary`.

    ``residual`` is the operator (spectral) norm of ``a* a - 1``.
    """

    passed: bool
    residual: float
    tol: float

    def __bool__(self) -> bool:
        return self.passed

    def raise_if_failed(self, what: str = "matrix") -> None:
        if not self.passed:
            raise NotUnitaryError(
                f"{what} is not unitary: residual {self.residual:.3e} > tol {self.tol:.1e}",
                residual=self.residual,
            )


def unitarity_residual(a) -> float:
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    return float(np.linalg.norm(dagger(a) @ a - np.eye(n), 2))


def assert_unitary(a, tol: float = INPUT_TOL) -> UnitarityCheck:
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(a)
    r = unitarity_residual(a)
    return UnitarityCheck(r <= tol, r, tol)


# --------------------------------------------------------------------------
# polar decomposition


@dataclass(frozen=True)
class PolarResult:
    """``a = unitary @ positive``.

    ``completed`` is true when ``a`` was numerically singular and the
    partial isometry had to be extended on the kernel of ``|a|``.
    """

    unitary: np.ndarray
    positive: np.ndarray
    rank: int
    completed: bool


def canonical_basis(proj: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis of the range of an orthogonal projection of rank k.

    Built by pivoted Gram-Schmidt over the images of the standard basis
    vectors, so the result depends only on the projection (ties go to the
    lower index).
    """
    n = proj.shape[0]
    if k == 0:
        return np.zeros((n, 0), dtype=complex)
    cols = proj.astype(complex, copy=True)
    basis = []
    for _ in range(k):
        norms = np.linalg.norm(cols, axis=0)
        j = int(np.argmax(norms))
        v = cols[:, j] / norms[j]
        basis.append(v)
        cols = cols - np.outer(v, v.conj() @ cols)
    return np.column_stack(basis)


def polar_decompose(a, rank_tol: float | None = None) -> PolarResult:
    a = as_matrix(a)
    n = a.shape[0]
    w, s, vh = np.linalg.svd(a)
    if rank_tol is None:
        rank_tol = n * np.finfo(float).eps * max(float(s[0]) if n else 0.0, 1.0)
    r = int(np.sum(s > rank_tol))
    positive = dagger(vh) @ (s[:, None] * vh)
    u = w[:, :r] @ vh[:r]
    if r < n:
        # match kernel of a (right) with kernel of a* (left) in index order
        right = canonical_basis(dagger(vh[r:]) @ vh[r:], n - r)
        left = canonical_basis(w[:, r:] @ dagger(w[:, r:]), n - r)
        u = u + left @ dagger(right)
    return PolarResult(u, positive, r, r < n)


def polar_unitary(a) -> np.ndarray:
    return polar_decompose(a).unitary


# --------------------------------------------------------------------------
# spectral decomposition of unitaries


@dataclass
class SpectralDecomposition:
    """Eigenphases in ``(-pi, pi]`` with orthonormal bases of the eigenspaces.

    ``bases[k]`` is a ``dim x rank_k`` matrix with orthonormal columns; the
    spectral projections are ``bases[k] @ bases[k]^*``.
    """

    phases: np.ndarray
    bases: list[np.ndarray]
    dim: int

    @property
    def ranks(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    @property
    def projections(self) -> list[np.ndarray]:
        return [b @ dagger(b) for b in self.bases]

    def reassemble(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for phi, b in zip(self.phases, self.bases):
            out += np.exp(1j * phi) * (b @ dagger(b))
        return out

    def validate(self, tol: float = 1e-10) -> None:
        projs = self.projections
        total = sum(projs, np.zeros((self.dim, self.dim), dtype=complex))
        if np.linalg.norm(total - np.eye(self.dim), 2) > tol:
            raise ValueError("projections do not sum to the identity")
        for j, p in enumerate(projs):
            if p.shape[0] and np.trace(p).real < 0.5:
                raise ValueError(f"projection {j} has rank 0")
            if np.linalg.norm(p @ p - p, 2) > tol or np.linalg.norm(p - dagger(p), 2) > tol:
                raise ValueError(f"projection {j} is not an orthogonal projection")
            for k in range(j + 1, len(projs)):
                if np.linalg.norm(p @ projs[k], 2) > tol:
                    raise ValueError(f"projections {j} and {k} are not orthogonal")


def normal_schur(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Complex Schur form of a (nearly) normal matrix.

    Returns eigenvalues, unitary Schur vectors and the Frobenius norm of the
    strictly upper part of the triangular factor, which vanishes exactly for
    normal matrices.
    """
    try:
        t, z = scipy.linalg.schur(x, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"Schur decomposition failed: {exc}") from exc
    off = float(np.linalg.norm(np.triu(t, 1)))
    return np.diag(t).copy(), z, off


def _circular_groups(phases: np.ndarray, tol: float) -> list[np.ndarray]:
    """Index groups of phases that are within ``tol`` of a neighbour on the circle."""
    order = np.argsort(phases, kind="stable")
    sp = phases[order]
    m = len(sp)
    if m == 0:
        return []
    gaps = np.empty(m)
    gaps[:-1] = np.diff(sp)
    gaps[-1] = sp[0] + TWO_PI - sp[-1]
    cuts = np.flatnonzero(gaps > tol)
    if len(cuts) == 0:
        return [order]
    groups = []
    # the group starting after the last cut wraps around through +-pi
    start = cuts[-1] + 1
    for c in cuts:
        idx = np.arange(start, c + 1) if start <= c else np.r_[np.arange(start, m), np.arange(0, c + 1)]
        groups.append(order[idx % m])
        start = c + 1
    return groups


def unitary_eig(u, tol: float = INPUT_TOL) -> SpectralDecomposition:
    """Spectral decomposition of a unitary.

    Eigenvalues closer than ``tol`` (arc length) to a neighbour are merged
    into one eigenspace. The reassembled matrix reproduces ``u`` to about
    ``max(tol, 1e-13 * dim)``.
    """
    u = as_matrix(u)
    assert_unitary(u, max(tol, INPUT_TOL)).raise_if_failed("input to unitary_eig")
    n = u.shape[0]
    evals, z, _ = normal_schur(u)
    phis = principal_arg(evals)
    phases, bases = [], []
    for g in _circular_groups(phis, tol):
        g = np.sort(g)
        mean = np.mean(np.exp(1j * phis[g]))
        phases.append(float(principal_arg(mean)) if abs(mean) > 0 else float(phis[g[0]]))
        bases.append(z[:, g])
    order = np.argsort(phases, kind="stable")
    return SpectralDecomposition(np.asarray(phases)[order], [bases[i] for i in order], n)


# --------------------------------------------------------------------------
# functional calculus


def branch_power(x, t, tol: float = INPUT_TOL) -> np.ndarray:
    """Apply ``z -> |z|^t exp(i t Arg z)`` to the spectrum of a normal matrix.

    ``t`` may be a ``Fraction``, an int or a float.
    """
    x = as_matrix(x)
    scale = max(1.0, float(np.linalg.norm(x, 2)) ** 2)
    if np.linalg.norm(x @ dagger(x) - dagger(x) @ x, 2) > tol * scale:
        raise NotNormalError("branch_power needs a normal matrix")
    evals, z, _ = normal_schur(x)
    if float(t) < 0 and np.any(np.abs(evals) == 0):
        raise ZeroDivisionError("negative power of a singular matrix")
    return (z * principal_power(evals, t)) @ dagger(z)


# --------------------------------------------------------------------------
# clustering


@dataclass
class SpectralApproximant:
    """``Omega = sum_k lambdas[k] * P_k`` with finitely many unit-modulus values.

    ``members[k]`` lists the indices (into the clustered decomposition) that
    were merged into cluster ``k``; ``radius`` bounds the chord distance
    between any merged eigenvalue and its cluster value.
    """

    lambdas: np.ndarray
    bases: list[np.ndarray]
    dim: int
    members: list[list[int]] = field(default_factory=list)
    radius: float = 0.0

    @property
    def phases(self) -> np.ndarray:
        return principal_arg(self.lambdas)

    @property
    def projections(self) -> list[np.ndarray]:
        return [b @ dagger(b) for b in self.bases]

    @property
    def ranks(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    def power(self, t) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for lam, b in zip(principal_power(self.lambdas, t), self.bases):
            out += lam * (b @ dagger(b))
        return out

    def matrix(self) -> np.ndarray:
        return self.power(1)


def circular_gaps(phases) -> np.ndarray:
    """Gap after each sorted phase, the last one wrapping around the circle."""
    sp = np.sort(np.asarray(phases, dtype=float))
    if len(sp) == 0:
        return sp
    gaps = np.empty(len(sp))
    gaps[:-1] = np.diff(sp)
    gaps[-1] = sp[0] + TWO_PI - sp[-1]
    return gaps


def spectral_cluster(d: SpectralDecomposition, max_clusters: int, gap_tol: float) -> SpectralApproximant:
    """Merge eigenspaces of ``d`` into at most ``max_clusters`` arcs.

    Arcs are separated at circular gaps of at least ``gap_tol``; when that
    leaves too many arcs only the ``max_clusters`` widest gaps are kept.
    Each cluster value is the rank-weighted circular mean of its phases.
    """
    if max_clusters < 1:
        raise ValueError("max_clusters must be at least 1")
    m = len(d.phases)
    order = np.argsort(d.phases, kind="stable")
    sp = np.asarray(d.phases, dtype=float)[order]
    gaps = circular_gaps(sp)
    cuts = [int(i) for i in np.flatnonzero(gaps >= gap_tol)] if m > 1 else []
    if len(cuts) > max_clusters:
        # widest gaps first, lower index on ties
        keep = sorted(cuts, key=lambda i: (-gaps[i], i))[:max_clusters]
        cuts = sorted(keep)
    if len(cuts) <= 1:
        groups = [list(range(m))]
    else:
        groups = []
        for a, b in zip(cuts, cuts[1:] + [cuts[0] + m]):
            groups.append([(j % m) for j in range(a + 1, b + 1)])
    ranks = np.asarray(d.ranks)
    clusters = []
    radius = 0.0
    for g in groups:
        idx = [int(order[j]) for j in g]
        vals = np.exp(1j * np.asarray(d.phases)[idx])
        mean = np.sum(ranks[idx] * vals)
        lam = mean / abs(mean) if abs(mean) > 1e-12 else vals[0]
        radius = max(radius, float(np.max(np.abs(vals - lam))))
        clusters.append((float(principal_arg(lam)), lam, sorted(idx)))
    clusters.sort(key=lambda c: c[0])
    return SpectralApproximant(
        lambdas=np.array([c[1] for c in clusters]),
        bases=[np.hstack([d.bases[i] for i in c[2]]) for c in clusters],
        dim=d.dim,
        members=[c[2] for c in clusters],
        radius=radius,
    )


# --------------------------------------------------------------------------
# finite order rounding


def round_to_root(phases, m: int) -> np.ndarray:
    """Index ``j`` in ``{1, ..., m}`` of the m-th root ``exp(2 pi i j / m)``
    nearest to each phase. Exact midpoints go to the smaller ``j``."""
    x = np.mod(np.asarray(phases, dtype=float) * m / TWO_PI, m)
    lo = np.floor(x)
    frac = x - lo
    j = np.where(frac > 0.5, lo + 1, lo).astype(int)
    tie = frac == 0.5
    if np.any(tie):
        a = np.mod(lo[tie], m).astype(int)
        b = np.mod(lo[tie] + 1, m).astype(int)
        a = np.where(a == 0, m, a)
        b = np.where(b == 0, m, b)
        j[tie] = np.minimum(a, b)
    j = np.mod(j, m)
    return np.where(j == 0, m, j)


def order_decomposition(u, m: int) -> list[np.ndarray]:
    """Bases of the eigenspaces of ``u`` after rounding to m-th roots of unity.

    Entry ``j - 1`` spans the eigenvectors rounded to ``exp(2 pi i j / m)``.
    """
    u = as_matrix(u)
    evals, z, _ = normal_schur(u)
    labels = round_to_root(principal_arg(evals), m)
    return [z[:, labels == j] for j in range(1, m + 1)]


def roots_of_unity(m: int) -> np.ndarray:
    """``exp(2 pi i j / m)`` for ``j = 1, ..., m``."""
    return np.exp(TWO_PI * 1j * np.arange(1, m + 1) / m)


def assemble_from_bases(values, bases) -> np.ndarray:
    n = bases[0].shape[0]
    out = np.zeros((n, n), dtype=complex)
    for v, b in zip(values, bases):
        if b.shape[1]:
            out += v * (b @ dagger(b))
    return out


def project_to_order(u, m: int, tol: float = INPUT_TOL) -> np.ndarray:
    """Round every eigenvalue of a unitary to the nearest m-th root of unity."""
    if m < 1:
        raise ValueError("order must be positive")
    u = as_matrix(u)
    assert_unitary(u, tol).raise_if_failed("input to project_to_order")
    return assemble_from_bases(roots_of_unity(m), order_decomposition(u, m))


# --------------------------------------------------------------------------
# misc


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR of a Ginibre matrix with phase fix)."""
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return q * ph
