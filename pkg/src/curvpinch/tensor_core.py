"""Pointwise multilinear algebra on curvature-type tensors in dimension n >= 3.

Conventions
-----------
All tensors are stored with lower indices as dense numpy arrays:

* symmetric 2-tensors (metric g, Ricci, trace-free Ricci E, Schouten A)
  are (n, n) arrays, exactly symmetric;
* curvature tensors are (n, n, n, n) arrays ``Riem[i, k, j, l]`` whose
  antisymmetric index pairs are (i, k) and (j, l).

The sign convention is pinned by the constant-curvature case: on the unit
round sphere

    Riem[i, k, j, l] = g[i, j] g[k, l] - g[i, l] g[j, k],

and the Ricci tensor is the contraction ``Ric[i, j] = g^{kl} Riem[i, k, j, l]``,
so Ric = (n - 1) g > 0 there.  This choice is forced by requiring the
Weyl/Ricci/scalar decomposition implemented in :func:`weyl_from` to be
consistent in the Einstein case; a unit test pins it.

Repeated lower indices in the formulas below are contracted with the
inverse metric.  Identities are homogeneous in their inputs, so absolute
tolerances are scaled by ``max(1, |input|**p)`` with the matching power p
(see :func:`tol_scale`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateMetricError(ValueError):
    """Raised when a metric fails to be (numerically) positive definite."""


class TraceMismatchError(ValueError):
    """Raised when a supplied scalar curvature disagrees with tr(Ric)."""


def tol_scale(x: float, power: float = 1.0) -> float:
    """Homogeneous tolerance scale max(1, |x|**power)."""
    return max(1.0, abs(x) ** power)


def check_dim(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {n!r}")
    return int(n)


def sym2(comps) -> np.ndarray:
    """Validate and return an exactly symmetric (n, n) array, n >= 3."""
    a = np.asarray(comps, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    check_dim(a.shape[0])
    return 0.5 * (a + a.T)


def inverse_metric(g: np.ndarray) -> np.ndarray:
    """Inverse of a positive-definite metric; raises DegenerateMetricError."""
    g = np.asarray(g, dtype=float)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetricError("degenerate metric") from exc
    return np.linalg.inv(g)


def trace(g: np.ndarray, T: np.ndarray) -> float:
    """Metric trace g^{ij} T_ij."""
    ginv = inverse_metric(g)
    return float(np.tensordot(ginv, T, axes=2))


def norm2(g: np.ndarray, T: np.ndarray) -> float:
    """Squared norm |T|^2 = g^{ik} g^{jl} T_ij T_kl (= tr((g^-1 T)^2))."""
    M = np.linalg.solve(g, T)
    return float(np.trace(M @ M))


def cubic(g: np.ndarray, T: np.ndarray) -> float:
    """Cubic invariant T_ij T_ik T_jk with indices raised by g (= tr((g^-1 T)^3))."""
    M = np.linalg.solve(g, T)
    return float(np.trace(M @ M @ M))


@dataclass(frozen=True)
class ScalarQuantities:
    """Scalar curvature together with the basic invariants of E."""

    R: float
    normE: float
    cubicE: float


def scalar_quantities(g: np.ndarray, E: np.ndarray, R: float) -> ScalarQuantities:
    n2 = norm2(g, E)
    if n2 < 0:
        n2 = 0.0
    return ScalarQuantities(R=float(R), normE=float(np.sqrt(n2)), cubicE=cubic(g, E))


def trace_free_part(g: np.ndarray, Ric: np.ndarray, R: float) -> np.ndarray:
    """Trace-free Ricci tensor E = Ric - (R/n) g.

    Requires R to equal tr_g(Ric) to 1e-10 relative; the returned tensor is
    trace-free to machine accuracy by construction.
    """
    g = sym2(g)
    Ric = sym2(Ric)
    n = g.shape[0]
    tr = trace(g, Ric)
    if abs(tr - R) > 1e-10 * tol_scale(R):
        raise TraceMismatchError(
            f"trace mismatch: tr(Ric) = {tr!r} but R = {R!r}"
        )
    return Ric - (R / n) * g


def okumura_bound_coeff(n: int) -> float:
    """Sharp constant (n-2)/sqrt(n(n-1)) in the cubic lower bound for E."""
    check_dim(n)
    return (n - 2) / np.sqrt(n * (n - 1))


def okumura_gap(g: np.ndarray, E: np.ndarray) -> float:
    """Gap of the sharp cubic inequality for a trace-free symmetric tensor.

    Returns tr(E^3) + (n-2)/sqrt(n(n-1)) |E|^3, which is >= 0, and equals 0
    exactly when E = 0 or E has eigenvalue pattern (lam, ..., lam, -(n-1) lam)
    with lam >= 0.
    """
    g = sym2(g)
    E = sym2(E)
    n = g.shape[0]
    nrm3 = norm2(g, E) ** 1.5
    if abs(trace(g, E)) > 1e-10 * tol_scale(np.sqrt(norm2(g, E))):
        raise ValueError("okumura_gap requires a trace-free tensor")
    return cubic(g, E) + okumura_bound_coeff(n) * nrm3


def schouten(g: np.ndarray, Ric: np.ndarray, R: float) -> np.ndarray:
    """Schouten tensor A = (Ric - R/(2(n-1)) g) / (n-2); tr_g A = R/(2(n-1))."""
    g = sym2(g)
    Ric = sym2(Ric)
    n = g.shape[0]
    return (Ric - (R / (2.0 * (n - 1))) * g) / (n - 2)


def kulkarni_nomizu(S: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Product of symmetric 2-tensors with curvature symmetries.

    (S ^ T)[i,k,j,l] = S_ij T_kl - S_il T_jk + S_kl T_ij - S_jk T_il,
    in the (i,k),(j,l) pair grouping used throughout.
    """
    return (
        np.einsum("ij,kl->ikjl", S, T)
        - np.einsum("il,jk->ikjl", S, T)
        + np.einsum("kl,ij->ikjl", S, T)
        - np.einsum("jk,il->ikjl", S, T)
    )


def cf_riemann_from_ricci(g: np.ndarray, E: np.ndarray, R: float) -> np.ndarray:
    """Curvature tensor of a conformally flat metric from its Ricci data.

    Riem[i,k,j,l] = (E_ij g_kl - E_il g_jk + E_kl g_ij - E_jk g_il)/(n-2)
                    + R (g_ij g_kl - g_il g_jk) / (n(n-1)).

    The contraction g^{kl} Riem[i,k,j,l] returns E + (R/n) g.
    """
    g = sym2(g)
    E = sym2(E)
    n = g.shape[0]
    gg = np.einsum("ij,kl->ikjl", g, g) - np.einsum("il,jk->ikjl", g, g)
    return kulkarni_nomizu(E, g) / (n - 2) + (R / (n * (n - 1))) * gg


def ricci_contraction(g: np.ndarray, Riem: np.ndarray) -> np.ndarray:
    """Ric_ij = g^{kl} Riem[i,k,j,l] under the pinned convention."""
    ginv = inverse_metric(g)
    return np.einsum("kl,ikjl->ij", ginv, Riem)


def weyl_from(g: np.ndarray, Riem: np.ndarray, Ric: np.ndarray, R: float) -> np.ndarray:
    """Weyl part of a curvature tensor.

    Subtracts the Ricci and scalar parts of the decomposition

      Riem = W + (Ric ^ g)/(n-2) - R (g ^ g) / (2(n-1)(n-2)),

    where ^ is the product of :func:`kulkarni_nomizu` (note g ^ g doubles the
    plain antisymmetrized product).  Reassembling is exact algebra; W is
    totally trace-free whenever Riem satisfies the curvature invariants.
    """
    g = sym2(g)
    Ric = sym2(Ric)
    n = g.shape[0]
    gg = np.einsum("ij,kl->ikjl", g, g) - np.einsum("il,jk->ikjl", g, g)
    return Riem - kulkarni_nomizu(Ric, g) / (n - 2) + (R / ((n - 1) * (n - 2))) * gg


def reassemble_riemann(g: np.ndarray, W: np.ndarray, Ric: np.ndarray, R: float) -> np.ndarray:
    """Inverse of :func:`weyl_from`: add the Ricci and scalar parts back."""
    g = sym2(g)
    Ric = sym2(Ric)
    n = g.shape[0]
    gg = np.einsum("ij,kl->ikjl", g, g) - np.einsum("il,jk->ikjl", g, g)
    return W + kulkarni_nomizu(Ric, g) / (n - 2) - (R / ((n - 1) * (n - 2))) * gg


def q_invariant(
    g: np.ndarray, Riem: np.ndarray, Ric: np.ndarray, E: np.ndarray
) -> tuple[float, float]:
    """Curvature quadratic -Riem(E,E) + Ric(E^2), by two routes.

    Returns ``(q_direct, q_formula)`` where ``q_direct`` fully contracts the
    supplied curvature tensor,

        q_direct = -Riem[i,k,j,l] E^{ij} E^{kl} + Ric_{jk} E^{ij} E_i{}^k,

    and ``q_formula`` uses the closed form valid when Riem is the conformally
    flat tensor built from (E, R):

        q_formula = R |E|^2 / (n-1) + n tr(E^3) / (n-2).
    """
    g = sym2(g)
    n = g.shape[0]
    ginv = inverse_metric(g)
    E_up = ginv @ E @ ginv
    ME = ginv @ E
    MR = ginv @ Ric
    q_direct = -float(np.einsum("ikjl,ij,kl->", Riem, E_up, E_up)) + float(
        np.trace(MR @ ME @ ME)
    )
    R = trace(g, Ric)
    q_formula = R * norm2(g, E) / (n - 1) + n * cubic(g, E) / (n - 2)
    return q_direct, q_formula


# ---------------------------------------------------------------------------
# eigenvalue pattern classification
# ---------------------------------------------------------------------------

NULL = "null"
PATTERN = "pattern"
OTHER = "other"


@dataclass(frozen=True)
class EigenPattern:
    """Classification of the eigenvalue structure of a trace-free tensor.

    ``kind`` is one of ``null`` (all eigenvalues ~ 0), ``pattern``
    (eigenvalues lam x (n-1) and -(n-1) lam x 1, lam stored in ``lam``)
    or ``other``.
    """

    kind: str
    lam: float | None = None
    eigenvalues: tuple[float, ...] = ()


def generalized_eigenvalues(g: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Eigenvalues of E relative to g via the symmetric square root of g.

    Coordinate components need not be orthonormal, so the eigenproblem is
    E v = lam g v; it is symmetrized as g^{-1/2} E g^{-1/2}.
    """
    w, V = np.linalg.eigh(sym2(g))
    if np.min(w) <= 0:
        raise DegenerateMetricError("degenerate metric")
    g_isqrt = (V / np.sqrt(w)) @ V.T
    M = g_isqrt @ sym2(E) @ g_isqrt
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def eigen_pattern(g: np.ndarray, E: np.ndarray, tol: float) -> EigenPattern:
    """Classify E as null, the (n-1, 1) eigenvalue pattern, or other.

    The clustering tolerance is scaled by max(1, |E|); ``pattern`` requires
    n-1 eigenvalues within tol of a common value lam and the remaining one
    within tol of -(n-1) lam.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ev = np.sort(generalized_eigenvalues(g, E))
    n = ev.size
    scale = tol * tol_scale(float(np.max(np.abs(ev)) if ev.size else 0.0))
    if np.max(np.abs(ev)) <= scale:
        return EigenPattern(kind=NULL, eigenvalues=tuple(ev))
    # The singleton eigenvalue is -(n-1) lam, at the opposite end of the
    # cluster: test both orderings.
    for cluster, single in ((ev[:-1], ev[-1]), (ev[1:], ev[0])):
        lam = float(np.mean(cluster))
        if np.max(np.abs(cluster - lam)) <= scale and abs(
            single + (n - 1) * lam
        ) <= scale:
            return EigenPattern(kind=PATTERN, lam=lam, eigenvalues=tuple(ev))
    return EigenPattern(kind=OTHER, eigenvalues=tuple(ev))


# ---------------------------------------------------------------------------
# batched helpers for the large random property suites
# ---------------------------------------------------------------------------


def random_trace_free_batch(
    rng: np.random.Generator, m: int, n: int, g: np.ndarray | None = None
) -> np.ndarray:
    """m random symmetric matrices, trace-free with respect to g (default identity)."""
    A = rng.standard_normal((m, n, n))
    S = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    if g is None:
        tr = np.einsum("bii->b", S)
        return S - tr[:, None, None] * np.eye(n) / n
    ginv = inverse_metric(g)
    tr = np.einsum("ij,bij->b", ginv, S)
    return S - tr[:, None, None] * g / n


def okumura_gap_batch(E: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
    """Vectorized :func:`okumura_gap` for a (m, n, n) stack (g defaults to identity)."""
    n = E.shape[-1]
    if g is None:
        M = E
    else:
        M = np.einsum("ij,bjk->bik", inverse_metric(g), E)
    n2 = np.einsum("bij,bji->b", M, M)
    c3 = np.einsum("bij,bjk,bki->b", M, M, M)
    return c3 + okumura_bound_coeff(n) * np.maximum(n2, 0.0) ** 1.5


def q_invariant_batch(
    g: np.ndarray, E: np.ndarray, R: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`q_invariant` over stacks of (g, E, R).

    Builds the conformally flat curvature tensor of every sample and contracts
    it fully (the direct route), against the closed-form route.
    """
    m, n = E.shape[0], E.shape[-1]
    ginv = np.linalg.inv(g)
    gg = np.einsum("bij,bkl->bikjl", g, g) - np.einsum("bil,bjk->bikjl", g, g)
    kn = (
        np.einsum("bij,bkl->bikjl", E, g)
        - np.einsum("bil,bjk->bikjl", E, g)
        + np.einsum("bkl,bij->bikjl", E, g)
        - np.einsum("bjk,bil->bikjl", E, g)
    )
    Riem = kn / (n - 2) + (R / (n * (n - 1)))[:, None, None, None, None] * gg
    E_up = np.einsum("bij,bjk,bkl->bil", ginv, E, ginv)
    ME = np.einsum("bij,bjk->bik", ginv, E)
    Ric = E + (R / n)[:, None, None] * g
    MR = np.einsum("bij,bjk->bik", ginv, Ric)
    q_direct = -np.einsum("bikjl,bij,bkl->b", Riem, E_up, E_up) + np.einsum(
        "bij,bjk,bki->b", MR, ME, ME
    )
    n2 = np.einsum("bij,bji->b", ME, ME)
    c3 = np.einsum("bij,bjk,bki->b", ME, ME, ME)
    q_formula = R * n2 / (n - 1) + n * c3 / (n - 2)
    return q_direct, q_formula
