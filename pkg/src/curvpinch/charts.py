"""Differential operators on a coordinate chart.

A chart is a coordinate box with a smooth metric function; all curvature
quantities are produced either from an analytic Christoffel fast path or from
4th-order central finite differences of the metric, and the two routes are
cross-checked by a consistency audit.

Derivative plumbing
-------------------
First-level derivatives use the chart's ``fd_step`` h (default 1e-3, near the
optimum for 4th-order stencils in double precision).  Quantities that require
differentiating an already finite-differenced object (Cotton tensor, Weyl
divergence, connection Laplacians of curvature-derived fields) use a wider
nested step ~ sqrt(h), scaled by :data:`NESTED_STEP_FACTOR`, so that the
amplified rounding noise of the inner level stays below the truncation error
of the outer level.

Index conventions follow :mod:`curvpinch.tensor_core`: curvature components
``Riem[i, k, j, l]`` have antisymmetric pairs (i, k) and (j, l) and satisfy
``Ric_ij = g^{kl} Riem[i,k,j,l]``; Christoffel symbols are stored as
``Gamma[k, i, j]`` with the upper index first.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import tensor_core as tc

# Calibration constants for nested finite-difference steps (see module doc).
# Curvature jets differentiate already finite-differenced curvature, whose
# rounding noise favors a wider outer step (0.25); tensor-field operators
# differentiate cheaply evaluated fields whose noise floor is far lower, so a
# tighter step (0.12) buys truncation accuracy on strongly oscillating fields.
NESTED_STEP_FACTOR = 0.25
FIELD_NESTED_STEP_FACTOR = 0.12

# 4th-order central first derivative: offsets and weights (divide by h).
_D1_OFFSETS = (-2, -1, 1, 2)
_D1_WEIGHTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)


class StencilMarginError(ValueError):
    """Raised when a stencil would leave the chart's box on a non-periodic axis."""


class FieldPreconditionError(ValueError):
    """Raised when a tensor field fails an operation's hypothesis."""


@dataclass
class MetricChart:
    """A coordinate-box description of a metric.

    Parameters
    ----------
    n : dimension (>= 3)
    box : per-axis (lo, hi) intervals
    periods : per-axis period length, or None for a non-periodic axis.
        Stencils wrap freely along periodic axes (metric_fn must be periodic
        there); on non-periodic axes they require interior margin.
    metric_fn : point -> (n, n) symmetric positive-definite array
    christoffel_fn : optional point -> (n, n, n) array Gamma[k, i, j],
        symmetric in (i, j); analytic fast path for all derivatives of g.
    fd_step : finite-difference step h > 0
    """

    n: int
    box: tuple[tuple[float, float], ...]
    metric_fn: Callable[[np.ndarray], np.ndarray]
    christoffel_fn: Callable[[np.ndarray], np.ndarray] | None = None
    periods: tuple[float | None, ...] | None = None
    fd_step: float = 1e-3
    name: str = ""

    def __post_init__(self):
        tc.check_dim(self.n)
        if len(self.box) != self.n:
            raise ValueError("box must have one interval per axis")
        if self.periods is None:
            self.periods = tuple(None for _ in range(self.n))
        if len(self.periods) != self.n:
            raise ValueError("periods must have one entry per axis")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    # -- stencil bookkeeping -------------------------------------------------

    @property
    def nested_step(self) -> float:
        return NESTED_STEP_FACTOR * np.sqrt(self.fd_step)

    @property
    def field_nested_step(self) -> float:
        return FIELD_NESTED_STEP_FACTOR * np.sqrt(self.fd_step)

    @property
    def gamma_reach(self) -> float:
        """Coordinate distance a Christoffel evaluation may step from x."""
        return 0.0 if self.christoffel_fn is not None else 2.0 * self.fd_step

    @property
    def riemann_reach(self) -> float:
        return 2.0 * self.fd_step + self.gamma_reach

    def require_margin(self, x: np.ndarray, reach: float) -> None:
        x = np.asarray(x, dtype=float)
        for a in range(self.n):
            if self.periods[a] is not None:
                continue
            lo, hi = self.box[a]
            if x[a] - reach < lo or x[a] + reach > hi:
                raise StencilMarginError(
                    f"insufficient stencil margin on axis {a} at {x[a]!r} "
                    f"(reach {reach!r}, box [{lo!r}, {hi!r}])"
                )

    def metric_at(self, x) -> np.ndarray:
        g = np.asarray(self.metric_fn(np.asarray(x, dtype=float)), dtype=float)
        return 0.5 * (g + g.T)

    def sample_points(
        self, m: int, rng: np.random.Generator, margin_frac: float = 0.1
    ) -> np.ndarray:
        """m uniform interior points, shrinking non-periodic axes by margin_frac."""
        pts = np.empty((m, self.n))
        for a in range(self.n):
            lo, hi = self.box[a]
            if self.periods[a] is None:
                pad = margin_frac * (hi - lo)
                pts[:, a] = rng.uniform(lo + pad, hi - pad, size=m)
            else:
                pts[:, a] = rng.uniform(lo, hi, size=m)
        return pts


@dataclass
class Sym2Field:
    """A symmetric 2-tensor field on a chart.

    ``reach`` is the coordinate distance an evaluation may itself step away
    from its argument (0 for closed-form fields, ``chart.riemann_reach`` for
    curvature-derived ones); derivative stencils add it to their margin.
    """

    chart: MetricChart
    eval: Callable[[np.ndarray], np.ndarray]
    reach: float = 0.0
    name: str = ""

    def at(self, x) -> np.ndarray:
        T = np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)
        return 0.5 * (T + T.T)


def _partial(fn, x: np.ndarray, axis: int, h: float):
    """4th-order central first derivative of an array-valued function."""
    acc = None
    for off, w in zip(_D1_OFFSETS, _D1_WEIGHTS):
        xs = x.copy()
        xs[axis] += off * h
        v = np.asarray(fn(xs), dtype=float)
        acc = w * v if acc is None else acc + w * v
    return acc / h


def _grad(fn, x: np.ndarray, n: int, h: float) -> np.ndarray:
    """All partials, stacked on a new leading axis: out[a] = d_a fn."""
    return np.stack([_partial(fn, x, a, h) for a in range(n)])


# ---------------------------------------------------------------------------
# Christoffel symbols and curvature
# ---------------------------------------------------------------------------


def christoffel_fd(chart: MetricChart, x) -> np.ndarray:
    """Gamma[k,i,j] = g^{kl}(d_i g_jl + d_j g_il - d_l g_ij)/2 by central FD."""
    x = np.asarray(x, dtype=float)
    h = chart.fd_step
    dg = _grad(chart.metric_at, x, chart.n, h)  # dg[a, i, j]
    g = chart.metric_at(x)
    ginv = tc.inverse_metric(g)
    # d_i g_jl + d_j g_il - d_l g_ij, indices (i, j, l)
    sym = dg + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg)
    gamma = 0.5 * np.einsum("kl,ijl->kij", ginv, sym)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


def christoffel_at(chart: MetricChart, x) -> np.ndarray:
    """Christoffel symbols Gamma[k,i,j]; analytic if the chart provides them."""
    x = np.asarray(x, dtype=float)
    chart.require_margin(x, chart.gamma_reach)
    if chart.christoffel_fn is not None:
        gamma = np.asarray(chart.christoffel_fn(x), dtype=float)
        return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))
    return christoffel_fd(chart, x)


def christoffel_consistency(chart: MetricChart, points: np.ndarray) -> float:
    """Max deviation between analytic and finite-difference Christoffels."""
    if chart.christoffel_fn is None:
        raise ValueError("chart has no analytic christoffel_fn to audit")
    worst = 0.0
    for x in np.atleast_2d(points):
        worst = max(
            worst,
            float(np.max(np.abs(chart.christoffel_fn(x) - christoffel_fd(chart, x)))),
        )
    return worst


def positive_definite_audit(chart: MetricChart, points: np.ndarray) -> bool:
    """Cholesky-factorize the metric at every point; False on any failure."""
    for x in np.atleast_2d(points):
        try:
            np.linalg.cholesky(chart.metric_at(x))
        except np.linalg.LinAlgError:
            return False
    return True


def riemann_at(chart: MetricChart, x) -> np.ndarray:
    """Lower-index curvature tensor Riem[i,k,j,l] under the pinned convention.

    Built from R^i_{kjl} = d_j Gamma^i_{lk} - d_l Gamma^i_{jk}
    + Gamma^i_{jm} Gamma^m_{lk} - Gamma^i_{lm} Gamma^m_{jk}, lowered with g.
    """
    x = np.asarray(x, dtype=float)
    chart.require_margin(x, chart.riemann_reach)
    h = chart.fd_step
    gamma = christoffel_at(chart, x)
    dgamma = _grad(lambda xs: christoffel_at(chart, xs), x, chart.n, h)
    # dgamma[a, k, i, j] = d_a Gamma^k_{ij}
    r_up = (
        np.einsum("jilk->ikjl", dgamma)
        - np.einsum("lijk->ikjl", dgamma)
        + np.einsum("ijm,mlk->ikjl", gamma, gamma)
        - np.einsum("ilm,mjk->ikjl", gamma, gamma)
    )
    return np.einsum("is,skjl->ikjl", chart.metric_at(x), r_up)


def ricci_at(chart: MetricChart, x) -> np.ndarray:
    """Ricci tensor Ric_ij = g^{kl} Riem[i,k,j,l]."""
    Ric = tc.ricci_contraction(chart.metric_at(x), riemann_at(chart, x))
    return 0.5 * (Ric + Ric.T)


def scalar_at(chart: MetricChart, x) -> float:
    """Scalar curvature g^{ij} Ric_ij."""
    return tc.trace(chart.metric_at(x), ricci_at(chart, x))


def weyl_at(chart: MetricChart, x) -> np.ndarray:
    """Weyl tensor of the chart metric at x."""
    g = chart.metric_at(x)
    Riem = riemann_at(chart, x)
    Ric = tc.ricci_contraction(g, Riem)
    return tc.weyl_from(g, Riem, Ric, tc.trace(g, Ric))


# ---------------------------------------------------------------------------
# first covariant derivative of the curvature: Cotton tensor, Weyl divergence
# ---------------------------------------------------------------------------


@dataclass
class CurvatureJet:
    """Curvature and its first covariant derivative at a point."""

    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riem: np.ndarray
    ric: np.ndarray
    scal: float
    cov_riem: np.ndarray  # cov_riem[a, i, k, j, l] = nabla_a Riem[i,k,j,l]
    cov_ric: np.ndarray   # cov_ric[a, i, j] = nabla_a Ric_ij
    cov_scal: np.ndarray  # cov_scal[a] = nabla_a R
    cotton: np.ndarray = dc_field(init=False)

    def __post_init__(self):
        n = self.g.shape[0]
        # C_ijk = nabla_k Ric_ij - nabla_j Ric_ik
        #         - (nabla_k R g_ij - nabla_j R g_ik) / (2(n-1))
        grad_term = np.einsum("k,ij->ijk", self.cov_scal, self.g)
        self.cotton = (
            np.einsum("kij->ijk", self.cov_ric)
            - np.einsum("jik->ijk", self.cov_ric)
            - (grad_term - np.transpose(grad_term, (0, 2, 1))) / (2.0 * (n - 1))
        )

    def weyl_divergence_defect(self) -> float:
        """Residual of the divergence identity relating Weyl and Cotton.

        For n >= 4 the contracted second Bianchi identity gives

            g^{la} nabla_a W[i,k,j,l] = (n-3)/(n-2) * C[j,i,k],

        with the Cotton slots arranged so that both sides are antisymmetric
        in (i, k).  Returns the max-norm of the difference.
        """
        n = self.g.shape[0]
        if n < 4:
            raise ValueError("identity requires n >= 4")
        # nabla_a A_ij from nabla Ric and nabla R
        cov_schouten = (
            self.cov_ric
            - np.einsum("a,ij->aij", self.cov_scal, self.g) / (2.0 * (n - 1))
        ) / (n - 2)
        kn = (
            np.einsum("aij,kl->aikjl", cov_schouten, self.g)
            - np.einsum("ail,jk->aikjl", cov_schouten, self.g)
            + np.einsum("akl,ij->aikjl", cov_schouten, self.g)
            - np.einsum("ajk,il->aikjl", cov_schouten, self.g)
        )
        cov_weyl = self.cov_riem - kn
        div_w = np.einsum("la,aikjl->ikj", self.ginv, cov_weyl)
        target = (n - 3.0) / (n - 2.0) * np.einsum("jik->ikj", self.cotton)
        return float(np.max(np.abs(div_w - target)))


def curvature_jet(chart: MetricChart, x) -> CurvatureJet:
    """Curvature tensor plus its covariant derivative, by nested differencing."""
    x = np.asarray(x, dtype=float)
    hh = chart.nested_step
    chart.require_margin(x, 2.0 * hh + chart.riemann_reach)
    g = chart.metric_at(x)
    ginv = tc.inverse_metric(g)
    gamma = christoffel_at(chart, x)
    riem = riemann_at(chart, x)
    d_riem = _grad(lambda xs: riemann_at(chart, xs), x, chart.n, hh)
    cov_riem = (
        d_riem
        - np.einsum("sai,skjl->aikjl", gamma, riem)
        - np.einsum("sak,isjl->aikjl", gamma, riem)
        - np.einsum("saj,iksl->aikjl", gamma, riem)
        - np.einsum("sal,ikjs->aikjl", gamma, riem)
    )
    cov_ric = np.einsum("kl,aikjl->aij", ginv, cov_riem)
    cov_scal = np.einsum("ij,aij->a", ginv, cov_ric)
    ric = np.einsum("kl,ikjl->ij", ginv, riem)
    return CurvatureJet(
        g=g,
        ginv=ginv,
        gamma=gamma,
        riem=riem,
        ric=0.5 * (ric + ric.T),
        scal=float(np.einsum("ij,ij->", ginv, ric)),
        cov_riem=cov_riem,
        cov_ric=cov_ric,
        cov_scal=cov_scal,
    )


def cotton_at(chart: MetricChart, x) -> np.ndarray:
    """Cotton tensor C[i,j,k], antisymmetric and totally trace-free."""
    return curvature_jet(chart, x).cotton


def weyl_divergence_defect_at(chart: MetricChart, x) -> float:
    """Max-norm residual of the Weyl-divergence/Cotton identity at x (n >= 4)."""
    return curvature_jet(chart, x).weyl_divergence_defect()


# ---------------------------------------------------------------------------
# covariant derivatives of symmetric 2-tensor fields
# ---------------------------------------------------------------------------


def covariant_deriv_sym2(chart: MetricChart, field: Sym2Field, x) -> np.ndarray:
    """D[k,i,j] = nabla_k T_ij = d_k T_ij - Gamma^s_{ki} T_sj - Gamma^s_{kj} T_is."""
    x = np.asarray(x, dtype=float)
    hh = chart.field_nested_step
    chart.require_margin(x, 2.0 * hh + field.reach)
    dT = _grad(field.at, x, chart.n, hh)
    gamma = christoffel_at(chart, x)
    T = field.at(x)
    return (
        dT
        - np.einsum("ski,sj->kij", gamma, T)
        - np.einsum("skj,is->kij", gamma, T)
    )


def codazzi_defect_at(chart: MetricChart, field: Sym2Field, x) -> float:
    """Max over (i,j,k) of |nabla_k T_ij - nabla_j T_ik|."""
    D = covariant_deriv_sym2(chart, field, x)
    return float(np.max(np.abs(D - np.einsum("jik->kij", D))))


def grad_norm2_sym2(chart: MetricChart, field: Sym2Field, x) -> float:
    """|nabla T|^2 = g^{ab} g^{ik} g^{jl} (nabla_a T_ij)(nabla_b T_kl)."""
    D = covariant_deriv_sym2(chart, field, x)
    ginv = tc.inverse_metric(chart.metric_at(x))
    return float(np.einsum("ab,ik,jl,aij,bkl->", ginv, ginv, ginv, D, D))


def second_covariant_deriv_sym2(
    chart: MetricChart, field: Sym2Field, x
) -> np.ndarray:
    """S[a,b,i,j] = nabla_a nabla_b T_ij via nested covariant differencing."""
    x = np.asarray(x, dtype=float)
    hh = chart.field_nested_step
    chart.require_margin(x, 4.0 * hh + field.reach)
    dD = _grad(lambda xs: covariant_deriv_sym2(chart, field, xs), x, chart.n, hh)
    # dD[a, b, i, j] = d_a (nabla_b T_ij)
    gamma = christoffel_at(chart, x)
    D = covariant_deriv_sym2(chart, field, x)
    return (
        dD
        - np.einsum("cab,cij->abij", gamma, D)
        - np.einsum("cai,bcj->abij", gamma, D)
        - np.einsum("caj,bic->abij", gamma, D)
    )


def rough_laplacian_sym2(chart: MetricChart, field: Sym2Field, x) -> np.ndarray:
    """Connection Laplacian (Delta T)_ij = g^{ab} nabla_a nabla_b T_ij."""
    S = second_covariant_deriv_sym2(chart, field, x)
    ginv = tc.inverse_metric(chart.metric_at(x))
    return np.einsum("ab,abij->ij", ginv, S)


def _require_trace_free_codazzi(
    chart: MetricChart, field: Sym2Field, x, tol: float = 1e-6
) -> None:
    g = chart.metric_at(x)
    T = field.at(x)
    scale = tc.tol_scale(np.sqrt(max(tc.norm2(g, T), 0.0)))
    if abs(tc.trace(g, T)) > tol * scale:
        raise FieldPreconditionError("not a trace-free Codazzi field (trace)")
    if codazzi_defect_at(chart, field, x) > tol * scale:
        raise FieldPreconditionError("not a trace-free Codazzi field (Codazzi defect)")


def elliptic_residual_at(chart: MetricChart, field: Sym2Field, x) -> float:
    """Residual of the elliptic system for trace-free Codazzi tensors.

    Checks Delta T_ij = -Riem[i,k,j,l] T^{kl} + Ric_{jk} T_i{}^k at x, where
    Delta is the connection Laplacian; returns the max-norm of the difference.
    """
    x = np.asarray(x, dtype=float)
    _require_trace_free_codazzi(chart, field, x)
    g = chart.metric_at(x)
    ginv = tc.inverse_metric(g)
    T = field.at(x)
    riem = riemann_at(chart, x)
    ric = np.einsum("kl,ikjl->ij", ginv, riem)
    lap = rough_laplacian_sym2(chart, field, x)
    T_up = ginv @ T @ ginv
    rhs = -np.einsum("ikjl,kl->ij", riem, T_up) + T @ ginv @ ric
    return float(np.max(np.abs(lap - rhs)))


def _norm_fn(chart: MetricChart, field: Sym2Field):
    def norm_at(xs: np.ndarray) -> float:
        return float(np.sqrt(max(tc.norm2(chart.metric_at(xs), field.at(xs)), 0.0)))

    return norm_at


def _hessian_scalar(chart: MetricChart, fn, x: np.ndarray, h: float) -> np.ndarray:
    """Hessian of partials d_a d_b f by composing 4th-order first derivatives."""
    n = chart.n
    H = np.empty((n, n))
    for b in range(n):
        db = lambda xs, _b=b: _partial(fn, xs, _b, h)
        for a in range(b + 1):
            H[a, b] = H[b, a] = _partial(db, x, a, h)
    return H


def laplacian_scalar(chart: MetricChart, fn, x, extra_reach: float = 0.0) -> float:
    """Laplace-Beltrami operator on a scalar: g^{ab}(d_a d_b f - Gamma^c_{ab} d_c f)."""
    x = np.asarray(x, dtype=float)
    hh = chart.field_nested_step
    chart.require_margin(x, 4.0 * hh + extra_reach)
    H = _hessian_scalar(chart, fn, x, hh)
    df = np.array([_partial(fn, x, a, hh) for a in range(chart.n)])
    gamma = christoffel_at(chart, x)
    ginv = tc.inverse_metric(chart.metric_at(x))
    return float(np.einsum("ab,ab->", ginv, H - np.einsum("cab,c->ab", gamma, df)))


def kato_gap_at(chart: MetricChart, field: Sym2Field, x) -> float:
    """Refined Kato gap |nabla T|^2 - ((n+2)/n) |nabla |T||^2 at x.

    Only defined away from the vanishing locus of the field (|T| > 1e-8);
    nonnegative for trace-free Codazzi fields.
    """
    x = np.asarray(x, dtype=float)
    norm_at = _norm_fn(chart, field)
    if norm_at(x) <= 1e-8:
        raise FieldPreconditionError("vanishing locus")
    n = chart.n
    hh = chart.field_nested_step
    chart.require_margin(x, 2.0 * hh + field.reach)
    dnorm = np.array([_partial(norm_at, x, a, hh) for a in range(n)])
    ginv = tc.inverse_metric(chart.metric_at(x))
    grad_norm_sq = float(dnorm @ ginv @ dnorm)
    return grad_norm2_sym2(chart, field, x) - (n + 2.0) / n * grad_norm_sq


def weitzenbock_residual_at(chart: MetricChart, field: Sym2Field, x) -> float:
    """Residual of the Weitzenboeck formula for trace-free Codazzi tensors.

    Checks (1/2) Delta |T|^2 = |nabla T|^2 - Riem[i,k,j,l] T^{ij} T^{kl}
    + Ric_{jk} T^{ij} T_i{}^k at x; returns |LHS - RHS|.
    """
    x = np.asarray(x, dtype=float)
    _require_trace_free_codazzi(chart, field, x)
    g = chart.metric_at(x)
    ginv = tc.inverse_metric(g)
    T = field.at(x)
    riem = riemann_at(chart, x)
    ric = np.einsum("kl,ikjl->ij", ginv, riem)
    norm_at = _norm_fn(chart, field)
    lhs = 0.5 * laplacian_scalar(
        chart, lambda xs: norm_at(xs) ** 2, x, extra_reach=field.reach
    )
    T_up = ginv @ T @ ginv
    MT = ginv @ T
    MR = ginv @ ric
    rhs = (
        grad_norm2_sym2(chart, field, x)
        - float(np.einsum("ikjl,ij,kl->", riem, T_up, T_up))
        + float(np.trace(MR @ MT @ MT))
    )
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# curvature-derived fields
# ---------------------------------------------------------------------------


def curvature_e_field(chart: MetricChart, name: str = "E") -> Sym2Field:
    """Trace-free Ricci field computed from the chart's curvature."""

    def ev(x: np.ndarray) -> np.ndarray:
        g = chart.metric_at(x)
        ric = ricci_at(chart, x)
        return ric - (tc.trace(g, ric) / chart.n) * g

    return Sym2Field(chart=chart, eval=ev, reach=chart.riemann_reach, name=name)


def curvature_schouten_field(chart: MetricChart, name: str = "A") -> Sym2Field:
    """Schouten field computed from the chart's curvature."""

    def ev(x: np.ndarray) -> np.ndarray:
        g = chart.metric_at(x)
        ric = ricci_at(chart, x)
        return tc.schouten(g, ric, tc.trace(g, ric))

    return Sym2Field(chart=chart, eval=ev, reach=chart.riemann_reach, name=name)


def trace_free_field(field: Sym2Field, name: str = "") -> Sym2Field:
    """Pointwise trace-free part of a field (same reach)."""
    chart = field.chart

    def ev(x: np.ndarray) -> np.ndarray:
        g = chart.metric_at(x)
        T = field.at(x)
        return T - (tc.trace(g, T) / chart.n) * g

    return Sym2Field(
        chart=chart, eval=ev, reach=field.reach, name=name or f"{field.name}'"
    )
