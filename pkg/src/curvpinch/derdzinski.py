"""Periodic warping functions giving warped products of constant scalar curvature.

A warped product dt^2 + F(t)^2 g_S over the unit round (n-1)-sphere has scalar
curvature

    R(t) = -2(n-1) F''/F + (n-1)(n-2)(1 - F'^2)/F^2.

Imposing R(t) = const = R > 0 yields the second-order equation

    F'' = [ (n-2)(1 - F'^2)/F - R F/(n-1) ] / 2,

which conserves the first integral

    G(F, F') = F^{n-2} (1 - F'^2) - R F^n / (n(n-1)) = C.

(Both formulas are reconstructions obtained from the constant-curvature
requirement; they are validated downstream by finite-difference scalar
curvature checks on the built metric.)  The constant solution is
F = F0 = sqrt((n-1)(n-2)/R), with G(F0, 0) = (2/n) F0^{n-2} =: C_max.  For
0 < C < C_max the level set G = C is a closed orbit: F oscillates between the
two positive simple roots Fmin < F0 < Fmax of the potential

    V(F) = 1 - C F^{2-n} - R F^2 / (n(n-1)),        F'^2 = V(F),

giving a non-constant, positive, periodic warping function.  The period is

    Lambda = 2 * integral_{Fmin}^{Fmax} dF / sqrt(V(F)),

computed here with the substitution F = mid - half*cos(theta) that absorbs the
inverse-square-root singularities at both turning points, leaving a smooth
integrand handled by Gauss-Legendre quadrature with order doubling.  The
profile itself is integrated with a high-order adaptive scheme from the
turning point (Fmin, 0), where time-reversal symmetry pins F(Lambda - t) = F(t).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp


class IntegrationToleranceError(RuntimeError):
    """Raised when a solution fails its conservation/periodicity budget."""


def static_solution(n: int, R: float) -> float:
    """Radius F0 = sqrt((n-1)(n-2)/R) of the constant (round product) solution."""
    if n < 3:
        raise ValueError("dimension must be >= 3")
    if R <= 0:
        raise ValueError("scalar curvature must be positive")
    return float(np.sqrt((n - 1) * (n - 2) / R))


def admissible_range(n: int, R: float) -> tuple[float, float]:
    """Open interval (0, C_max) of first-integral values with periodic orbits.

    C_max = (2/n) F0^{n-2} is the value at the constant solution; inside the
    window the potential V has exactly two positive simple roots.
    """
    f0 = static_solution(n, R)
    return 0.0, float((2.0 / n) * f0 ** (n - 2))


def harmonic_period(n: int, R: float) -> float:
    """Small-oscillation period 2*pi/omega about F0, omega^2 = |V''(F0)|/2 = R/(n-1)."""
    return float(2.0 * np.pi * np.sqrt((n - 1) / R))


@dataclass(frozen=True)
class WarpODE:
    """Parameters (n, R, C) of a periodic warping-function orbit."""

    n: int
    R: float
    C: float

    def __post_init__(self):
        lo, hi = admissible_range(self.n, self.R)
        if not (lo < self.C < hi):
            raise ValueError(
                f"no periodic orbit: C must lie in (0, {hi!r}), got {self.C!r}"
            )

    def potential(self, F):
        """V(F) = 1 - C F^{2-n} - R F^2/(n(n-1)); F'^2 = V(F) on the orbit."""
        n, R, C = self.n, self.R, self.C
        F = np.asarray(F, dtype=float)
        return 1.0 - C * F ** (2 - n) - R * F**2 / (n * (n - 1))

    def potential_deriv(self, F):
        n, R, C = self.n, self.R, self.C
        F = np.asarray(F, dtype=float)
        return (n - 2) * C * F ** (1 - n) - 2.0 * R * F / (n * (n - 1))

    def rhs_second_order(self, F: float, Fp: float) -> float:
        """F'' = [(n-2)(1 - F'^2)/F - R F/(n-1)] / 2."""
        n, R = self.n, self.R
        return 0.5 * ((n - 2) * (1.0 - Fp**2) / F - R * F / (n - 1))

    def first_integral(self, F, Fp):
        """Conserved quantity F^{n-2}(1 - F'^2) - R F^n/(n(n-1))."""
        n, R = self.n, self.R
        F = np.asarray(F, dtype=float)
        Fp = np.asarray(Fp, dtype=float)
        return F ** (n - 2) * (1.0 - Fp**2) - R * F**n / (n * (n - 1))


def _bisect(fn, lo: float, hi: float, iters: int = 200) -> float:
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(lo)):
            break
    return 0.5 * (lo + hi)


def turning_points(ode: WarpODE) -> tuple[float, float]:
    """Roots 0 < Fmin < F0 < Fmax of the potential, with V > 0 in between.

    Bracketing bisection refined by Newton steps on V; the residual |V(root)|
    is driven to ~1e-15 relative to the summands of V.
    """
    f0 = static_solution(ode.n, ode.R)
    lo = f0
    while ode.potential(lo) > 0:
        lo *= 0.5
        if lo < 1e-12 * f0:
            raise RuntimeError("failed to bracket lower turning point")
    hi = f0
    while ode.potential(hi) > 0:
        hi *= 2.0
        if hi > 1e12 * f0:
            raise RuntimeError("failed to bracket upper turning point")

    roots = []
    for a, b in ((lo, f0), (f0, hi)):
        r = _bisect(ode.potential, a, b)
        for _ in range(4):  # Newton polish; V has simple roots here
            dv = ode.potential_deriv(r)
            if dv == 0:
                break
            r -= float(ode.potential(r) / dv)
        roots.append(float(r))
    fmin, fmax = sorted(roots)
    return fmin, fmax


@lru_cache(maxsize=16)
def _gauss_rule(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _period_quadrature(ode: WarpODE, fmin: float, fmax: float, order: int) -> float:
    """Gauss-Legendre value of 2*int dF/sqrt(V) after the cosine substitution.

    With F(theta) = mid - half*cos(theta), the product of root factors is
    (F - Fmin)(Fmax - F) = half^2 sin^2(theta), so the integrand
    2 / sqrt(V(F)/((F - Fmin)(Fmax - F))) is smooth up to the endpoints.
    """
    mid = 0.5 * (fmin + fmax)
    half = 0.5 * (fmax - fmin)
    nodes, weights = _gauss_rule(order)
    theta = 0.5 * np.pi * (nodes + 1.0)
    F = mid - half * np.cos(theta)
    smooth = ode.potential(F) / (half**2 * np.sin(theta) ** 2)
    vals = 1.0 / np.sqrt(smooth)
    return float(2.0 * (0.5 * np.pi) * np.dot(weights, vals))


def period(ode: WarpODE, rel_tol: float = 1e-11) -> float:
    """Period Lambda = 2*int_{Fmin}^{Fmax} dF/sqrt(V(F)), 1e-8 relative or better.

    The order of the singularity-absorbing quadrature is doubled until two
    consecutive values agree to rel_tol.  The default target sits well inside
    the 1e-8 relative contract because the profile integrator is run up to
    exactly this value of Lambda and its endpoint closure check inherits
    period errors at first order.  Near the degenerate C -> C_max limit the
    evaluation of V at the nearly-double root is cancellation-limited; once
    order doubling stops improving, the plateau value is accepted provided it
    still meets the 1e-8 contract.
    """
    fmin, fmax = turning_points(ode)
    order = 48
    prev = _period_quadrature(ode, fmin, fmax, order)
    best_diff = math.inf
    while order <= 3072:
        order *= 2
        cur = _period_quadrature(ode, fmin, fmax, order)
        diff = abs(cur - prev)
        if diff <= rel_tol * abs(cur):
            return cur
        if diff >= 0.5 * best_diff and diff <= 1e-9 * abs(cur):
            return cur  # rounding plateau inside the contract
        best_diff = min(best_diff, diff)
        prev = cur
    if best_diff <= 1e-8 * abs(prev):
        return prev
    raise RuntimeError(f"period quadrature failed to converge to {rel_tol!r} relative")


def period_by_integration(ode: WarpODE, rtol: float = 1e-12, atol: float = 1e-13) -> float:
    """Independent period oracle: time-integrate the ODE between turning points."""
    fmin, fmax = turning_points(ode)

    def rhs(t, y):
        return [y[1], ode.rhs_second_order(y[0], y[1])]

    def at_top(t, y):
        return y[1]

    at_top.terminal = True
    at_top.direction = -1.0
    upper = 4.0 * harmonic_period(ode.n, ode.R) + 10.0
    sol = solve_ivp(
        rhs,
        (0.0, upper),
        [fmin, 0.0],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=at_top,
        dense_output=False,
    )
    if not sol.t_events[0].size:
        raise RuntimeError("turning-point event not reached during integration")
    return float(2.0 * sol.t_events[0][0])


@dataclass
class WarpSolution:
    """A sampled periodic warping function over one period.

    The grid is uniform on [0, period] including both endpoints; F starts at
    the lower turning value with F'(0) = 0 and is symmetric about period/2.
    """

    ode: WarpODE
    period: float
    t: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    Fmin: float
    Fmax: float

    def conserved_defect(self) -> float:
        """Max |G(F, F') - C| over the grid."""
        return float(np.max(np.abs(self.ode.first_integral(self.F, self.Fp) - self.ode.C)))

    def closure_defect(self) -> float:
        """Max of |F(period) - F(0)| and |F'(period) - F'(0)|."""
        return float(
            max(abs(self.F[-1] - self.F[0]), abs(self.Fp[-1] - self.Fp[0]))
        )

    def symmetry_defect(self) -> float:
        """Max |F(period - t) - F(t)| over the grid."""
        return float(np.max(np.abs(self.F[::-1] - self.F)))

    # -- plain-text table round-trip -----------------------------------------

    def format_table(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# warp solution: n={self.ode.n} R={self.ode.R!r} "
            f"C={self.ode.C!r} period={self.period!r}\n"
        )
        buf.write("# columns: t F dF\n")
        for tk, fk, pk in zip(self.t, self.F, self.Fp):
            buf.write(f"{float(tk)!r} {float(fk)!r} {float(pk)!r}\n")
        return buf.getvalue()

    def save_table(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.format_table())


def load_table(path_or_text) -> WarpSolution:
    """Rebuild a WarpSolution from the plain-text table format."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# warp solution:"):
        raise ValueError("not a warp solution table")
    meta = dict(
        item.split("=", 1) for item in lines[0].split(":", 1)[1].split() if "=" in item
    )
    ode = WarpODE(n=int(meta["n"]), R=float(meta["R"]), C=float(meta["C"]))
    rows = np.array(
        [[float(v) for v in ln.split()] for ln in lines if not ln.startswith("#")]
    )
    return WarpSolution(
        ode=ode,
        period=float(meta["period"]),
        t=rows[:, 0],
        F=rows[:, 1],
        Fp=rows[:, 2],
        Fmin=float(np.min(rows[:, 1])),
        Fmax=float(np.max(rows[:, 1])),
    )


def solve(ode: WarpODE, grid_n: int = 512) -> WarpSolution:
    """Integrate one period of the warping ODE and resample to a uniform grid.

    Starts at the turning point (Fmin, 0), uses an adaptive 8th-order scheme
    (rtol 1e-12 / atol 1e-14; the first integral reaches O(10) at large static
    radius, and one notch beyond the nominal 1e-11/1e-13 keeps its absolute
    drift inside the 1e-9 budget) with dense output for the resampling, and
    enforces the solution invariants: first-integral defect <= 1e-9,
    periodicity closure <= 1e-8, time-reversal symmetry <= 1e-8.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    fmin, fmax = turning_points(ode)
    lam = period(ode)

    def rhs(t, y):
        return [y[1], ode.rhs_second_order(y[0], y[1])]

    sol = solve_ivp(
        rhs,
        (0.0, lam),
        [fmin, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
    )
    if not sol.success:
        raise IntegrationToleranceError(f"integrator failed: {sol.message}")
    t = np.linspace(0.0, lam, grid_n + 1)
    y = sol.sol(t)
    out = WarpSolution(
        ode=ode,
        period=lam,
        t=t,
        F=y[0],
        Fp=y[1],
        Fmin=fmin,
        Fmax=fmax,
    )
    defect = out.conserved_defect()
    if defect > 1e-9:
        raise IntegrationToleranceError(
            f"integrator tolerance not met: first-integral defect {defect!r}"
        )
    closure = out.closure_defect()
    if closure > 1e-8:
        raise IntegrationToleranceError(
            f"integrator tolerance not met: periodicity closure {closure!r}"
        )
    sym = out.symmetry_defect()
    if sym > 1e-8:
        raise IntegrationToleranceError(
            f"integrator tolerance not met: symmetry defect {sym!r}"
        )
    if np.min(out.F) <= 0:
        raise IntegrationToleranceError("warping function lost positivity")
    return out
