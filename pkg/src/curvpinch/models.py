"""Constructors for the model geometries as coordinate charts.

Three families of constant-scalar-curvature conformally flat metrics are
built, plus generic conformal test charts:

* ``sphere``    -- round sphere of radius rho in one stereographic chart,
                   g = (2 rho^2 / (rho^2 + |x|^2))^2 delta;
* ``product``   -- round product S^1(L) x S^{n-1}(r), a warped chart with
                   constant warping F = r and periodic t-axis;
* ``warped``    -- dt^2 + F(t)^2 g_S over the unit round fiber sphere, with a
                   non-constant periodic F supplied either analytically or as
                   a sampled :class:`~curvpinch.derdzinski.WarpSolution`
                   (trigonometric interpolation, budget 1e-9);
* ``conformal`` -- e^{2 phi} delta on a box for a polynomial/trigonometric phi.

The fiber sphere is charted stereographically, g_S = (2/(1+|y|^2))^2 delta;
rotational symmetry makes every verified quantity independent of the fiber
point, which is itself asserted by tests rather than assumed.  All built
charts provide analytic Christoffel symbols (the generic conformal formula
covers sphere and conformal charts); the finite-difference route stays
available for cross-checking.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .charts import MetricChart, Sym2Field
from .derdzinski import WarpODE, WarpSolution
from . import derdzinski


def unit_sphere_volume(dim: int) -> float:
    """Volume of the unit sphere S^dim, 2 pi^{(dim+1)/2} / Gamma((dim+1)/2)."""
    return float(2.0 * math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0))


# ---------------------------------------------------------------------------
# conformal factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiTerm:
    """One term of a conformal exponent phi: monomial or sinusoid.

    ``poly``: coef * prod_a x_a^{powers[a]};
    ``trig``: coef * sin(freq . x + phase).
    """

    kind: str
    coef: float
    powers: tuple[int, ...] = ()
    freq: tuple[float, ...] = ()
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("poly", "trig"):
            raise ValueError(f"unknown phi term kind {self.kind!r}")

    def value(self, x: np.ndarray) -> float:
        if self.kind == "poly":
            return self.coef * float(np.prod(x ** np.asarray(self.powers)))
        return self.coef * math.sin(float(np.dot(self.freq, x)) + self.phase)

    def grad(self, x: np.ndarray) -> np.ndarray:
        n = x.size
        if self.kind == "poly":
            p = np.asarray(self.powers, dtype=float)
            out = np.zeros(n)
            for a in range(n):
                if p[a] == 0:
                    continue
                pa = p.copy()
                pa[a] -= 1
                out[a] = self.coef * p[a] * float(np.prod(x**pa))
            return out
        k = np.asarray(self.freq, dtype=float)
        return self.coef * math.cos(float(np.dot(k, x)) + self.phase) * k


def phi_value(terms, x: np.ndarray) -> float:
    return sum(t.value(x) for t in terms)


def phi_grad(terms, x: np.ndarray) -> np.ndarray:
    g = np.zeros(x.size)
    for t in terms:
        g += t.grad(x)
    return g


def conformal_christoffel(dphi: np.ndarray) -> np.ndarray:
    """Gamma[k,i,j] of g = e^{2 phi} delta from the gradient of phi."""
    n = dphi.size
    eye = np.eye(n)
    return (
        np.einsum("ki,j->kij", eye, dphi)
        + np.einsum("kj,i->kij", eye, dphi)
        - np.einsum("ij,k->kij", eye, dphi)
    )


# ---------------------------------------------------------------------------
# warping-function sources
# ---------------------------------------------------------------------------


class TrigSeries:
    """Trigonometric interpolant of a smooth periodic function.

    Built from uniform samples over one period (without the duplicated
    endpoint); evaluates the function and its first two derivatives anywhere.
    Spectral accuracy makes the 1e-9 interpolation budget easy for analytic
    periodic data at a few hundred samples.

    Modes below the rounding floor of the sample transform are discarded:
    they carry no information but their k^2 amplification would dominate the
    noise of the differentiated series.  The default floor sits just above
    the transform noise of a ~1e-12-accurate sample set; pushing it lower
    admits noise modes, raising it clips genuine spectral content of strongly
    anharmonic profiles (visible as a curvature bias where F pinches).
    """

    def __init__(self, period: float, samples: np.ndarray, floor: float = 1e-13):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        coef = np.fft.rfft(samples) / n
        self.period = float(period)
        m = np.arange(coef.size)
        self.k = 2.0 * math.pi * m / self.period
        scale = np.full(coef.size, 2.0)
        scale[0] = 1.0
        if n % 2 == 0:
            scale[-1] = 1.0  # Nyquist mode appears once
        self.a = scale * coef.real
        self.b = -scale * coef.imag
        cutoff = floor * float(np.max(np.abs(self.a) + np.abs(self.b)))
        keep = np.nonzero(np.abs(self.a) + np.abs(self.b) > cutoff)[0]
        last = int(keep[-1]) + 1 if keep.size else 1
        self.a = self.a[:last]
        self.b = self.b[:last]
        self.k = self.k[:last]

    def value(self, t: float) -> float:
        kt = self.k * t
        return float(np.dot(self.a, np.cos(kt)) + np.dot(self.b, np.sin(kt)))

    def deriv1(self, t: float) -> float:
        kt = self.k * t
        return float(np.dot(-self.a * self.k, np.sin(kt)) + np.dot(self.b * self.k, np.cos(kt)))

    def deriv2(self, t: float) -> float:
        kt = self.k * t
        k2 = self.k**2
        return float(np.dot(-self.a * k2, np.cos(kt)) + np.dot(-self.b * k2, np.sin(kt)))


@dataclass(frozen=True)
class WarpParams:
    """Parameters (R, C, grid_n) from which a WarpSolution is solved on demand."""

    R: float
    C: float
    grid_n: int = 512


@dataclass
class AnalyticWarp:
    """A warping function given in closed form with its first two derivatives."""

    period: float
    F: object
    dF: object
    d2F: object


class WarpProfile:
    """Uniform (F, F', F'') interface over the admissible warp sources."""

    def __init__(self, source):
        if isinstance(source, WarpSolution):
            series = TrigSeries(source.period, source.F[:-1])
            self._check_interpolation(source, series)
            self.period = source.period
            self.F = series.value
            self.dF = series.deriv1
            # F'' through the governing equation: a smooth function of the
            # accurately interpolated (F, F'), free of the k^2-amplified
            # transform noise of the twice-differentiated series.
            ode = source.ode
            self.d2F = lambda t: ode.rhs_second_order(series.value(t), series.deriv1(t))
        elif isinstance(source, AnalyticWarp):
            self.period = source.period
            self.F = source.F
            self.dF = source.dF
            self.d2F = source.d2F
        else:
            raise TypeError(f"unsupported warp source {type(source).__name__}")

    @staticmethod
    def _check_interpolation(solution: WarpSolution, series: TrigSeries) -> None:
        """Grid-refinement audit of the interpolation budget (1e-9 relative).

        The half-grid interpolant is compared against the full-resolution
        samples at the points it did not see; the full-grid error is smaller
        still by spectral decay.
        """
        values = solution.F[:-1]
        if values.size % 2:
            return  # odd sample count: skip the dyadic audit
        half = TrigSeries(solution.period, values[::2])
        odd_t = solution.t[1:-1:2]
        err = max(abs(half.value(tk) - fk) for tk, fk in zip(odd_t, values[1::2]))
        budget = 1e-9 * max(1.0, float(np.max(np.abs(values))))
        if err > budget:
            raise ValueError(
                f"warp interpolation budget exceeded: half-grid error {err!r}"
            )


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------

FIBER_BOX_HALFWIDTH = 2.0


@dataclass
class ModelSpec:
    """Description of one model geometry (see module docstring for kinds)."""

    kind: str
    n: int
    radius: float = 1.0
    length: float = 2.0 * math.pi
    fiber_radius: float = 1.0
    warp: object | None = None  # WarpParams | WarpSolution | AnalyticWarp
    phi: tuple[PhiTerm, ...] = ()
    box_halfwidth: float | None = None
    fd_step: float = 1e-3
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("sphere", "product", "warped", "conformal"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.n < 3:
            raise ValueError("dimension must be >= 3")
        if self.kind == "sphere" and self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        if self.kind == "product" and (self.length <= 0 or self.fiber_radius <= 0):
            raise ValueError("product circle length and fiber radius must be positive")
        if self.kind == "warped" and self.warp is None:
            raise ValueError("warped model needs a warp source")
        if not self.name:
            self.name = f"{self.kind}-n{self.n}"


def _resolve_warp(spec: ModelSpec) -> WarpProfile:
    src = spec.warp
    if isinstance(src, WarpParams):
        src = derdzinski.solve(WarpODE(spec.n, src.R, src.C), src.grid_n)
    return WarpProfile(src)


def _fiber_log_grad(y: np.ndarray) -> np.ndarray:
    """Gradient of log(2/(1+|y|^2)), the conformal exponent of the fiber sphere."""
    return -2.0 * y / (1.0 + float(y @ y))


def _warped_chart(spec: ModelSpec, profile: WarpProfile) -> MetricChart:
    n = spec.n
    m = n - 1

    # The finite-difference step is relative to the geometry scale: a small
    # warping radius shortens every curvature length, and a fixed absolute h
    # would lose its truncation margin there.
    f_floor = min(
        profile.F(k * profile.period / 64.0) for k in range(64)
    )
    fd_step = spec.fd_step * min(1.0, f_floor)

    def metric_fn(x: np.ndarray) -> np.ndarray:
        y = x[1:]
        psi = 2.0 / (1.0 + float(y @ y))
        g = np.zeros((n, n))
        g[0, 0] = 1.0
        g[1:, 1:] = (profile.F(x[0]) * psi) ** 2 * np.eye(m)
        return g

    def christoffel_fn(x: np.ndarray) -> np.ndarray:
        t, y = x[0], x[1:]
        F = profile.F(t)
        Fp = profile.dF(t)
        psi = 2.0 / (1.0 + float(y @ y))
        dlog = _fiber_log_grad(y)
        gamma = np.zeros((n, n, n))
        gamma[0, 1:, 1:] = -F * Fp * psi**2 * np.eye(m)
        ratio = Fp / F
        for a in range(m):
            gamma[1 + a, 0, 1 + a] = ratio
            gamma[1 + a, 1 + a, 0] = ratio
        eye = np.eye(m)
        gamma[1:, 1:, 1:] = (
            np.einsum("ab,c->abc", eye, dlog)
            + np.einsum("ac,b->abc", eye, dlog)
            - np.einsum("bc,a->abc", eye, dlog)
        )
        return gamma

    box = ((0.0, profile.period),) + ((-FIBER_BOX_HALFWIDTH, FIBER_BOX_HALFWIDTH),) * m
    periods = (profile.period,) + (None,) * m
    return MetricChart(
        n=n,
        box=box,
        metric_fn=metric_fn,
        christoffel_fn=christoffel_fn,
        periods=periods,
        fd_step=fd_step,
        name=spec.name,
    )


def build_chart(spec: ModelSpec) -> MetricChart:
    """Realize a model specification as a MetricChart."""
    n = spec.n
    if spec.kind == "sphere":
        rho2 = spec.radius**2
        half = spec.box_halfwidth if spec.box_halfwidth is not None else 2.0 * spec.radius

        def metric_fn(x: np.ndarray) -> np.ndarray:
            conf = 2.0 * rho2 / (rho2 + float(x @ x))
            return conf**2 * np.eye(n)

        def christoffel_fn(x: np.ndarray) -> np.ndarray:
            return conformal_christoffel(-2.0 * x / (rho2 + float(x @ x)))

        return MetricChart(
            n=n,
            box=((-half, half),) * n,
            metric_fn=metric_fn,
            christoffel_fn=christoffel_fn,
            fd_step=spec.fd_step * min(1.0, spec.radius),
            name=spec.name,
        )

    if spec.kind == "conformal":
        half = spec.box_halfwidth if spec.box_halfwidth is not None else 0.5
        terms = spec.phi

        def metric_fn(x: np.ndarray) -> np.ndarray:
            return math.exp(2.0 * phi_value(terms, x)) * np.eye(n)

        def christoffel_fn(x: np.ndarray) -> np.ndarray:
            return conformal_christoffel(phi_grad(terms, x))

        return MetricChart(
            n=n,
            box=((-half, half),) * n,
            metric_fn=metric_fn,
            christoffel_fn=christoffel_fn,
            fd_step=spec.fd_step,
            name=spec.name,
        )

    return _warped_chart(spec, warp_profile(spec))


# ---------------------------------------------------------------------------
# closed-form curvature of the warped families (validated against FD)
# ---------------------------------------------------------------------------


def warp_profile(spec: ModelSpec) -> WarpProfile:
    cached = getattr(spec, "_profile_cache", None)
    if cached is None:
        if spec.kind == "product":
            r = spec.fiber_radius
            cached = WarpProfile(
                AnalyticWarp(spec.length, lambda t: r, lambda t: 0.0, lambda t: 0.0)
            )
        else:
            cached = _resolve_warp(spec)
        object.__setattr__(spec, "_profile_cache", cached)
    return cached


def closed_form_curvature(spec: ModelSpec, t: float) -> tuple[tuple[float, float], float]:
    """Ricci eigenvalues and scalar curvature of a product/warped model at t.

    Returns ((ric_tt, ric_fiber), R) with

        ric_tt    = -(n-1) F''/F,
        ric_fiber = ((n-2)(1 - F'^2) - F F'') / F^2,
        R         = -2(n-1) F''/F + (n-1)(n-2)(1 - F'^2)/F^2,

    eigenvalues taken relative to the metric.  For sampled warp sources F''
    closes through the governing equation, so the standing finite-difference
    agreement test on the built chart (whose metric sees only the sampled F)
    validates both these formulas and that closure.
    """
    if spec.kind not in ("product", "warped"):
        raise ValueError(f"closed-form curvature needs a product/warped model, got {spec.kind!r}")
    prof = warp_profile(spec)
    n = spec.n
    F = prof.F(t)
    Fp = prof.dF(t)
    Fpp = prof.d2F(t)
    ric_tt = -(n - 1) * Fpp / F
    ric_fib = ((n - 2) * (1.0 - Fp**2) - F * Fpp) / F**2
    R = -2.0 * (n - 1) * Fpp / F + (n - 1) * (n - 2) * (1.0 - Fp**2) / F**2
    return (float(ric_tt), float(ric_fib)), float(R)


def reference_scalar_curvature(spec: ModelSpec) -> float:
    """Constant scalar curvature of a model geometry."""
    n = spec.n
    if spec.kind == "sphere":
        return n * (n - 1) / spec.radius**2
    if spec.kind == "product":
        return (n - 1) * (n - 2) / spec.fiber_radius**2
    if spec.kind == "warped":
        src = spec.warp
        if isinstance(src, WarpParams):
            return src.R
        if isinstance(src, WarpSolution):
            return src.ode.R
        _, R = closed_form_curvature(spec, 0.0)
        return R
    raise ValueError("conformal charts have no constant reference curvature")


def closed_form_e_field(spec: ModelSpec, chart: MetricChart) -> Sym2Field:
    """Trace-free Ricci field of a model from the closed-form curvature."""
    n = spec.n
    if spec.kind == "sphere":
        zero = np.zeros((n, n))
        return Sym2Field(chart=chart, eval=lambda x: zero.copy(), reach=0.0, name="E")
    if spec.kind == "conformal":
        raise ValueError("no closed-form curvature for generic conformal charts")

    def ev(x: np.ndarray) -> np.ndarray:
        (ric_tt, ric_fib), R = closed_form_curvature(spec, float(x[0]))
        g = chart.metric_at(x)
        E = (ric_fib - R / n) * g
        E[0, 0] = ric_tt - R / n
        return E

    return Sym2Field(chart=chart, eval=ev, reach=0.0, name="E")


def closed_form_schouten_field(spec: ModelSpec, chart: MetricChart) -> Sym2Field:
    """Schouten field of a model from the closed-form curvature."""
    n = spec.n
    if spec.kind == "sphere":
        coef = 1.0 / (2.0 * spec.radius**2)
        return Sym2Field(
            chart=chart, eval=lambda x: coef * chart.metric_at(x), reach=0.0, name="A"
        )
    if spec.kind == "conformal":
        raise ValueError("no closed-form curvature for generic conformal charts")

    def ev(x: np.ndarray) -> np.ndarray:
        (ric_tt, ric_fib), R = closed_form_curvature(spec, float(x[0]))
        g = chart.metric_at(x)
        ric = ric_fib * g
        ric[0, 0] = ric_tt
        return (ric - (R / (2.0 * (n - 1))) * g) / (n - 2)

    return Sym2Field(chart=chart, eval=ev, reach=0.0, name="A")


# ---------------------------------------------------------------------------
# chart corpus configuration (TOML)
# ---------------------------------------------------------------------------

CORPUS_ENV_VAR = "CURVPINCH_CORPUS"

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml


def _phi_to_dict(term: PhiTerm) -> dict:
    d = {"type": term.kind, "coef": term.coef}
    if term.kind == "poly":
        d["powers"] = list(term.powers)
    else:
        d["freq"] = list(term.freq)
        d["phase"] = term.phase
    return d


def _phi_from_dict(d: dict) -> PhiTerm:
    kind = d["type"]
    if kind == "poly":
        return PhiTerm(kind="poly", coef=float(d["coef"]), powers=tuple(int(p) for p in d["powers"]))
    return PhiTerm(
        kind="trig",
        coef=float(d["coef"]),
        freq=tuple(float(f) for f in d["freq"]),
        phase=float(d.get("phase", 0.0)),
    )


def spec_to_dict(spec: ModelSpec) -> dict:
    d: dict = {"kind": spec.kind, "n": spec.n, "name": spec.name, "fd_step": spec.fd_step}
    if spec.box_halfwidth is not None:
        d["box_halfwidth"] = spec.box_halfwidth
    if spec.kind == "sphere":
        d["radius"] = spec.radius
    elif spec.kind == "product":
        d["length"] = spec.length
        d["fiber_radius"] = spec.fiber_radius
    elif spec.kind == "warped":
        src = spec.warp
        if isinstance(src, WarpSolution):
            src = WarpParams(R=src.ode.R, C=src.ode.C, grid_n=src.t.size - 1)
        if not isinstance(src, WarpParams):
            raise ValueError("only parameterized warp sources are serializable")
        d["scalar_curvature"] = src.R
        d["first_integral"] = src.C
        d["grid_n"] = src.grid_n
    else:
        d["phi"] = [_phi_to_dict(t) for t in spec.phi]
    return d


def spec_from_dict(d: dict) -> ModelSpec:
    kind = d["kind"]
    common = dict(
        kind=kind,
        n=int(d["n"]),
        name=d.get("name", ""),
        fd_step=float(d.get("fd_step", 1e-3)),
        box_halfwidth=float(d["box_halfwidth"]) if "box_halfwidth" in d else None,
    )
    if kind == "sphere":
        return ModelSpec(radius=float(d["radius"]), **common)
    if kind == "product":
        return ModelSpec(
            length=float(d["length"]), fiber_radius=float(d["fiber_radius"]), **common
        )
    if kind == "warped":
        return ModelSpec(
            warp=WarpParams(
                R=float(d["scalar_curvature"]),
                C=float(d["first_integral"]),
                grid_n=int(d.get("grid_n", 512)),
            ),
            **common,
        )
    return ModelSpec(phi=tuple(_phi_from_dict(t) for t in d.get("phi", [])), **common)


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        r = repr(float(v))
        return r if any(c in r for c in ".einf") else r + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def dumps_corpus(specs) -> str:
    """Deterministic TOML text for a list of model specifications."""
    lines: list[str] = []
    for spec in specs:
        d = spec_to_dict(spec)
        phi = d.pop("phi", None)
        lines.append("[[chart]]")
        for key, val in d.items():
            lines.append(f"{key} = {_toml_scalar(val)}")
        if phi is not None:
            for term in phi:
                lines.append("")
                lines.append("[[chart.phi]]")
                for key, val in term.items():
                    lines.append(f"{key} = {_toml_scalar(val)}")
        lines.append("")
    return "\n".join(lines)


def save_corpus(specs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_corpus(specs))


def loads_corpus(text: str) -> list[ModelSpec]:
    data = _toml.loads(text)
    return [spec_from_dict(d) for d in data.get("chart", [])]


def load_corpus(path) -> list[ModelSpec]:
    with open(path, "rb") as fh:
        data = _toml.load(fh)
    return [spec_from_dict(d) for d in data.get("chart", [])]


def resolve_corpus_path(explicit: str | None = None) -> str | None:
    """Explicit path, else the CURVPINCH_CORPUS environment variable, else None."""
    if explicit:
        return explicit
    return os.environ.get(CORPUS_ENV_VAR) or None


def _conformal_recipes(n: int) -> list[tuple[PhiTerm, ...]]:
    """Five fixed polynomial/trigonometric conformal exponents in dimension n."""

    def powers(vals):
        return tuple(list(vals) + [0] * (n - len(vals)))

    def freqs(vals):
        return tuple([float(v) for v in vals] + [0.0] * (n - len(vals)))

    return [
        (
            PhiTerm("poly", 0.15, powers=powers([2])),
            PhiTerm("poly", -0.1, powers=powers([1, 1])),
        ),
        (
            PhiTerm("poly", 0.1, powers=powers([3])),
            PhiTerm("poly", 0.08, powers=powers([0, 2])),
            PhiTerm("poly", -0.05, powers=powers([0, 1, 1])),
        ),
        (PhiTerm("trig", 0.12, freq=freqs([1.0]), phase=0.3),),
        (
            PhiTerm("trig", 0.07, freq=freqs([1.0, 2.0]), phase=0.1),
            PhiTerm("trig", 0.05, freq=freqs([0.0, 1.0, -1.0]), phase=0.7),
        ),
        (
            PhiTerm("poly", 0.09, powers=powers([1, 0, 1])),
            PhiTerm("trig", 0.06, freq=freqs([0.0, 2.0]), phase=0.4),
        ),
    ]


def default_corpus(ns=(3, 4, 5)) -> list[ModelSpec]:
    """Standard chart corpus: sphere, product, warped, five conformal charts per n."""
    specs: list[ModelSpec] = []
    for n in ns:
        specs.append(ModelSpec(kind="sphere", n=n, radius=1.0, name=f"sphere-n{n}"))
        specs.append(
            ModelSpec(
                kind="product",
                n=n,
                length=2.0 * math.pi,
                fiber_radius=1.0,
                name=f"product-n{n}",
            )
        )
        # Warped instance normalized so the static radius is 1 (R = (n-1)(n-2))
        # with C at 90% of the admissible ceiling: a genuinely non-constant
        # warping with moderate oscillation, matching the canonical
        # (n=4, R=6, C=0.45) instance.  Closer to C -> 0 the e-field spikes
        # like F^{-n} and the nested-FD Laplacian budgets degrade.
        r_norm = float((n - 1) * (n - 2))
        _, c_max = derdzinski.admissible_range(n, r_norm)
        specs.append(
            ModelSpec(
                kind="warped",
                n=n,
                warp=WarpParams(R=r_norm, C=0.9 * c_max, grid_n=512),
                name=f"warped-n{n}",
            )
        )
        for idx, terms in enumerate(_conformal_recipes(n), start=1):
            specs.append(
                ModelSpec(kind="conformal", n=n, phi=terms, name=f"conformal{idx}-n{n}")
            )
    return specs
