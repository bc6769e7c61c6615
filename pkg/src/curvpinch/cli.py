"""Command-line verification driver.

Four subcommands mirror the library's verification suites:

* ``verify-identities`` -- random-input property suites for the pointwise
  curvature algebra (decomposition identities, sharp cubic inequality);
* ``verify-models``     -- identity residuals of the chart corpus (conformal
  flatness, curvature symmetries, Codazzi/Weitzenboeck/Kato suite on the
  constant-curvature charts);
* ``derdzinski``        -- build one periodic warping function, validate its
  invariants, and emit the sample table;
* ``pinch``             -- evaluate the pinching functional, the regularized
  integral series, and the equality-case scan on one model geometry.

Reports are JSON with a versioned schema; a human summary goes to stdout.
Exit status: 0 if every asserted tolerance passes, 1 with the failing
residual named otherwise, 2 for usage errors.  With a fixed ``--seed`` the
report bytes are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import charts, derdzinski, models, pinching, tensor_core as tc

REPORT_SCHEMA = "curvpinch-report/1"


@dataclass
class Check:
    """One named residual with its tolerance."""

    name: str
    value: float
    threshold: float
    comparison: str = "<="  # "<=" or ">="

    @property
    def passed(self) -> bool:
        if self.comparison == "<=":
            return bool(self.value <= self.threshold)
        return bool(self.value >= self.threshold)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "comparison": self.comparison,
            "pass": self.passed,
        }


def build_report(command: str, seed, parameters: dict, checks: list[Check], extra=None) -> dict:
    report = {
        "schema": REPORT_SCHEMA,
        "command": command,
        "seed": seed,
        "parameters": parameters,
        "checks": [c.to_dict() for c in checks],
        "pass": all(c.passed for c in checks),
    }
    if extra:
        report["data"] = extra
    return report


def emit_report(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    for check in report["checks"]:
        flag = "pass" if check["pass"] else "FAIL"
        print(
            f"[{flag}] {check['name']}: {check['value']:.6e} "
            f"{check['comparison']} {check['threshold']:.6e}"
        )
    print(("PASS" if report["pass"] else "FAIL") + f" ({report['command']})")


def finish(report: dict) -> int:
    if report["pass"]:
        return 0
    failing = [c["name"] for c in report["checks"] if not c["pass"]]
    print("failing: " + ", ".join(failing), file=sys.stderr)
    return 1


class ConfigError(ValueError):
    """Malformed configuration input (usage error, exit status 2)."""


def parse_tolerance_overrides(pairs) -> list[tuple[str, float]]:
    overrides = []
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"malformed tolerance override {pair!r}, expected NAME=VALUE")
        name, _, value = pair.partition("=")
        try:
            overrides.append((name, float(value)))
        except ValueError as exc:
            raise ConfigError(f"malformed tolerance override {pair!r}: {exc}") from exc
    return overrides


def apply_tolerance_overrides(checks: list[Check], overrides) -> None:
    """Replace thresholds of every check whose name contains the override key."""
    for name, value in overrides:
        hit = False
        for check in checks:
            if name in check.name:
                check.threshold = value
                hit = True
        if not hit:
            raise ConfigError(f"tolerance override {name!r} matches no check")


# ---------------------------------------------------------------------------
# verify-identities
# ---------------------------------------------------------------------------


def identity_checks(seed: int, samples: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks: list[Check] = []
    dims = (3, 4, 5, 6)
    for n in dims:
        # conformally flat curvature identity, direct versus closed form
        worst = 0.0
        chunk = 500
        remaining = samples
        while remaining > 0:
            m = min(chunk, remaining)
            remaining -= m
            pert = 0.1 * rng.standard_normal((m, n, n))
            g = np.eye(n) + 0.5 * (pert + np.transpose(pert, (0, 2, 1)))
            ginv = np.linalg.inv(g)
            raw = rng.standard_normal((m, n, n))
            S = 0.5 * (raw + np.transpose(raw, (0, 2, 1)))
            tr = np.einsum("bij,bij->b", ginv, S)
            E = S - tr[:, None, None] * g / n
            R = rng.uniform(-5.0, 10.0, size=m)
            q_direct, q_formula = tc.q_invariant_batch(g, E, R)
            rel = np.abs(q_direct - q_formula) / np.maximum(1.0, np.abs(q_direct))
            worst = max(worst, float(np.max(rel)))
        checks.append(Check(f"q-identity-rel-defect-n{n}", worst, 1e-10))

        # sharp cubic inequality on random trace-free tensors
        E = tc.random_trace_free_batch(rng, samples, n)
        gaps = tc.okumura_gap_batch(E)
        scale = np.maximum(1.0, np.einsum("bij,bij->b", E, E) ** 1.5)
        checks.append(
            Check(f"okumura-min-gap-n{n}", float(np.min(gaps / scale)), -1e-12, ">=")
        )

        # equality on constructed (n-1, 1) patterns with nonnegative cluster
        lams = rng.uniform(0.0, 2.0, size=samples)
        eq_worst = 0.0
        for lam in lams[: min(samples, 2000)]:
            q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            ev = np.full(n, lam)
            ev[-1] = -(n - 1) * lam
            Epat = q @ np.diag(ev) @ q.T
            gap = tc.okumura_gap_batch(Epat[None])[0]
            eq_worst = max(eq_worst, abs(gap) / max(1.0, np.sum(ev**2) ** 1.5))
        checks.append(Check(f"okumura-equality-n{n}", eq_worst, 1e-10))

    # decomposition round trip and trace laws at random inputs
    recon_worst = 0.0
    trace_worst = 0.0
    schouten_worst = 0.0
    for n in dims:
        for _ in range(20):
            pert = 0.1 * rng.standard_normal((n, n))
            g = np.eye(n) + 0.5 * (pert + pert.T)
            E = tc.random_trace_free_batch(rng, 1, n, g)[0]
            R = float(rng.uniform(-5.0, 10.0))
            riem = tc.cf_riemann_from_ricci(g, E, R)
            ric = tc.ricci_contraction(g, riem)
            W = tc.weyl_from(g, riem, ric, tc.trace(g, ric))
            back = tc.reassemble_riemann(g, W, ric, tc.trace(g, ric))
            scale = max(1.0, float(np.max(np.abs(riem))))
            recon_worst = max(recon_worst, float(np.max(np.abs(back - riem))) / scale)
            ginv = tc.inverse_metric(g)
            trace_worst = max(
                trace_worst,
                float(np.max(np.abs(np.einsum("kl,ikjl->ij", ginv, W)))) / scale,
            )
            A = tc.schouten(g, ric, tc.trace(g, ric))
            schouten_worst = max(
                schouten_worst,
                abs(tc.trace(g, A) - tc.trace(g, ric) / (2 * (n - 1)))
                / max(1.0, abs(tc.trace(g, ric))),
            )
    checks.append(Check("weyl-reassembly", recon_worst, 1e-14))
    checks.append(Check("weyl-trace-free", trace_worst, 1e-10))
    checks.append(Check("schouten-trace-law", schouten_worst, 1e-12))
    return checks


# ---------------------------------------------------------------------------
# verify-models
# ---------------------------------------------------------------------------


def model_chart_checks(
    spec: models.ModelSpec,
    points: int,
    field_points: int,
    rng: np.random.Generator,
) -> list[Check]:
    checks: list[Check] = []
    chart = models.build_chart(spec)
    name = spec.name
    pts = chart.sample_points(points, rng)

    checks.append(
        Check(
            f"{name}/positive-definite",
            1.0 if charts.positive_definite_audit(chart, pts) else 0.0,
            1.0,
            ">=",
        )
    )
    if chart.christoffel_fn is not None:
        checks.append(
            Check(
                f"{name}/christoffel-consistency",
                charts.christoffel_consistency(chart, pts[: min(points, 25)]),
                1e-6,
            )
        )

    sym_worst = bianchi_worst = contr_worst = 0.0
    weyl_worst = cotton_worst = div_worst = recon_worst = 0.0
    for x in pts:
        g = chart.metric_at(x)
        jet = charts.curvature_jet(chart, x)
        riem, ric = jet.riem, jet.ric
        scale = max(1.0, float(np.max(np.abs(riem))))
        sym_worst = max(
            sym_worst,
            float(np.max(np.abs(riem - np.einsum("jlik->ikjl", riem)))) / scale,
        )
        bianchi = riem + np.einsum("kjil->ikjl", riem) + np.einsum("jikl->ikjl", riem)
        bianchi_worst = max(bianchi_worst, float(np.max(np.abs(bianchi))) / scale)
        contr_worst = max(
            contr_worst,
            float(np.max(np.abs(np.einsum("kl,ikjl->ij", jet.ginv, riem) - ric)))
            / scale,
        )
        W = tc.weyl_from(g, riem, ric, jet.scal)
        weyl_worst = max(weyl_worst, float(np.max(np.abs(W))))
        cotton_worst = max(cotton_worst, float(np.max(np.abs(jet.cotton))))
        if chart.n >= 4:
            div_worst = max(div_worst, jet.weyl_divergence_defect())
        E = ric - (jet.scal / chart.n) * g
        recon = tc.cf_riemann_from_ricci(g, E, jet.scal)
        recon_worst = max(recon_worst, float(np.max(np.abs(recon - riem))))
    checks.append(Check(f"{name}/riemann-pair-symmetry", sym_worst, 1e-7))
    checks.append(Check(f"{name}/riemann-first-bianchi", bianchi_worst, 1e-7))
    checks.append(Check(f"{name}/riemann-ricci-contraction", contr_worst, 1e-7))
    checks.append(Check(f"{name}/weyl-vanishing", weyl_worst, 1e-6))
    checks.append(Check(f"{name}/cotton-vanishing", cotton_worst, 1e-6))
    if chart.n >= 4:
        checks.append(Check(f"{name}/weyl-divergence-identity", div_worst, 1e-5))
    checks.append(Check(f"{name}/cf-curvature-reconstruction", recon_worst, 1e-6))

    if spec.kind in ("sphere", "product", "warped"):
        e_field = models.closed_form_e_field(spec, chart)
        a_field = models.closed_form_schouten_field(spec, chart)
        fpts = chart.sample_points(field_points, rng)
        cod = ell = wb = 0.0
        kato_min = 0.0
        for x in fpts:
            cod = max(cod, charts.codazzi_defect_at(chart, e_field, x))
            cod = max(cod, charts.codazzi_defect_at(chart, a_field, x))
            if spec.kind != "sphere":  # E vanishes identically on the sphere
                ell = max(ell, charts.elliptic_residual_at(chart, e_field, x))
                wb = max(wb, charts.weitzenbock_residual_at(chart, e_field, x))
                kato_min = min(kato_min, charts.kato_gap_at(chart, e_field, x))
        checks.append(Check(f"{name}/codazzi-defect", cod, 1e-6))
        if spec.kind != "sphere":
            checks.append(Check(f"{name}/elliptic-residual", ell, 1e-5))
            checks.append(Check(f"{name}/weitzenbock-residual", wb, 1e-5))
            checks.append(Check(f"{name}/kato-gap-min", kato_min, -1e-7, ">="))
    return checks


# ---------------------------------------------------------------------------
# derdzinski / pinch commands
# ---------------------------------------------------------------------------


def derdzinski_checks(
    n: int, R: float, C: float, grid_n: int, scalar_points: int, rng
) -> tuple[list[Check], derdzinski.WarpSolution]:
    ode = derdzinski.WarpODE(n, R, C)
    sol = derdzinski.solve(ode, grid_n)
    checks = [
        Check("first-integral-defect", sol.conserved_defect(), 1e-9),
        Check("periodicity-closure", sol.closure_defect(), 1e-8),
        Check("time-reversal-symmetry", sol.symmetry_defect(), 1e-8),
        Check(
            "turning-point-attainment",
            max(abs(float(np.min(sol.F)) - sol.Fmin), abs(float(np.max(sol.F)) - sol.Fmax)),
            1e-8,
        ),
        Check(
            "potential-root-residual",
            max(abs(float(ode.potential(sol.Fmin))), abs(float(ode.potential(sol.Fmax)))),
            1e-12,
        ),
        Check(
            "period-cross-agreement",
            abs(sol.period - derdzinski.period_by_integration(ode)) / sol.period,
            1e-7,
        ),
    ]
    spec = models.ModelSpec(kind="warped", n=n, warp=sol, name=f"warped-n{n}")
    chart = models.build_chart(spec)
    pts = chart.sample_points(scalar_points, rng)
    worst = max(abs(charts.scalar_at(chart, x) - R) for x in pts)
    checks.append(Check("built-chart-scalar-curvature", worst, 1e-6))
    return checks, sol


def pinch_checks(spec: models.ModelSpec, report: pinching.PinchReport) -> list[Check]:
    checks: list[Check] = []
    name = spec.name
    if spec.kind == "sphere":
        checks.append(Check(f"{name}/P-equality", abs(report.P), 0.0))
        checks.append(Check(f"{name}/max-integrand", report.max_integrand, 0.0))
    elif spec.kind == "product":
        checks.append(Check(f"{name}/P-equality", abs(report.P), 1e-12))
        checks.append(Check(f"{name}/max-integrand", report.max_integrand, 1e-10))
    else:
        checks.append(
            Check(f"{name}/P-equality-relative", abs(report.P), 1e-6 * report.positive_part)
        )
        cancel_scale = (
            0.01 * report.scalar_curvature * report.max_norm_e ** ((spec.n - 2) / spec.n)
        )
        checks.append(
            Check(f"{name}/nontrivial-cancellation", report.max_integrand, cancel_scale, ">=")
        )
        checks.append(
            Check(f"{name}/min-norm-E-positive", report.min_norm_e, 1e-8, ">=")
        )
    checks.append(
        Check(
            f"{name}/quadrature-doubling",
            report.quadrature_error,
            1e-8 * max(1.0, report.positive_part),
        )
    )
    for eps, val in report.reg_series:
        checks.append(Check(f"{name}/regularized-integral-eps{eps:g}", val, 1e-6))
    series_vals = [v for _, v in report.reg_series]
    cauchy = max(
        (abs(b - a) for a, b in zip(series_vals, series_vals[1:])), default=0.0
    )
    checks.append(Check(f"{name}/regularized-series-cauchy", cauchy, 1e-6))
    checks.append(Check(f"{name}/pattern-fraction", report.pattern_fraction, 1.0, ">="))
    checks.append(
        Check(
            f"{name}/okumura-gap-scan",
            report.max_okumura_gap,
            1e-8 * max(1.0, report.max_norm_e**3),
        )
    )
    if not np.isnan(report.min_pattern_lambda):
        checks.append(
            Check(f"{name}/pattern-lambda-min", report.min_pattern_lambda, -1e-8, ">=")
        )
    return checks


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvpinch",
        description="numerical verification of curvature identities and integral pinching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("verify-identities", help="random-input algebra suites")
    p_id.add_argument("--seed", type=int, default=0)
    p_id.add_argument("--samples", type=int, default=10000)
    p_id.add_argument("--out", type=str, default=None)
    p_id.add_argument("--tol", action="append", metavar="NAME=VALUE",
        help="override the threshold of every check whose name contains NAME")

    p_mod = sub.add_parser("verify-models", help="chart corpus identity residuals")
    p_mod.add_argument("--corpus", type=str, default=None, help="TOML corpus path")
    p_mod.add_argument("--points", type=int, default=20)
    p_mod.add_argument("--field-points", type=int, default=5)
    p_mod.add_argument("--seed", type=int, default=0)
    p_mod.add_argument("--out", type=str, default=None)
    p_mod.add_argument("--tol", action="append", metavar="NAME=VALUE",
        help="override the threshold of every check whose name contains NAME")

    p_der = sub.add_parser("derdzinski", help="build and validate a warping function")
    p_der.add_argument("--n", type=int, required=True)
    p_der.add_argument("--R", type=float, required=True)
    p_der.add_argument("--C", type=float, required=True)
    p_der.add_argument("--grid-n", type=int, default=512)
    p_der.add_argument("--scalar-points", type=int, default=20)
    p_der.add_argument("--seed", type=int, default=0)
    p_der.add_argument("--table", type=str, default=None,
        help="write the sample table here instead of printing it")
    p_der.add_argument("--out", type=str, default=None)
    p_der.add_argument("--tol", action="append", metavar="NAME=VALUE",
        help="override the threshold of every check whose name contains NAME")

    p_pin = sub.add_parser("pinch", help="pinching functional on a model geometry")
    p_pin.add_argument(
        "--model", choices=("sphere", "product", "derdzinski"), required=True
    )
    p_pin.add_argument("--n", type=int, default=4)
    p_pin.add_argument("--radius", type=float, default=1.0, help="sphere radius")
    p_pin.add_argument("--L", type=float, default=2 * np.pi, help="product circle length")
    p_pin.add_argument("--r", type=float, default=1.0, help="product fiber radius")
    p_pin.add_argument("--R", type=float, default=6.0, help="warped scalar curvature")
    p_pin.add_argument("--C", type=float, default=0.45, help="warped first integral")
    p_pin.add_argument("--grid-n", type=int, default=512)
    p_pin.add_argument("--samples", type=int, default=100)
    p_pin.add_argument("--seed", type=int, default=0)
    p_pin.add_argument("--out", type=str, default=None)
    p_pin.add_argument("--tol", action="append", metavar="NAME=VALUE",
        help="override the threshold of every check whose name contains NAME")
    return parser


def run(args) -> int:
    overrides = parse_tolerance_overrides(getattr(args, "tol", None))

    if args.command == "verify-identities":
        checks = identity_checks(args.seed, args.samples)
        apply_tolerance_overrides(checks, overrides)
        report = build_report(
            "verify-identities",
            args.seed,
            {"samples": args.samples},
            checks,
        )
        emit_report(report, args.out)
        return finish(report)

    if args.command == "verify-models":
        corpus_path = models.resolve_corpus_path(args.corpus)
        if corpus_path:
            try:
                specs = models.load_corpus(corpus_path)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot read corpus {corpus_path!r}: {exc}") from exc
        else:
            specs = models.default_corpus()
        rng = np.random.default_rng(args.seed)
        checks: list[Check] = []
        for spec in specs:
            checks.extend(model_chart_checks(spec, args.points, args.field_points, rng))
        apply_tolerance_overrides(checks, overrides)
        report = build_report(
            "verify-models",
            args.seed,
            {
                "corpus": corpus_path or "builtin-default",
                "points": args.points,
                "field_points": args.field_points,
                "charts": [spec.name for spec in specs],
            },
            checks,
        )
        emit_report(report, args.out)
        return finish(report)

    if args.command == "derdzinski":
        rng = np.random.default_rng(args.seed)
        checks, sol = derdzinski_checks(
            args.n, args.R, args.C, args.grid_n, args.scalar_points, rng
        )
        apply_tolerance_overrides(checks, overrides)
        if args.table:
            sol.save_table(args.table)
        else:
            print(sol.format_table(), end="")
        report = build_report(
            "derdzinski",
            args.seed,
            {"n": args.n, "R": args.R, "C": args.C, "grid_n": args.grid_n},
            checks,
            extra={
                "period": sol.period,
                "Fmin": sol.Fmin,
                "Fmax": sol.Fmax,
                "table": args.table,
            },
        )
        emit_report(report, args.out)
        return finish(report)

    if args.command == "pinch":
        if args.model == "sphere":
            spec = models.ModelSpec(kind="sphere", n=args.n, radius=args.radius)
        elif args.model == "product":
            spec = models.ModelSpec(
                kind="product", n=args.n, length=args.L, fiber_radius=args.r
            )
        else:
            spec = models.ModelSpec(
                kind="warped",
                n=args.n,
                warp=models.WarpParams(R=args.R, C=args.C, grid_n=args.grid_n),
                name=f"derdzinski-n{args.n}",
            )
        rng = np.random.default_rng(args.seed)
        report_data = pinching.full_report(
            spec, samples=args.samples, grid_n=args.grid_n, rng=rng
        )
        checks = pinch_checks(spec, report_data)
        apply_tolerance_overrides(checks, overrides)
        report = build_report(
            "pinch",
            args.seed,
            {"model": args.model, "n": args.n, "grid_n": args.grid_n, "samples": args.samples},
            checks,
            extra=report_data.to_dict(),
        )
        emit_report(report, args.out)
        return finish(report)

    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
