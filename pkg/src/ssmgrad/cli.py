"""Command-line interface: ``fit``, ``check-grad`` and ``simulate``.

Exit codes: 0 success (for ``fit``: converged), 2 ``fit`` did not converge
(the report is still written), 1 usage, input or model errors.
"""

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import hessfilter
from .errors import SSMError
from .models_arma import ArmaModel, simulate_arma
from .models_seasonal import SeasonalModel
from .optimize import OptimizerConfig, bfgs_maximize, check_gradient
from .statespace import simulate

__all__ = ["main", "read_series", "build_model", "fit_report", "SeriesFormatError"]


class SeriesFormatError(ValueError):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_series(path):
    """Read one value per line, or a single-column CSV with an optional header.

    Blank lines are skipped.  A non-numeric first line is taken as a header;
    any other non-numeric or non-finite entry is an error that lists the
    offending line numbers.
    """
    values, bad = [], []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        fields = [f.strip() for f in text.split(",")]
        if len(fields) > 1 and any(fields[1:]):
            raise SeriesFormatError(f"line {lineno}: expected a single column, got {len(fields)}")
        try:
            v = float(fields[0])
        except ValueError:
            if not values and not bad and lineno == _first_nonblank(lines):
                continue  # header
            bad.append(lineno)
            continue
        if not math.isfinite(v):
            bad.append(lineno)
            continue
        values.append(v)
    if bad:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise SeriesFormatError(f"non-numeric or non-finite values on line(s) {shown}")
    if not values:
        raise SeriesFormatError(f"{path}: no observations")
    return np.array(values)


def _first_nonblank(lines):
    for i, line in enumerate(lines, start=1):
        if line.strip():
            return i
    return 0


def build_model(args):
    if args.model == "seasonal":
        return SeasonalModel(period=args.period, ar_order=0)
    if args.model == "seasonal-ar":
        order = 2 if args.ar_order is None else args.ar_order
        if order < 1:
            raise UsageError("--model seasonal-ar needs --ar-order >= 1")
        return SeasonalModel(period=args.period, ar_order=order)
    m = 0 if args.ar_order is None else args.ar_order
    l = 0 if args.ma_order is None else args.ma_order
    if m + l < 1:
        raise UsageError("--model arma needs --ar-order and/or --ma-order")
    return ArmaModel(m, l, transformed=not getattr(args, "raw", False))


def parse_theta(text, model, flag):
    if text is None or text == "default":
        return model.default_theta()
    try:
        theta = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"{flag}: expected a comma-separated list of numbers, got {text!r}")
    if theta.size != model.param_dim:
        raise UsageError(
            f"{flag}: expected p = {model.param_dim} values "
            f"({', '.join(model.param_names())}), got {theta.size}"
        )
    return theta


def _std_errors(hessian):
    try:
        cov = np.linalg.inv(-hessian)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(cov)
    return [math.sqrt(v) if v > 0 else None for v in d]


def fit_report(model, y, theta0, hessian="analytic", gradient="auto", cfg=None):
    """Fit ``model`` to ``y`` and collect everything the ``fit`` command reports."""
    cfg = cfg or OptimizerConfig()
    res = bfgs_maximize(model, theta0, y, cfg, gradient=gradient)
    report = {
        "model": model.describe(),
        "n_obs": int(y.size),
        "param_names": model.param_names(),
        "theta_init": [float(v) for v in theta0],
        "theta_hat": res.theta_hat.tolist(),
        "structural": model.structural(res.theta_hat),
        "loglik": res.loglik,
        "aic": res.aic,
        "n_estimated": model.param_dim + (1 if model.concentrated_variance else 0),
        "gradient": res.gradient.tolist(),
        "converged": res.converged,
        "message": res.message,
        "n_iter": res.n_iter,
        "iterations": res.history,
        "diagnostics": {
            "gradient_method": res.gradient_method,
            "n_filter_passes": res.n_filter_passes,
            "n_gradient_evals": res.n_gradient_evals,
            "passes_per_gradient": res.passes_per_gradient,
        },
    }
    if model.concentrated_variance:
        from .kalman import run_filter

        report["structural"]["sigma2"] = run_filter(model, res.theta_hat, y).sigma2_hat
    if hessian != "off":
        if hessian == "fd":
            H = hessfilter.fd_hessian(model, res.theta_hat, y)
            method = "fd"
        else:
            hrep = hessfilter.run_hessian_filter(model, res.theta_hat, y)
            H, method = hrep.hessian, hrep.hessian_method
        report["hessian"] = H.tolist()
        report["hessian_method"] = method
        report["std_errors"] = _std_errors(H)
        if isinstance(model, ArmaModel) and model.spec.transformed:
            # delta method for the coefficients
            J = model.jacobian(res.theta_hat)
            try:
                cov = J @ np.linalg.inv(-H) @ J.T
                report["coefficient_std_errors"] = [
                    math.sqrt(v) if v > 0 else None for v in np.diag(cov)
                ]
            except np.linalg.LinAlgError:
                report["coefficient_std_errors"] = None
    rows = check_gradient(model, res.theta_hat, y, cfg.fd_constant)
    report["gradient_check"] = [asdict(r) for r in rows]
    return report, res.converged


def _g17(v):
    return format(v, ".17g")


def _format_check_table(rows):
    name_w = max(4, *(len(r.name) for r in rows))
    lines = [f"{'':{name_w}}  {'Numerical Difference':>25}  {'Gradient':>25}  digits"]
    for r in rows:
        lines.append(f"{r.name:{name_w}}  {_g17(r.fd):>25}  {_g17(r.analytic):>25}  {r.digits:>6}")
    return "\n".join(lines)


def _format_fit(report):
    out = [
        f"model: {json.dumps(report['model'])}",
        f"converged: {report['converged']} ({report['message']}) after {report['n_iter']} iterations",
        f"log-likelihood: {_g17(report['loglik'])}",
        f"AIC: {_g17(report['aic'])}",
        "",
        f"{'parameter':12}  {'estimate':>25}  {'gradient':>25}  {'std error':>12}",
    ]
    se = report.get("std_errors") or [None] * len(report["theta_hat"])
    se = [math.nan if v is None else v for v in se]
    for name, t, g, s in zip(report["param_names"], report["theta_hat"], report["gradient"], se):
        out.append(f"{name:12}  {_g17(t):>25}  {_g17(g):>25}  {s:>12.6g}")
    out.append("")
    out.append(f"structural: {json.dumps(report['structural'])}")
    if report.get("coefficient_std_errors"):
        out.append(f"coefficient std errors: {json.dumps(report['coefficient_std_errors'])}")
    d = report["diagnostics"]
    out.append(
        f"filter passes: {d['n_filter_passes']} "
        f"({d['n_gradient_evals']} gradients, {d['passes_per_gradient']} pass(es) each, {d['gradient_method']})"
    )
    out.append("")
    out.append("gradient check at the estimate:")
    rows = [argparse.Namespace(**r) for r in report["gradient_check"]]
    out.append(_format_check_table(rows))
    return "\n".join(out)


def cmd_fit(args):
    model = build_model(args)
    theta0 = parse_theta(args.init_theta, model, "--init-theta")
    y = read_series(args.data)
    cfg = OptimizerConfig(max_iter=args.max_iter, fd_constant=args.fd_constant)
    report, converged = fit_report(model, y, theta0, args.hessian, args.gradient, cfg)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(_format_fit(report))
    return 0 if converged else 2


def cmd_check_grad(args):
    model = build_model(args)
    theta = parse_theta(args.init_theta, model, "--init-theta")
    y = read_series(args.data)
    rows = check_gradient(model, theta, y, args.fd_constant)
    if args.json:
        print(json.dumps({"theta": theta.tolist(), "fd_constant": args.fd_constant,
                          "rows": [asdict(r) for r in rows]}, indent=2))
    else:
        print(_format_check_table(rows))
    return 0


def cmd_simulate(args):
    model = build_model(args)
    rng = np.random.default_rng(args.seed)
    theta = parse_theta(args.theta, model, "--theta")
    if isinstance(model, ArmaModel):
        a, b = model.coefficients(theta)
        y = simulate_arma(a, b, args.sigma2, args.n, rng)
    else:
        _, mm, ic = model.evaluate(theta)
        y, _ = simulate(mm, ic, args.n, rng)
    text = "\n".join(_g17(v) for v in y) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _add_model_flags(p):
    p.add_argument("--model", choices=("seasonal", "seasonal-ar", "arma"), required=True)
    p.add_argument("--period", type=int, default=12, help="seasonal period (default 12)")
    p.add_argument("--ar-order", type=int, default=None)
    p.add_argument("--ma-order", type=int, default=None)


def make_parser():
    parser = _Parser(prog="ssmgrad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="maximum-likelihood fit by BFGS")
    _add_model_flags(p)
    p.add_argument("--data", required=True, help="series file")
    p.add_argument("--init-theta", default="default", help="comma list or 'default'")
    p.add_argument("--hessian", choices=("analytic", "fd", "off"), default="analytic")
    p.add_argument("--gradient", choices=("auto", "fd"), default="auto",
                   help="gradient filter (auto) or central differences (fd)")
    p.add_argument("--fd-constant", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check-grad", help="compare analytic and numerical gradients")
    _add_model_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--init-theta", default="default", help="point of comparison")
    p.add_argument("--fd-constant", type=float, default=1e-3)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check_grad)

    p = sub.add_parser("simulate", help="draw a synthetic series")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", default="default", help="comma list or 'default'")
    p.add_argument("--raw", action="store_true",
                   help="ARMA: --theta holds raw coefficients (a..., b...)")
    p.add_argument("--sigma2", type=float, default=1.0, help="ARMA innovation variance")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SeriesFormatError, OSError) as exc:
        print(f"ssmgrad {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (SSMError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ssmgrad {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
