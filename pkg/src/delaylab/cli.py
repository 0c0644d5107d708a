"""Command-line front end: ``delaylab <subcommand> [options]``.

Every subcommand writes a CSV table (default) or a JSON document, to stdout,
to ``--out``, or to ``$DELAYLAB_OUT_DIR/<subcommand>.<ext>`` when that
variable is set and ``--out`` is absent.  Exit status: 0 success, 2 invalid
input or usage, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from .dde import DdeSpec, integrate, residual
from .errors import NumericError
from .myshkis import rho, rho_asymptotics
from .normalizer import round_trip, time_rescale
from .numerics import INV_E, THRESHOLD_GUARD
from .periodic import catalog, parse_preset, verify
from .piecewise import DomainError
from .threshold import lambda_, lambda_asymptotics, lambda_closed_form, spectral

OUT_ENV = "DELAYLAB_OUT_DIR"

SCHEMAS = {
    "rho": "tau,rho",
    "lambda": "tau,lambda,lambda_closed (closed form only for tau >= 1, else empty)",
    "spectral": "tau,mu,nu,gamma",
    "asymptotics": "quantity,eps,value; rows 'limit' and 'target' close each quantity",
    "periodic": "label,residual,periodicity_defect,integration_error,tau_m",
    "simulate": "t,x",
    "normalize": "t,s,slope (knots of the time map; slope of the following piece)",
    "semicycles": "start,end,length,t_extremum,extremum",
    "classify": "label,alpha,lambda,tau_m",
    "converge": "window,start,residual",
    "counterexample": "block,amplitude,oracle,drift,harmonic",
    "conjecture": "window,start,residual",
    "decay-bound": "tau,delta,exponent,C,a0,eps,nonincreasing",
}


# -- argument helpers ---------------------------------------------------------------

def tau_grid(text: str) -> list:
    """``a:b:n`` -> n evenly spaced values from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("grid needs n >= 1")
    return [float(v) for v in np.linspace(a, b, n)]


def _taus(args, required: bool = True, lower: float = INV_E + THRESHOLD_GUARD, upper: float = 2.0) -> list:
    taus = []
    if args.tau is not None:
        taus += list(args.tau)
    if args.tau_grid is not None:
        taus += args.tau_grid
    if not taus and required:
        raise DomainError("give --tau or --tau-grid")
    for t in taus:
        if not (lower < t <= upper):
            raise DomainError(f"tau={t} outside ({lower:.6g}, {upper:g}]")
    return taus


def _load_spec(args) -> DdeSpec:
    if args.preset:
        return parse_preset(args.preset).spec
    if not args.spec:
        raise DomainError("give a spec file or --preset")
    with open(args.spec, encoding="utf-8") as fh:
        try:
            return DdeSpec.from_json(fh.read())
        except json.JSONDecodeError as exc:
            raise DomainError(f"spec file is not JSON: {exc}") from None


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# -- subcommands: each returns (csv_header, csv_rows, json_object) -----------------

def cmd_rho(args):
    rows = [[t, rho(t)] for t in _taus(args)]
    return ["tau", "rho"], rows, [{"tau": t, "rho": r} for t, r in rows]


def cmd_lambda(args):
    rows = []
    for t in _taus(args):
        closed = lambda_closed_form(t) if t >= 1.0 else None
        rows.append([t, lambda_(t), closed])
    return (["tau", "lambda", "lambda_closed"], rows,
            [{"tau": t, "lambda": v, "lambda_closed": c} for t, v, c in rows])


def cmd_spectral(args):
    rows = []
    for t in _taus(args):
        s = spectral(t)
        rows.append([t, s.mu, s.nu, s.gamma])
    return ["tau", "mu", "nu", "gamma"], rows, [dict(zip(["tau", "mu", "nu", "gamma"], r)) for r in rows]


def cmd_asymptotics(args):
    eps = [t - INV_E for t in _taus(args, required=False, upper=INV_E + 0.05)] or None
    lam = lambda_asymptotics(eps) if eps else lambda_asymptotics()
    rh = rho_asymptotics(eps) if eps else rho_asymptotics()
    eps_vals = lam.taus - INV_E
    series = {"lambda_scaled": lam.lambda_scaled, "rho_scaled": lam.rho_scaled,
              "mu_ratio": lam.mu_ratio, "gamma_ratio": lam.gamma_ratio, "xi": lam.xi,
              "root_combination": lam.root_combination}
    rows = []
    for name, vals in series.items():
        rows += [[name, e, v] for e, v in zip(eps_vals, vals)]
        rows.append([name, "limit", lam.limits[name]])
        rows.append([name, "target", lam.targets[name]])
    doc = lam.to_dict()
    doc["rho_report"] = rh.to_dict()
    doc["rel_errors"] = lam.rel_errors()
    return ["quantity", "eps", "value"], rows, doc


def cmd_periodic(args):
    taus = _taus(args, required=False, lower=0.0)
    sols = catalog(taus, taus) if taus else catalog()
    reps = [verify(s) for s in sols]
    rows = [[r.label, r.residual, r.periodicity_defect, r.integration_error, r.tau_m] for r in reps]
    return (["label", "residual", "periodicity_defect", "integration_error", "tau_m"], rows,
            [r.to_dict() for r in reps])


def _horizon(args, spec: DdeSpec, default: float = 10.0) -> float:
    h = args.horizon if args.horizon is not None else default
    if not h > 0:
        raise DomainError("--horizon must be positive")
    return spec.t0 + h


def cmd_simulate(args):
    spec = _load_spec(args)
    end = _horizon(args, spec)
    x = integrate(spec, end)
    step = args.step or 0.01
    t = np.linspace(spec.t0, end, int(round((end - spec.t0) / step)) + 1)
    v = x(t)
    res = residual(x, spec)
    doc = {"name": spec.name, "t0": spec.t0, "t_end": end, "residual": res,
           "t": t.tolist(), "x": v.tolist()}
    return ["t", "x"], zip(t, v), doc


def cmd_normalize(args):
    spec = _load_spec(args)
    end = _horizon(args, spec)
    norm, fmap = time_rescale(spec, end)
    slopes = np.diff(fmap.s_knots) / np.diff(fmap.t_knots)
    rows = [[t, s, k] for t, s, k in zip(fmap.t_knots, fmap.s_knots, list(slopes) + [None])]
    doc = {"spec": norm.to_dict(), "map": fmap.to_dict(), "tau_m": norm.tau_m}
    if args.check:
        doc["round_trip"] = round_trip(spec, end, seed=args.seed).to_dict()
    return ["t", "s", "slope"], rows, doc


def _trajectory(args):
    spec = _load_spec(args)
    end = _horizon(args, spec, 20.0)
    return spec, integrate(spec, end), end


def cmd_semicycles(args):
    from .experiments import semicycles
    spec, x, end = _trajectory(args)
    rep = semicycles(x, (spec.t0, end), spec)
    return ["start", "end", "length", "t_extremum", "extremum"], rep.rows(), rep.to_dict()


def cmd_classify(args):
    from .experiments import classify
    spec, x, end = _trajectory(args)
    label, rep = classify(x, spec, (spec.t0, end))
    lam = lambda_(spec.tau_m)
    row = [label, rep.alpha, lam, spec.tau_m]
    return ["label", "alpha", "lambda", "tau_m"], [row], dict(zip(["label", "alpha", "lambda", "tau_m"], row))


def cmd_converge(args):
    from .experiments import convergence_probe, perturbed_family, summable_perturbations
    if args.spec or args.preset:
        spec = _load_spec(args)
        tau = args.tau[0] if args.tau else None
        rep = convergence_probe(spec, args.horizon, tau)
    else:
        (tau,) = _taus(args)[:1] or [None]
        L = lambda_(tau)
        horizon = args.horizon if args.horizon is not None else 200 * L
        n = int(math.ceil(horizon / (0.5 * L))) + 2
        short, cut = summable_perturbations(n, args.seed, tau=tau)
        spec = perturbed_family(tau, horizon, short, cut)
        rep = convergence_probe(spec, horizon, tau)
    return ["window", "start", "residual"], _report_rows(rep), rep.to_dict()


def _report_rows(rep):
    return [[k, s, r] for k, (s, r) in enumerate(zip(rep.window_starts, rep.residual_by_window))]


def cmd_counterexample(args):
    from .experiments import counterexample
    default = 1000 if args.kind == "slow_phase" else 10
    _, _, rep = counterexample(args.kind, args.param if args.param is not None else default, args.blocks)
    n = min(len(rep.amplitudes), len(rep.phase_drift))
    rows = [[k + 1, rep.amplitudes[k], rep.amplitude_oracle[k], rep.phase_drift[k], rep.harmonic[k]]
            for k in range(n)]
    return ["block", "amplitude", "oracle", "drift", "harmonic"], rows, rep.to_dict()


def cmd_conjecture(args):
    from .experiments.convergence import conjecture_probe, plus_history
    rep = conjecture_probe(plus_history(args.scale, args.bump), args.horizon)
    return ["window", "start", "residual"], _report_rows(rep), rep.to_dict()


def cmd_decay_bound(args):
    from .experiments import decay_bound
    taus = _taus(args, upper=1.0)
    rows, docs = [], []
    for t in taus:
        for d in args.delta:
            p = decay_bound(t, d)
            rows.append([t, d, p.exponent, p.C, p.a0, p.eps, p.nonincreasing])
            docs.append(p.to_dict())
    return ["tau", "delta", "exponent", "C", "a0", "eps", "nonincreasing"], rows, docs


COMMANDS = {
    "rho": (cmd_rho, "first root of the Myshkis function"),
    "lambda": (cmd_lambda, "critical semicycle length, numeric and closed form"),
    "spectral": (cmd_spectral, "principal characteristic root"),
    "asymptotics": (cmd_asymptotics, "scaled quantities near 1/e and their extrapolations"),
    "periodic": (cmd_periodic, "catalog of special periodic solutions with residuals"),
    "simulate": (cmd_simulate, "integrate a spec file"),
    "normalize": (cmd_normalize, "rescale time so that |p| = 1"),
    "semicycles": (cmd_semicycles, "zeros, extrema and semicycle lengths"),
    "classify": (cmd_classify, "boundedness class from the semicycle bound"),
    "converge": (cmd_converge, "convergence probe toward the scaled periodic profile"),
    "counterexample": (cmd_counterexample, "amplitude converges while the phase drifts"),
    "conjecture": (cmd_conjecture, "exploratory comparison with the positive-feedback profile"),
    "decay-bound": (cmd_decay_bound, "gap to the Myshkis function versus delta"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tau", type=float, action="append", help="delay value (repeatable)")
    common.add_argument("--tau-grid", type=tau_grid, metavar="A:B:N", help="N values from A to B")
    common.add_argument("--horizon", type=float, help="integration length past t0")
    common.add_argument("--step", type=float, help="output sampling step")
    common.add_argument("--seed", type=int, default=0, help="seed for random perturbations")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help=f"output file (default stdout, or ${OUT_ENV}/<cmd>.<ext>)")
    parser = argparse.ArgumentParser(prog="delaylab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text,
                           description=f"{help_text}. CSV columns: {SCHEMAS[name]}")
        if name in ("simulate", "normalize", "semicycles", "classify", "converge"):
            p.add_argument("spec", nargs="?", help="JSON problem file")
            p.add_argument("--preset", help="minus, plus, varpi:<tau> or varpi_tilde:<tau>")
        if name == "normalize":
            p.add_argument("--check", action="store_true", help="also run the dual simulation")
        if name == "counterexample":
            p.add_argument("kind", choices=("slow_phase", "tau2"))
            p.add_argument("--param", type=int, help="blocks m (slow_phase) or N (tau2)")
            p.add_argument("--blocks", type=int, default=2000, help="blocks for tau2")
        if name == "conjecture":
            p.add_argument("--scale", type=float, default=1.0, help="history multiple of the profile")
            p.add_argument("--bump", type=float, default=0.0, help="height of a history bump")
        if name == "decay-bound":
            p.add_argument("--delta", type=float, action="append", help="gap at rho - tau (repeatable)")
    return parser


def _destination(args) -> Optional[str]:
    if args.out:
        return args.out
    base = os.environ.get(OUT_ENV)
    if base:
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, f"{args.command}.{args.format}")
    return None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "decay-bound" and not args.delta:
        args.delta = [1e-2, 1e-3, 1e-4]
    func = COMMANDS[args.command][0]
    try:
        header, rows, doc = func(args)
        text = _csv(header, rows) if args.format == "csv" else _json(doc)
        dest = _destination(args)
        if dest is None:
            sys.stdout.write(text)
        else:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except NumericError as exc:
        print(f"delaylab: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"delaylab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
