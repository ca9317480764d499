"""nilwalk command line: load a model file, run one computation, write CSV/JSON reports.

Exit codes: 0 success, 1 invalid input (model, flags), 2 a built-in check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .edgeworth import be_nonharmonic, discrepancy, em_sum_check, trotter_bound, xi_formula
from .errors import AssumptionError, NilwalkError, ValidationError
from .gaussian_limit import GaussianSpec, gaussian_moments, gaussian_moments_closed, mc_heat
from .models import Model, load_model, parse_n_range
from .polyalg import as_fraction, fraction_str, index_str, indices_up_to, parse_polynomial
from .realization import corrector_norm, harmonic_residual, is_symmetric
from .walk_moments import (MomentEngine, edge_moment_fn, ergodic_A, ergodic_A2, limit_coefficients, mc_sample,
                           verify_low_moments)

EM_SUITE = {
    2: ["t1^2*t2^3 + t1", "t1^5*t2", "t1^3*t2^2"],
    3: ["t1^3*t2", "t1*t2^2*t3^2 + t3^4", "t2^5"],
    4: ["t1^2*t2*t3*t4", "t4^4", "t1^3*t3^2"],
}


class CheckFailed(Exception):
    """A computation finished but its built-in acceptance check did not hold."""


def _plain(value: Any):
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.generic):
        return value.item()
    return value


def dump_json(data) -> str:
    return json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"


def dump_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_plain(v) for v in row])
    return buf.getvalue()


class Output:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str) -> None:
        if self.dir:
            (self.dir / name).write_text(text)
        else:
            sys.stdout.write(text)


# ------------------------------------------------------------------ helpers

def _model(args) -> Model:
    return load_model(args.model)


def _function(args, model: Model):
    if args.f:
        return model.parse_function(args.f)
    if model.function is None:
        raise AssumptionError("no test function: pass --f or add a function block to the model")
    return model.function


def _ns(args, model: Model) -> list[int]:
    return parse_n_range(args.n if args.n else model.run["n"])


def _t(args, model: Model) -> Fraction:
    return as_fraction(args.t if args.t is not None else model.run["t"])


def _x(args, model: Model) -> str:
    x = args.x or model.x
    if x not in model.graph.index:
        raise ValidationError([f"unknown vertex {x!r}"])
    return x


def _order(args, model: Model) -> int:
    return int(args.N if args.N is not None else model.run["N"])


def _seed(args, model: Model) -> int:
    return int(args.seed if args.seed is not None else model.run["seed"])


# ------------------------------------------------------------------ commands

def cmd_check(args, out: Output) -> None:
    model = _model(args)
    spectral = model.spectral
    cov, drift = limit_coefficients(model.algebra, model.graph, model.m, model.harmonic) if model.centered \
        else (None, None)
    stationarity = [a - b for a, b in zip(model.graph.apply_left(model.m), model.m)]
    report = {
        "model": model.name,
        "algebra": {"layer_dims": [len(model.algebra.layer_indices(k)) for k in range(1, model.algebra.step + 1)],
                    "step": model.algebra.step},
        "vertices": list(model.graph.vertices),
        "edges": len(model.graph.edges),
        "invariant_measure": list(model.m),
        "stationarity_residual_zero": all(v == 0 for v in stationarity),
        "period": spectral.period,
        "residual_radius": spectral.residual_radius,
        "symmetric": is_symmetric(model.graph, model.m),
        "direction": list(model.direction),
        "centered": model.centered,
        "harmonic": model.is_harmonic,
        "covariance": cov,
        "drift": drift,
    }
    if not model.is_harmonic:
        report["corrector_norm"] = corrector_norm(model.algebra, model.realization, model.harmonic)
    out.emit("check.json", dump_json(report))
    if not report["stationarity_residual_zero"]:
        raise CheckFailed("invariant measure is not stationary")


def cmd_measure(args, out: Output) -> None:
    model = _model(args)
    out.emit("measure.csv", dump_csv(["vertex", "m", "class"],
                                     [[v, m, c] for v, m, c in zip(model.graph.vertices, model.m,
                                                                    model.spectral.classes)]))


def cmd_harmonic(args, out: Output) -> None:
    model = _model(args)
    alg = model.algebra
    rows = []
    for v in model.graph.vertices:
        rows.append([v, "harmonic"] + list(model.harmonic.positions[v]))
        if not model.is_harmonic:
            rows.append([v, "configured"] + list(model.realization.positions[v]))
    out.emit("harmonic.csv", dump_csv(["vertex", "realization"] + [f"x{k + 1}" for k in range(alg.dim)], rows))
    residual = harmonic_residual(alg, model.graph, model.m, model.harmonic)
    if any(any(c != 0 for c in vec) for vec in residual.values()):
        raise CheckFailed("harmonic residual is non-zero")


def cmd_moments(args, out: Output) -> None:
    model = _model(args)
    alg = model.algebra
    dmax = args.dmax if args.dmax is not None else 3
    ns = _ns(args, model)
    x = _x(args, model)
    engine = MomentEngine(alg, model.graph, model.realization, dmax)
    tables = engine.run(x, ns)
    rows, bad = [], 0
    for n in ns:
        for index in engine.indices:
            d = sum(w * e for w, e in zip(alg.weights, index))
            value = tables[n].unscaled(index)
            check = ""
            if args.verify and d in (1, 2, 3) and model.is_harmonic:
                residual = verify_low_moments(alg, model.graph, model.m, model.realization, x, n, index, tables[n])
                check = residual
                bad += residual != 0
            rows.append([n, index_str(index), d, value, check])
    out.emit("moments.csv", dump_csv(["n", "index", "degree", "moment", "identity_residual"], rows))
    if bad:
        raise CheckFailed(f"{bad} low-order moment identities failed")


def cmd_ergodic(args, out: Output) -> None:
    model = _model(args)
    alg, g = model.algebra, model.graph
    s = model.spectral
    n_max = max(_ns(args, model)) if args.n else 200
    dmax = args.dmax if args.dmax is not None else 2
    rows = []
    worst = 0.0
    funcs = [(index_str(I), edge_moment_fn(alg, g, model.realization, I))
             for I in indices_up_to(alg.weights, dmax) if any(I)]
    for name, F in funcs:
        sup1 = max(max(abs(complex(v)) for v in ergodic_A(g, s, F, n)) for n in range(1, n_max + 1))
        rows.append([name, "A1", n_max, sup1, ""])
    for (name_f, F), (name_h, H) in [(a, b) for a in funcs[:3] for b in funcs[:3]]:
        sup1 = sup2 = 0.0
        res = 0.0
        for n in range(4, min(n_max, 50) + 1):
            two = ergodic_A2(g, s, F, H, n)
            sup1 = max(sup1, float(np.max(np.abs(two.A1))))
            sup2 = max(sup2, float(np.max(np.abs(two.A2))))
            res = max(res, two.residual)
        worst = max(worst, res)
        rows.append([f"{name_f}*{name_h}", "two-fold", min(n_max, 50), max(sup1, sup2), res])
    out.emit("ergodic.csv", dump_csv(["function", "kind", "n_max", "sup_abs", "max_residual"], rows))
    if worst > 1e-10:
        raise CheckFailed(f"two-fold identity residual {worst:.3e}")


def cmd_gaussian_moments(args, out: Output) -> None:
    model = _model(args)
    alg = model.algebra
    dmax = args.dmax if args.dmax is not None else 6
    cov, drift = limit_coefficients(alg, model.graph, model.m, model.harmonic)
    spec = GaussianSpec.make(cov, drift)
    table = gaussian_moments(spec, alg, dmax)
    rows, bad = [], 0
    for index, value in table.items():
        closed = gaussian_moments_closed(spec, alg, index)
        bad += closed != value
        rows.append([index_str(index), sum(w * e for w, e in zip(alg.weights, index)), value, closed == value])
    out.emit("gaussian_moments.csv", dump_csv(["index", "degree", "moment", "closed_form_agrees"], rows))
    if bad:
        raise CheckFailed(f"{bad} moments disagree with the closed form")


def cmd_edgeworth(args, out: Output) -> None:
    model = _model(args)
    f = _function(args, model)
    x = _x(args, model)
    order = _order(args, model)
    report = discrepancy(model, f, x, _t(args, model), _ns(args, model), order)
    data = report.to_json()
    formula = {}
    if not any(model.harmonic.positions[x]) and report.t == 1:
        for j in range(1, order):
            try:
                formula[str(j)] = xi_formula(j, f, model, x)
            except AssumptionError:
                break
    data["xi_formula"] = formula
    out.emit("edgeworth.json", dump_json(data))
    if report.fit is not None and not report.fit.bounded:
        raise CheckFailed("order-N fit residual is not bounded over the sweep")


def cmd_berry_esseen(args, out: Output) -> None:
    model = _model(args)
    f = _function(args, model)
    report = be_nonharmonic(model, f, _t(args, model), _ns(args, model), order=_order(args, model))
    out.emit("berry_esseen.json", dump_json(report))
    if not report["exact_agreement"] and report["slope"] > -0.45:
        raise CheckFailed(f"slope {report['slope']:.3f} is above -0.45")


def cmd_trotter(args, out: Output) -> None:
    model = _model(args)
    f = _function(args, model)
    x, t = _x(args, model), _t(args, model)
    ns = _ns(args, model)
    run = model.run
    C = args.C if args.C is not None else run["C"]
    b = args.b if args.b is not None else run["b"]
    lam = args.lam if args.lam is not None else run["lambda"]
    box = args.box if args.box is not None else run["box"]
    report = discrepancy(model, f, x, t, ns, _order(args, model))
    rows, bad = [], 0
    for n in ns:
        tb = trotter_bound(model, f, x, t, n, C, b, lam, box)
        d = abs(float(report.D(n)))
        ok = tb.bound >= d
        bad += not ok
        rows.append([n, d, tb.bound, tb.phi, tb.psi, tb.psi_shifted, ok])
    out.emit("trotter.csv", dump_csv(["n", "abs_D", "bound", "phi", "psi", "psi_shifted", "sound"], rows))
    if bad:
        raise CheckFailed(f"bound below |D_n| for {bad} values of n")


def cmd_em_check(args, out: Output) -> None:
    ell, s = args.l, args.s
    if args.F:
        Fs = [args.F]
    else:
        if ell not in EM_SUITE:
            raise ValidationError([f"no bundled test polynomials for l = {ell}; pass --F"])
        Fs = EM_SUITE[ell]
    ns = parse_n_range(args.n or "16..4096")
    reports = []
    for text in Fs:
        r = em_sum_check(parse_polynomial(text, ell, "t"), ell, s, ns)
        reports.append({"F": r.F, "l": ell, "s": s, "n": r.ns, "error": r.errors, "error_times_n_s": r.scaled,
                        "ratios": r.ratios, "final_ratio": r.final_ratio, "target": 2.0 ** (-s),
                        "passed": r.passed})
    out.emit("em_check.json", dump_json(reports))
    if not all(r["passed"] for r in reports):
        raise CheckFailed("error ratio is off 2^-s by more than 20%")


def cmd_mc(args, out: Output) -> None:
    model = _model(args)
    alg = model.algebra
    dmax = args.dmax if args.dmax is not None else 3
    seed = _seed(args, model)
    n = int(args.n) if args.n else 100
    rows, bad = [], 0
    if args.gaussian:
        cov, drift = limit_coefficients(alg, model.graph, model.m, model.harmonic)
        spec = GaussianSpec.make(cov, drift)
        sample = mc_heat(spec, alg, float(_t(args, model)), args.count, seed)
        exact = gaussian_moments(spec, alg, dmax)
        reference = {I: v * _t(args, model) ** (sum(w * e for w, e in zip(alg.weights, I)) // 2)
                     for I, v in exact.items()}
    else:
        x = _x(args, model)
        sample = mc_sample(alg, model.graph, model.realization, x, n, args.count, seed, threads=args.threads)
        table = MomentEngine(alg, model.graph, model.realization, dmax).run(x, [n])[n]
        reference = {I: table.unscaled(I) for I in table.indices}
    for index, value in reference.items():
        if not any(index):
            continue
        mean, lo, hi = sample.moment_ci(index)
        inside = lo <= float(value) <= hi
        bad += not inside
        rows.append([index_str(index), value, mean, lo, hi, inside])
    out.emit("mc.csv", dump_csv(["index", "exact", "mean", "ci_low", "ci_high", "inside"], rows))
    if bad:
        raise CheckFailed(f"{bad} exact moments fall outside the 99% intervals")


COMMANDS = {
    "check": (cmd_check, "validate a model and print its summary"),
    "measure": (cmd_measure, "invariant measure and cyclic classes"),
    "harmonic": (cmd_harmonic, "modified harmonic positions"),
    "moments": (cmd_moments, "exact walk moments by dynamic programming"),
    "ergodic": (cmd_ergodic, "ergodic sums and the two-fold identity"),
    "gaussian-moments": (cmd_gaussian_moments, "moments of the limiting Gaussian law"),
    "edgeworth": (cmd_edgeworth, "discrepancy sweep with coefficient fits"),
    "berry-esseen": (cmd_berry_esseen, "sup over vertices of |D_n| for the configured realization"),
    "trotter": (cmd_trotter, "Trotter-type bound against |D_n|"),
    "em-check": (cmd_em_check, "Euler-Maclaurin error ratios on a simplex"),
    "mc": (cmd_mc, "Monte Carlo moments against exact values"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for report files (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--n", help='sweep "A..B" (powers of two) or a comma list; a single count for mc')
    common.add_argument("--dmax", type=int)
    common.add_argument("--N", type=int, help="expansion order")
    common.add_argument("--t", help='time as "p/q"')
    common.add_argument("--f", help="test polynomial such as x1^2*x3")
    common.add_argument("--x", help="start vertex")

    parser = argparse.ArgumentParser(prog="nilwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name != "em-check":
            p.add_argument("model", help="model JSON path or bundled model name")
        if name == "trotter":
            p.add_argument("--C")
            p.add_argument("--b")
            p.add_argument("--lambda", dest="lam")
            p.add_argument("--box")
        if name == "em-check":
            p.add_argument("--l", type=int, default=2)
            p.add_argument("--s", type=int, default=2)
            p.add_argument("--F", help="polynomial in t1..tl")
        if name == "moments":
            p.add_argument("--verify", action="store_true", help="check the degree 1-3 identities")
        if name == "mc":
            p.add_argument("--count", type=int, default=100_000)
            p.add_argument("--gaussian", action="store_true", help="sample the limiting Gaussian law instead")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Output(args.out)
    handler = COMMANDS[args.command][0]
    try:
        handler(args, out)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        for d in exc.diagnostics:
            print(f"invalid: {d}", file=sys.stderr)
        return 1
    except (NilwalkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
