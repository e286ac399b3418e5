"""Command-line front end: ``chernoff-thermo <subcommand> [options]``.

Every subcommand reads one JSON document (``--model``), runs one library
operation and prints the result as JSON (default), CSV or an aligned table.
Floats are printed with 12 significant digits; infinities as ``inf``/``-inf``.
Exit status is 0 on success, 1 on a domain error (``ErrorName: message`` on
stderr) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import ldp, thermo
from .apps import channel, detection, quantizer, rd
from .errors import ChernoffError, OutOfRange, ParseError, RoundingError, ValidityWarning
from .model import energy_range, model_from_dict

FORMATS = ("json", "csv", "table")
SIG_DIGITS = 12

CURVE_COLUMNS = (
    "E",
    "sigma_bar",
    "beta",
    "tangent_E1",
    "tangent_E2",
    "gap_E1",
    "gap_E2",
    "marker",
)


class UsageError(Exception):
    """Bad command line (mapped to exit status 2)."""


# ---------------------------------------------------------------------------
# output


def _clean(value):
    """Round floats to 12 significant digits and make the value JSON-safe."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}") + 0.0
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{SIG_DIGITS}g}"
    if isinstance(value, dict):
        return ";".join(f"{k}={_cell(v)}" for k, v in value.items())
    if isinstance(value, list):
        return ";".join(_cell(v) for v in value)
    return str(value)


def render(result, fmt: str) -> str:
    """Render a record (dict) or a list of records."""
    data = _clean(result)
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    rows = data if isinstance(data, list) else [data]
    columns = list(rows[0].keys()) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    if not isinstance(data, list):
        width = max((len(k) for k in columns), default=0)
        return "".join(f"{k.ljust(width)}  {_cell(v)}\n" for k, v in data.items())
    cells = [[_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# inputs


def _read_doc(path: Optional[str]) -> dict:
    if path is None:
        raise UsageError("--model is required for this subcommand")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path} must contain a JSON object")
    return doc


def _parse(builder: Callable, doc: dict):
    """Run a document parser, turning stray type errors into ParseError."""
    try:
        return builder(doc)
    except ChernoffError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ParseError(f"malformed document: {exc}") from exc


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_identity_check(args):
    model = _parse(model_from_dict, _read_doc(args.model))
    search = thermo.SearchControl(grid_points=args.grid_points)
    res = thermo.verify_identity(model, args.E, args.tol if args.tol is not None else 1e-6, search)
    return {
        "E": args.E,
        "lhs": res.lhs,
        "rhs": res.rhs,
        "gap": res.gap,
        "pass": res.passed,
        "ordered": res.ordered,
        "tolerance": res.tolerance,
    }


def cmd_rate_fn(args):
    model = _parse(model_from_dict, _read_doc(args.model))
    res = ldp.rate_function(model, args.E)
    return {"E": res.energy, "rate": res.rate, "regime": res.regime}


def cmd_exact_prob(args):
    model = _parse(model_from_dict, _read_doc(args.model))
    try:
        est = ldp.exact_probability(model, args.n, args.E, args.bin_width)
    except RoundingError as exc:
        hint = ""
        try:
            hint = f" (smallest valid n is {ldp.smallest_integral_n(model)})"
        except RoundingError:
            pass
        raise RoundingError(f"{exc}{hint}") from exc
    return {
        "n": est.n,
        "E": args.E,
        "method": est.method,
        "log_prob": est.log_prob,
        "log_prob_upper": est.log_prob_upper,
        "bin_width": est.bin_width,
    }


def cmd_mc_prob(args):
    if args.seed is None:
        raise UsageError("mc-prob requires --seed")
    model = _parse(model_from_dict, _read_doc(args.model))
    est = ldp.monte_carlo_probability(
        model, args.n, args.E, args.trials, args.seed, workers=args.workers
    )
    lo, hi = est.ci95_log
    return {
        "n": est.n,
        "E": args.E,
        "method": est.method,
        "log_prob": est.log_prob,
        "ci95_lo": lo,
        "ci95_hi": hi,
        "trials": est.trials,
        "hits": est.hits,
        "seed": est.seed,
    }


def cmd_dual_check(args):
    model = _parse(model_from_dict, _read_doc(args.model))
    res = ldp.dual_rate_check(model, args.E)
    return {
        "E": args.E,
        "per_symbol_rate": res.per_symbol_rate,
        "block_rate": res.block_rate,
        "gap": res.gap,
    }


def cmd_rd(args):
    doc = _read_doc(args.model)
    if args.D is not None:
        doc = dict(doc, D=args.D)
    problem = _parse(rd.rd_problem_from_dict, doc)
    res = rd.rate_distortion(problem)
    return {"D": problem.level_D, "R": res.R, "beta_star": res.beta_star, "temperature": res.temperature}


def cmd_rd_binary(args):
    res = rd.binary_hamming_rd(args.D, args.epsilon0, args.k)
    return {"D": args.D, "R": res.R, "T": res.temperature, "beta": res.beta_star}


def cmd_rd_highres(args):
    problem = _parse(rd.highres_problem_from_dict, _read_doc(args.model))
    if (args.beta is None) == (args.D is None):
        raise UsageError("rd-highres needs exactly one of --beta or --D")
    if args.beta is not None:
        res = rd.highres_distortion(problem, args.beta)
        return {
            "beta": args.beta,
            "D": res.D,
            "equipartition_ratio": res.equipartition_ratio,
            "monotone": res.monotone,
        }
    res = rd.highres_rate(problem, args.D)
    return {
        "D": args.D,
        "R": res.R,
        "beta_star": res.beta_star,
        "equipartition_ratio": res.equipartition_ratio,
    }


def cmd_capacity(args):
    problem = _parse(channel.channel_problem_from_dict, _read_doc(args.model))
    res = channel.channel_exponent(problem)
    return {
        "value": res.value,
        "beta_star": res.beta_star,
        "is_matched": res.is_matched,
        "E": res.energy,
    }


def cmd_detect(args):
    doc = _read_doc(args.model)
    if args.E0 is not None:
        doc = dict(doc, E0=args.E0)
    kw = _parse(detection.detection_problem_from_dict, doc)
    res = detection.detection_exponents(**kw)
    return {
        "E0": kw["threshold_E0"],
        "false_alarm_exp": res.false_alarm_exp,
        "missed_detection_exp": res.missed_detection_exp,
        "beta_false_alarm": res.beta_false_alarm,
        "beta_missed_detection": res.beta_missed_detection,
        "band_lo": res.band[0],
        "band_hi": res.band[1],
    }


def _temp_problem(args):
    doc = _read_doc(args.model)
    if getattr(args, "E0", None) is not None:
        doc = dict(doc, E0=args.E0)
    return _parse(detection.temp_test_problem_from_dict, doc)


def cmd_temp_test(args):
    res = detection.temperature_test_exponents(_temp_problem(args))
    return {
        "I1": res.I1,
        "I2": res.I2,
        "E0": res.E0,
        "E1": res.E1,
        "E2": res.E2,
        "T0": res.T0,
        "T1": res.T1,
        "T2": res.T2,
    }


def cmd_hc_integral(args):
    value = detection.heat_capacity_integral(_temp_problem(args), args.which)
    return {"which": args.which, "integral": value}


def _quantizer_problem(args, D=None):
    doc = _read_doc(args.model)
    if D is not None:
        doc = dict(doc, D=D)
    if getattr(args, "direction", None):
        doc = dict(doc, direction=args.direction)
    return _parse(quantizer.quantizer_problem_from_dict, doc)


def cmd_quantizer(args):
    plan = quantizer.quantizer_exponent(_quantizer_problem(args, args.D))
    return {
        "direction": plan.direction,
        "exponent": plan.exponent,
        "rate_function": plan.rate_function,
        "support": plan.support,
        "sharing_p": plan.sharing_p,
        "rate_used": plan.rate_used,
        "beta_star": plan.beta_star,
    }


def cmd_pt_scan(args):
    doc = _read_doc(args.model)
    if "D" not in doc:
        doc = dict(doc, D=0.0)
    if args.direction:
        doc = dict(doc, direction=args.direction)
    problem = _parse(quantizer.quantizer_problem_from_dict, doc)
    grid = _floats(args.D_grid)
    if not grid:
        raise UsageError("--D-grid is empty")
    scan = quantizer.phase_transition_scan(problem, grid, workers=args.workers)
    marks = set(scan.transitions)
    rows = [
        {
            "index": i,
            "D": pt.D,
            "support": pt.support,
            "exponent": pt.exponent,
            "beta_star": pt.beta_star,
            "transition": i in marks,
            "error": pt.error,
        }
        for i, pt in enumerate(scan.points)
    ]
    if args.format == "json":
        return {"points": rows, "transitions": scan.transitions}
    return rows


def _full_entropy(p, logq, f, E, e_mean):
    """Concave Legendre transform over all real beta: the non-negative branch
    below the mean energy, the negative-temperature branch above it."""
    if E <= e_mean:
        sol = thermo.solve_dual(p, logq, f, 1.0, E, strict=False)
        return sol.value, sol.beta_star
    sol = thermo.solve_dual(p, logq, -f, 1.0, -E, strict=False)
    return sol.value, 0.0 - sol.beta_star


def cmd_entropy_curve(args):
    doc = _read_doc(args.model)
    is_temp = "hamiltonian" in doc
    with_tangents = is_temp and "beta1" in doc and "beta2" in doc
    if is_temp:
        if args.E0 is not None:
            doc = dict(doc, E0=args.E0)
        if not with_tangents:
            doc = dict(doc, beta1=0.0, beta2=0.0, E0=doc.get("E0", 0.0))
        problem = _parse(detection.temp_test_problem_from_dict, doc)
        model = problem.to_model()
        offset = problem.log_states
    else:
        model = _parse(model_from_dict, doc)
        offset = model.counts.log_total if model.counts is not None else 0.0
    if model.epsilon0 != 1.0:
        raise OutOfRange("entropy-curve expects energies in units with epsilon0 = 1")
    rng = energy_range(model)
    e_max = float(model.p @ model.f.max(axis=1))
    if args.E_grid is not None:
        grid = _floats(args.E_grid)
    else:
        if args.points < 1:
            raise UsageError("--points must be positive")
        n = args.points
        grid = [rng.e_min + (e_max - rng.e_min) * (i + 0.5) / n for i in range(n)]
    if not grid:
        raise UsageError("--E-grid is empty")
    tol = 1e-12 * max(1.0, abs(rng.e_min), abs(e_max))
    for E in grid:
        if not rng.e_min - tol <= E <= e_max + tol:
            raise OutOfRange(
                f"grid energy {E:.12g} is outside [{rng.e_min:.12g}, {e_max:.12g}]"
            )

    tangents = {}
    special = {}
    if with_tangents:
        res = detection.temperature_test_exponents(problem)
        tangents = {
            "E1": (res.E1, res.sigma1, problem.beta1),
            "E2": (res.E2, res.sigma2, problem.beta2),
        }
        special = {"E1": res.E1, "E2": res.E2, "E0": res.E0}

    points = [(E, None) for E in grid]
    if args.mark_points:
        points += [
            (E, name)
            for name, E in special.items()
            if not any(abs(E - g) <= tol for g in grid)
        ]
        points.sort(key=lambda t: t[0])

    rows = []
    for E, marker in points:
        s, b = _full_entropy(model.p, model.logq, model.f, E, rng.e_mean)
        s += offset
        row = {"E": E, "sigma_bar": s, "beta": b}
        for name in ("E1", "E2"):
            if name in tangents:
                Ei, si, bi = tangents[name]
                t = si + bi * (E - Ei)
                row[f"tangent_{name}"], row[f"gap_{name}"] = t, t - s
            else:
                row[f"tangent_{name}"] = row[f"gap_{name}"] = None
        if marker is None:
            hits = [k for k, v in special.items() if abs(E - v) <= tol]
            marker = "+".join(hits)
        row["marker"] = marker
        rows.append({c: row[c] for c in CURVE_COLUMNS})
    return rows


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="path to the JSON input document")
    common.add_argument("--format", choices=FORMATS, default="json", help="output format")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="chernoff-thermo",
        description="Rate functions and exponents from weighted partition functions.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=fn)
        return p

    p = add("identity-check", cmd_identity_check, "compare the allocation maximum with the 1-D solve")
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--grid-points", type=int, default=200)

    p = add("rate-fn", cmd_rate_fn, "rate function I(E) and its regime")
    p.add_argument("--E", type=float, required=True)

    p = add("exact-prob", cmd_exact_prob, "exact log-probability by lattice convolution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--bin-width", type=float, default=None)

    p = add("mc-prob", cmd_mc_prob, "Monte Carlo log-probability (requires --seed)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--workers", type=int, default=None)

    p = add("dual-check", cmd_dual_check, "per-symbol versus block rate")
    p.add_argument("--E", type=float, required=True)

    p = add("rd", cmd_rd, "rate-distortion value of a discrete problem")
    p.add_argument("--D", type=float, default=None, help="override the document's D")

    p = add("rd-binary", cmd_rd_binary, "binary source, Hamming distortion, closed forms")
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--epsilon0", type=float, default=1.0)
    p.add_argument("--k", type=float, default=1.0)

    p = add("rd-highres", cmd_rd_highres, "high-resolution L_theta distortion or rate")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--D", type=float, default=None)

    add("capacity", cmd_capacity, "channel exponent (matched or mismatched metric)")

    p = add("detect", cmd_detect, "false-alarm and missed-detection exponents")
    p.add_argument("--E0", type=float, default=None, help="override the document's E0")

    p = add("temp-test", cmd_temp_test, "exponents of a two-temperature test")
    p.add_argument("--E0", type=float, default=None, help="override the document's E0")

    p = add("hc-integral", cmd_hc_integral, "exponent as a heat-capacity integral")
    p.add_argument("--which", choices=("I1", "I2"), required=True)
    p.add_argument("--E0", type=float, default=None, help="override the document's E0")

    p = add("quantizer", cmd_quantizer, "optimal time-sharing of scalar quantizers")
    p.add_argument("--D", type=float, default=None, help="override the document's D")
    p.add_argument("--direction", choices=quantizer.DIRECTIONS, default=None)

    p = add("pt-scan", cmd_pt_scan, "optimal support along a grid of distortion levels")
    p.add_argument("--D-grid", required=True, help="comma-separated, increasing")
    p.add_argument("--direction", choices=quantizer.DIRECTIONS, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = add("entropy-curve", cmd_entropy_curve, "entropy curve with tangent lines")
    p.add_argument("--E-grid", default=None, help="comma-separated energies")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--mark-points", action="store_true", help="add rows at E1, E2 and E0")
    p.add_argument("--E0", type=float, default=None, help="override the document's E0")
    return parser


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ValidityWarning)
            result = args.handler(args)
        for w in caught:
            if issubclass(w.category, ValidityWarning):
                stderr.write(f"ValidityWarning: {w.message}\n")
    except UsageError as exc:
        stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return 2
    except ChernoffError as exc:
        stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 1
    stdout.write(render(result, args.format))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
