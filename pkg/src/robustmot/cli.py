"""Command-line front end: solve, sweep, verify, oracle, export.

Exit codes: 0 ok, 1 invariant failure, 2 input error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import classifier as clf
from .data import DataError, EmpiricalDistribution, dump_distribution, load_distribution, parse_rational
from .geometry import CostSpec, Metric, key_to_length, radius_key
from .instances import random_instance
from .lp import verify as lp_verify
from .mot import (DEFAULT_TUPLE_CAP, MotSolution, TupleCapExceeded, approx_threshold, barycenter_from_mot,
                  build_lp, enumerate_tuples, exceptional_radii, solve_mot, solve_mot_approx_sequence)
from .oracle import OracleError, grid_attack_oracle, matching_oracle, partition_oracle, unit_decomposition

SCHEMA = 1
EXIT_OK, EXIT_INVARIANT, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    pass


# ------------------------------------------------------------ serialization

def rat(x) -> str:
    return str(Fraction(x))


def dec(x) -> str:
    return format(float(x), ".12g")


def point_json(p) -> list[str]:
    return [rat(c) for c in p]


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def csv_text(header: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def classifier_json(f: clf.BallMaxClassifier) -> list[dict]:
    return [{"center": point_json(a.center), "class": a.cls + 1, "height": rat(a.height),
             "epsilon": rat(f.radius)} for a in f.atoms]


def solution_json(sol: MotSolution) -> dict:
    bary = barycenter_from_mot(sol)
    couplings = [{"atoms": [[i + 1, j] for i, j in t.members], "witness": point_json(t.witness),
                  "mass": rat(m)} for t, m in sol.active()]
    return {
        "primal_value": rat(sol.primal_value),
        "dual_value": rat(sol.dual_value),
        "tuples": len(sol.tuples),
        "duals": [[rat(v) for v in row] for row in sol.duals],
        "couplings": couplings,
        "barycenter": {
            "mass": rat(bary.mass),
            "lambda": [{"point": point_json(wp.point), "mass": rat(wp.mass)} for wp in bary.lam],
            "mu_tilde": [[{"point": point_json(wp.point), "mass": rat(wp.mass)} for wp in c]
                         for c in bary.mu_tilde],
        },
    }


def report_json(rep: clf.RiskReport) -> dict:
    return {
        "nominal": rat(rep.nominal),
        "closed_lower": rat(rep.closed_lower),
        "closed_upper": rat(rep.closed_upper),
        "open_lower": rat(rep.open_lower),
        "open_optimal": None if rep.open_optimal is None else rat(rep.open_optimal),
        "tv": [rat(t) for t in rep.tv_terms],
        "exact": rep.exact,
        "flags": dict(sorted(rep.flags.items())),
    }


def flat_rows(doc, prefix="") -> list[list[str]]:
    """Flatten scalar report entries to key,value,decimal rows."""
    rows = []
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows += flat_rows(v, key + ".")
        elif isinstance(v, list):
            if all(isinstance(t, str) for t in v):
                for n, t in enumerate(v, 1):
                    rows += flat_rows({f"{k}_{n}": t}, prefix)
        elif isinstance(v, str) and v and v[0] in "-0123456789":
            try:
                rows.append([key, v, dec(Fraction(v))])
            except ValueError:
                rows.append([key, v, ""])
        elif isinstance(v, str):
            rows.append([key, v, ""])
        else:
            rows.append([key, json.dumps(v), ""])
    return rows


def write_report(out: Path, name: str, doc: dict, fmt: str) -> None:
    if fmt == "csv":
        write_text(out / f"{name}.csv", csv_text(["key", "value", "decimal"], flat_rows(doc)))
    else:
        write_text(out / f"{name}.json", dump_json(doc))


# ------------------------------------------------------------- config

def parse_eps_list(items) -> list[Fraction]:
    vals = [parse_rational(t) for item in items for t in item.replace(",", " ").split()]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise InputError("--eps-list must be strictly increasing")
    if any(v < 0 for v in vals):
        raise InputError("budgets must be nonnegative")
    return vals


def load_input(args) -> tuple[EmpiricalDistribution, bytes]:
    if not args.input:
        raise InputError("--input is required")
    path = Path(args.input)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    fmt = args.format or ("json" if path.suffix.lower() == ".json" else "csv")
    return load_distribution(raw, fmt, normalize=args.normalize), raw


def make_spec(args, eps=None) -> CostSpec:
    eps = eps if eps is not None else args.eps
    if eps is None:
        raise InputError("--eps is required")
    eps = parse_rational(eps)
    if eps < 0:
        raise InputError("budget must be nonnegative")
    if args.approx_n is not None and args.approx_n < 1:
        raise InputError("--approx-n must be positive")
    return CostSpec(Metric(args.metric), eps, args.approx_n)


def input_block(mu: EmpiricalDistribution, raw: bytes) -> dict:
    return {"sha256": hashlib.sha256(raw).hexdigest(), "dimension": mu.dimension, "classes": mu.K,
            "atoms": mu.n_atoms()}


def grid_rows(f: clf.BallMaxClassifier, mu: EmpiricalDistribution, res: int) -> tuple[list[str], list[list]]:
    if mu.dimension > 2:
        raise InputError("grid export supports dimension <= 2")
    pad = 2 * f.radius + Fraction(1, 2)
    lo = [min(p[k] for p in mu.points()) - pad for k in range(mu.dimension)]
    hi = [max(p[k] for p in mu.points()) + pad for k in range(mu.dimension)]
    axes = [[lo[k] + (hi[k] - lo[k]) * Fraction(t, res - 1) for t in range(res)] for k in range(mu.dimension)]
    pts = [(x,) for x in axes[0]] if mu.dimension == 1 else [(x, y) for y in axes[1] for x in axes[0]]
    header = ([f"coord_{k + 1}" for k in range(mu.dimension)] + [f"f_{i + 1}" for i in range(f.K)]
              + [f"f_{i + 1}_approx" for i in range(f.K)])
    rows = []
    for p in pts:
        v = f(p)
        rows.append([rat(c) for c in p] + [rat(t) for t in v] + [dec(t) for t in v])
    return header, rows


# ------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    mu, raw = load_input(args)
    spec = make_spec(args)
    out = Path(args.out)
    doc = {"schema": SCHEMA, "command": "solve", "input": input_block(mu, raw),
           "metric": spec.metric.value, "epsilon": rat(spec.epsilon)}
    if spec.approx_n is not None:
        sol = solve_mot(mu, spec, cap=args.tuple_cap)
        exact = solve_mot(mu, spec.with_n(None), cap=args.tuple_cap)
        doc.update({"approx_n": spec.approx_n, "mot_value": rat(sol.primal_value),
                    "approx_dro": rat(sol.dro_risk), "dro": rat(exact.dro_risk),
                    "threshold_n": approx_threshold(mu, spec, cap=args.tuple_cap)})
        write_report(out, "report", doc, args.report)
        print(f"dro {doc['dro']}  approx_dro(n={spec.approx_n}) {doc['approx_dro']}")
        return EXIT_OK
    sol = solve_mot(mu, spec, cap=args.tuple_cap)
    open_sol = solve_mot(mu, spec, strict=True, cap=args.tuple_cap)
    f, rep = clf.risk_report(sol, open_sol)
    doc.update({"dro": rat(sol.dro_risk), "open_dro": rat(open_sol.dro_risk), "risk": report_json(rep),
                "mot": solution_json(sol)})
    write_report(out, "report", doc, args.report)
    write_text(out / "classifier.json", dump_json(classifier_json(f)))
    if args.grid_res:
        header, rows = grid_rows(f, mu, args.grid_res)
        write_text(out / "grid.csv", csv_text(header, rows))
    print(f"dro {doc['dro']}  open {doc['open_dro']}  closed [{rat(rep.closed_lower)}, {rat(rep.closed_upper)}]")
    return EXIT_OK


def cmd_sweep(args) -> int:
    mu, raw = load_input(args)
    if not args.eps_list:
        raise InputError("--eps-list is required")
    budgets = parse_eps_list(args.eps_list)
    metric = Metric(args.metric)
    exceptional = exceptional_radii(mu, CostSpec(metric, Fraction(0)), cap=args.tuple_cap)
    rows, entries = [], []
    ok = True
    prev = None
    for eps in budgets:
        spec = CostSpec(metric, eps)
        sol = solve_mot(mu, spec, cap=args.tuple_cap)
        open_sol = solve_mot(mu, spec, strict=True, cap=args.tuple_cap)
        _, rep = clf.risk_report(sol, open_sol)
        flagged = open_sol.dro_risk != sol.dro_risk
        in_set = radius_key(eps, metric) in exceptional
        monotone = prev is None or prev <= sol.dro_risk
        ok &= (not flagged or in_set) and monotone
        prev = sol.dro_risk
        vals = [eps, sol.dro_risk, open_sol.dro_risk, rep.open_lower, rep.closed_lower, rep.closed_upper]
        rows.append([rat(v) for v in vals] + [int(flagged), int(in_set)] + [dec(v) for v in vals])
        entries.append({"epsilon": rat(eps), "dro": rat(sol.dro_risk), "open_dro": rat(open_sol.dro_risk),
                        "open_lower": rat(rep.open_lower), "closed_lower": rat(rep.closed_lower),
                        "closed_upper": rat(rep.closed_upper), "flagged": flagged, "exceptional": in_set})
    out = Path(args.out)
    names = ["epsilon", "dro", "open_dro", "open_lower", "closed_lower", "closed_upper"]
    header = names + ["flagged", "exceptional"] + [f"{n}_approx" for n in names]
    write_text(out / "risk_curve.csv", csv_text(header, rows))
    radii = sorted(exceptional)
    doc = {"schema": SCHEMA, "command": "sweep", "input": input_block(mu, raw), "metric": metric.value,
           "points": entries,
           "exceptional_radii": [dec(key_to_length(k, metric)) for k in radii],
           "exceptional_radius_keys": [rat(k) for k in radii],
           "flagged": [e["epsilon"] for e in entries if e["flagged"]],
           "ok": ok}
    write_report(out, "report", doc, args.report)
    print(f"flagged budgets: {', '.join(doc['flagged']) or 'none'}")
    return EXIT_OK if ok else EXIT_INVARIANT


def verify_instance(mu: EmpiricalDistribution, spec: CostSpec, trials: int = 100, seed: int = 0,
                    cap: int = DEFAULT_TUPLE_CAP, oracle_cap: int = 10) -> dict[str, dict]:
    """Run every invariant on one instance; returns name -> {"pass", "detail"}."""
    res: dict[str, dict] = {}

    def record(name: str, passed: bool, detail="") -> None:
        res[name] = {"pass": bool(passed), "detail": str(detail)}

    sol = solve_mot(mu, spec, cap=cap)
    open_sol = solve_mot(mu, spec, strict=True, cap=cap)
    f = clf.build_classifier(sol)
    fr = clf.reporting_classifier(f)
    extra = clf.witnesses(sol)
    record("lp_certificate", lp_verify(build_lp(mu, sol.tuples), sol.lp_result))
    record("duality_gap", sol.primal_value == sol.dual_value, f"{sol.primal_value} vs {sol.dual_value}")
    bary = barycenter_from_mot(sol)
    record("dro_chain", sol.dro_risk == 1 - bary.objective(mu, spec), f"dro {sol.dro_risk}")
    pts = clf.evaluation_points(f, mu, spec.epsilon, extra)
    record("simplex_membership", not clf.simplex_violations(f, pts), f"{len(pts)} points")
    bad = clf.c_transform_mismatches(f, sol)
    record("c_transform", not bad, bad[:3])
    sc = clf.saddle_check(f, bary, mu, spec, trials=trials, seed=seed)
    record("saddle_left", not sc.left_violations and sc.at_barycenter == sc.dro, sc.left_violations[:3])
    record("saddle_right", sc.best_response == sc.dro, f"{sc.best_response} vs {sc.dro}")
    lower, upper = clf.closed_ball_risk_bounds(fr, mu, sol, ref=f)
    if mu.dimension == 1:
        record("closed_optimality", lower == upper == sol.dro_risk, f"[{lower}, {upper}]")
    else:
        record("closed_optimality", lower <= sol.dro_risk == upper, f"[{lower}, {upper}] gap {upper - lower}")
    fo = clf.reporting_classifier(clf.build_classifier(open_sol))
    olow = clf.open_ball_risk_lower(fo, mu, spec.epsilon, clf.witnesses(open_sol), ref=fo)
    if mu.dimension == 1:
        record("open_optimality", olow == open_sol.dro_risk, f"{olow} vs {open_sol.dro_risk}")
    else:
        record("open_optimality", olow <= open_sol.dro_risk, f"{olow} <= {open_sol.dro_risk}")
    exceptional = radius_key(spec.epsilon, spec.metric) in exceptional_radii(mu, spec, cap=cap)
    record("open_closed_equality", open_sol.dro_risk == sol.dro_risk or exceptional,
           f"open {open_sol.dro_risk} closed {sol.dro_risk} exceptional {exceptional}")
    if spec.epsilon > 0:
        tv = clf.tv_decomposition(fr, mu, spec.epsilon, extra)
        record("tv_recombination", tv.ok, f"{tv.recombined} vs {tv.open_risk}")
    if mu.K == 2:
        co = clf.threshold_and_coarea(f, mu, spec.epsilon, sol.dro_risk, extra)
        if mu.dimension == 1:
            record("coarea", co.identity_holds and co.all_bands_optimal, f"{co.weighted} vs {co.soft_risk}")
        else:
            record("coarea", co.weighted <= sol.dro_risk, f"{co.weighted} (candidate bound)")
        m = matching_oracle(mu, spec)
        record("matching_oracle", m.value == sol.dro_risk, f"{m.value} vs {sol.dro_risk}")
    try:
        unit, units = unit_decomposition(mu)
        if len(units) <= oracle_cap:
            p = partition_oracle(mu, spec, cap=oracle_cap)
            record("partition_oracle", p.value <= sol.dro_risk,
                   f"partition {p.value} lp {sol.dro_risk}" + (" (strict gap)" if p.value < sol.dro_risk else ""))
    except OracleError as exc:
        record("partition_oracle", True, f"skipped: {exc}")
    thr = approx_threshold(mu, spec, cap=cap)
    ns = sorted(set(range(1, min(thr, 12) + 1)) | {thr, thr + 1, thr + 3})
    seq = solve_mot_approx_sequence(mu, spec, ns, cap=cap)
    vals = [v for _, v in seq]
    mono = all(a <= b for a, b in zip(vals, vals[1:]))
    tail = all(v == sol.primal_value for n, v in seq if n >= thr)
    record("approx_monotone", mono and tail and all(v <= sol.primal_value for v in vals),
           f"threshold {thr}: " + ", ".join(f"{n}:{v}" for n, v in seq))
    return res


def replay_report(mu: EmpiricalDistribution, spec: CostSpec, doc: dict) -> dict[str, dict]:
    """Re-check the certificates stored in a solve report without re-solving."""
    res: dict[str, dict] = {}

    def record(name, passed, detail=""):
        res[name] = {"pass": bool(passed), "detail": str(detail)}

    try:
        mot = doc["mot"]
        couplings = [([(int(i) - 1, int(j)) for i, j in c["atoms"]], [parse_rational(v) for v in c["witness"]],
                      parse_rational(c["mass"])) for c in mot["couplings"]]
        duals = [[parse_rational(v) for v in row] for row in mot["duals"]]
        primal = parse_rational(mot["primal_value"])
        dro = parse_rational(doc["dro"])
    except (KeyError, TypeError, ValueError) as exc:
        record("replay_schema", False, exc)
        return res
    record("replay_schema", doc.get("schema") == SCHEMA and len(duals) == mu.K
           and all(len(r) == len(c) for r, c in zip(duals, mu.classes)))
    if not res["replay_schema"]["pass"]:
        return res
    used = [[Fraction(0)] * len(c) for c in mu.classes]
    fits = True
    for members, w, m in couplings:
        for i, j in members:
            used[i][j] += m
        pts = [mu.classes[i][j].point for i, j in members]
        fits &= all(clf._inside(p, tuple(w), spec.epsilon, True, spec.metric) for p in pts)
    record("replay_marginals", all(used[i][j] == wp.mass for i, j, wp in mu.atoms()))
    record("replay_tuple_feasibility", fits)
    record("replay_primal_value", primal == sum((m for _, _, m in couplings), Fraction(0)))
    worst = max((sum((duals[i][j] for i, j in t.members), Fraction(0)) for t in enumerate_tuples(mu, spec)),
                default=Fraction(0))
    record("replay_dual_feasibility", worst <= 1, f"max tuple dual sum {worst}")
    dual_value = sum((duals[i][j] * wp.mass for i, j, wp in mu.atoms()), Fraction(0))
    record("replay_strong_duality", dual_value == primal, f"{dual_value} vs {primal}")
    record("replay_dro_chain", dro == 1 - primal, f"dro {dro} primal {primal}")
    return res


def cmd_verify(args) -> int:
    mu, raw = load_input(args)
    spec = make_spec(args)
    if spec.approx_n is not None:
        raise InputError("verify runs on the budget cost; drop --approx-n")
    if args.replay:
        try:
            doc = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read replay report: {exc}") from exc
        results = replay_report(mu, spec, doc)
    else:
        results = verify_instance(mu, spec, trials=args.trials, seed=args.seed, cap=args.tuple_cap)
    ok = all(r["pass"] for r in results.values())
    out = {"schema": SCHEMA, "command": "verify", "input": input_block(mu, raw), "metric": spec.metric.value,
           "epsilon": rat(spec.epsilon), "invariants": results, "ok": ok}
    write_report(Path(args.out), "verify", out, args.report)
    for name, r in results.items():
        print(f"{'PASS' if r['pass'] else 'FAIL'} {name} {r['detail']}")
    return EXIT_OK if ok else EXIT_INVARIANT


def oracle_rows(mu: EmpiricalDistribution, spec: CostSpec, grid_res: int, cap: int) -> list[dict]:
    sol = solve_mot(mu, spec, cap=cap)
    lp = sol.dro_risk
    rows = []
    if mu.K == 2:
        v = matching_oracle(mu, spec).value
        rows.append({"oracle": "matching", "value": rat(v), "lp": rat(lp), "relation": "==", "ok": v == lp})
    else:
        rows.append({"oracle": "matching", "skipped": "needs K == 2"})
    try:
        v = partition_oracle(mu, spec).value
        rows.append({"oracle": "partition", "value": rat(v), "lp": rat(lp), "relation": "<=", "ok": v <= lp,
                     "equal": v == lp})
    except OracleError as exc:
        rows.append({"oracle": "partition", "skipped": str(exc)})
    if mu.dimension <= 2:
        f = clf.build_classifier(sol)
        g = grid_attack_oracle(clf.reporting_classifier(f), mu, spec, grid_res)
        rows.append({"oracle": "grid_attack", "value": rat(g.value), "lp": rat(lp), "relation": "<=",
                     "ok": g.value <= lp and (not g.exact or g.value == lp), "exact": g.exact})
    else:
        rows.append({"oracle": "grid_attack", "skipped": "needs dimension <= 2"})
    return rows


def cmd_oracle(args) -> int:
    cases = []
    if args.random:
        for s in range(args.seed, args.seed + args.random):
            mu, spec = random_instance(s)
            cases.append((f"seed-{s}", mu, spec, None))
    else:
        mu, raw = load_input(args)
        cases.append((args.input, mu, make_spec(args), raw))
    table = []
    ok = True
    for name, mu, spec, raw in cases:
        rows = oracle_rows(mu, spec, args.grid_res or 16, args.tuple_cap)
        ok &= all(r.get("ok", True) for r in rows)
        entry = {"instance": name, "metric": spec.metric.value, "epsilon": rat(spec.epsilon), "rows": rows}
        if raw is not None:
            entry["input"] = input_block(mu, raw)
        table.append(entry)
        for r in rows:
            if "skipped" in r:
                print(f"{name} {r['oracle']}: skipped ({r['skipped']})")
            else:
                print(f"{name} {r['oracle']}: {r['value']} {r['relation']} lp {r['lp']} {'ok' if r['ok'] else 'MISMATCH'}")
    write_report(Path(args.out), "oracle", {"schema": SCHEMA, "command": "oracle", "cases": table, "ok": ok}
                 if args.report == "json" else {"schema": SCHEMA, "ok": ok}, args.report)
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_export(args) -> int:
    mu, _ = load_input(args)
    spec = make_spec(args)
    sol = solve_mot(mu, spec, cap=args.tuple_cap)
    f = clf.reporting_classifier(clf.build_classifier(sol))
    out = Path(args.out)
    write_text(out / "classifier.json", dump_json(classifier_json(f)))
    if mu.dimension <= 2:
        header, rows = grid_rows(f, mu, args.grid_res or 32)
        write_text(out / "grid.csv", csv_text(header, rows))
    write_text(out / "data.csv", dump_distribution(mu, "csv"))
    write_text(out / "data.json", dump_distribution(mu, "json"))
    print(f"exported to {out}")
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="data file (CSV coord_1..coord_d,label,mass or JSON)")
    common.add_argument("--format", choices=["csv", "json"], help="input format (default: by extension)")
    common.add_argument("--normalize", action="store_true", help="rescale masses to total 1")
    common.add_argument("--metric", choices=[m.value for m in Metric], default="l2")
    common.add_argument("--eps", help="adversarial budget, e.g. 1/2 or 0.4")
    common.add_argument("--eps-list", nargs="+", help="increasing budgets for sweep")
    common.add_argument("--approx-n", type=int, help="use the Lipschitz cost c_n")
    common.add_argument("--tuple-cap", type=int, default=DEFAULT_TUPLE_CAP)
    common.add_argument("--grid-res", type=int, default=0, help="grid points per axis for grid.csv")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--report", choices=["json", "csv"], default="json")
    common.add_argument("--trials", type=int, default=100, help="random perturbations in the saddle check")

    p = argparse.ArgumentParser(prog="robustmot", description="Optimal multiclass adversarial risk via multimarginal transport.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one instance")
    sub.add_parser("sweep", parents=[common], help="risk curve over budgets")
    v = sub.add_parser("verify", parents=[common], help="run all invariants")
    v.add_argument("--replay", help="re-check a report.json written by solve")
    o = sub.add_parser("oracle", parents=[common], help="compare with brute-force oracles")
    o.add_argument("--random", type=int, default=0, help="run N seeded random instances instead of --input")
    sub.add_parser("export", parents=[common], help="classifier and plot data")
    return p


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "oracle": cmd_oracle,
            "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (InputError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TupleCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
