"""Command-line front end: generate, solve, validate, bench and export-mip."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from .buffers import export_mip, min_fvs, total_buffers_given_mrb
from .depgraph import LabeledDepGraph, UnlabeledDepGraph, build_labeled, build_unlabeled
from .dualarm import DualWorld, FcParams, dualarm_solve
from .geometry import (Disc, GenerationError, Instance, Pose, Workspace, construct_special_instance,
                       generate_random_instance, world_vertices)
from .orla import CostModel, orla_star
from .plans import Plan, validate_plan
from .rbm import mrb_dfdp, mrb_dp, mrb_pqs, sepplan
from .trlb import trlb_solve

EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT = 0, 1, 2
DEFAULT_BUDGET_MS = 300_000.0
SOLVERS = ("dp", "dfdp", "pqs", "sepplan", "fvs", "tb-mrb", "trlb", "mchs", "fchs", "orla")
GRAPH_SOLVERS = {"dp", "dfdp", "pqs", "sepplan", "fvs", "tb-mrb"}


class BadInput(ValueError):
    pass


# ---------------------------------------------------------------------------
# loading


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("rearrange.data").iterdir() if p.name.endswith(".json"))


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        name = path.removeprefix("bundled:").removesuffix(".json")
        if name in bundled_names():
            return json.loads(resources.files("rearrange.data").joinpath(name + ".json").read_text())
        raise BadInput(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise BadInput(f"{path}: not valid JSON ({e})") from e


def load_input(path: str) -> Instance | LabeledDepGraph | UnlabeledDepGraph:
    """An instance file, a dependency-graph file, or the name of a bundled one."""
    d = _read_json(path)
    try:
        if d.get("kind") == "labeled":
            return LabeledDepGraph.from_json(d)
        if d.get("kind") == "unlabeled":
            return UnlabeledDepGraph(tuple(d["starts"]), tuple(d["goals"]),
                                     frozenset((int(s), int(g)) for s, g in d["edges"]))
        return Instance.from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise BadInput(f"{path}: malformed input ({e})") from e


def load_bundled(name: str):
    return load_input("bundled:" + name)


def load_plan(path: str) -> Plan:
    d = _read_json(path)
    if "plan" in d and isinstance(d["plan"], Mapping):
        d = d["plan"]
    try:
        return Plan.from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise BadInput(f"{path}: malformed plan ({e})") from e


# ---------------------------------------------------------------------------
# solving


def _labeled(obj) -> LabeledDepGraph:
    if isinstance(obj, LabeledDepGraph):
        return obj
    if isinstance(obj, Instance):
        if not obj.labeled:
            raise BadInput("this solver needs a labeled instance")
        return build_labeled(obj)
    raise BadInput("this solver needs a labeled instance or graph")


def _unlabeled(obj) -> UnlabeledDepGraph:
    if isinstance(obj, UnlabeledDepGraph):
        return obj
    if isinstance(obj, Instance):
        return build_unlabeled(obj)
    raise BadInput("this solver needs an unlabeled instance or graph")


def _graph_for(obj):
    if isinstance(obj, Instance):
        return build_labeled(obj) if obj.labeled else build_unlabeled(obj)
    return obj


def run_solver(name: str, obj, opts: Mapping[str, Any] | None = None) -> dict:
    """Run one solver and return a JSON-ready result with a ``success`` flag."""
    opts = dict(opts or {})
    budget = opts.get("budget_ms", DEFAULT_BUDGET_MS)
    seed = int(opts.get("seed", 0))
    out: dict[str, Any] = {"solver": name}
    if name in ("dp", "dfdp", "pqs"):
        if name == "dp":
            res = mrb_dp(_labeled(obj))
        elif name == "dfdp":
            res = mrb_dfdp(_graph_for(obj), budget_ms=budget)
        else:
            res = mrb_pqs(_unlabeled(obj), budget_ms=budget)
        out.update(res.to_json())
        out.update(success=res.complete and res.mrb is not None, value=res.mrb,
                   summary=f"MRB={_fmt(res.mrb)}")
        return out
    if name == "sepplan":
        res = sepplan(_unlabeled(obj))
        out.update(success=True, value=res.rb, bound=res.bound, ordering=list(res.plan.ordering),
                   fallbacks=res.fallbacks, summary=f"RB={_fmt(res.rb)} bound={res.bound:.2f}")
        return out
    if name == "fvs":
        res = min_fvs(_labeled(obj), budget_ms=budget)
        out.update(success=res.complete, value=res.size, fvs=sorted(res.fvs), certificate=list(res.certificate),
                   summary=f"MFVS={res.size}")
        return out
    if name == "tb-mrb":
        g = _labeled(obj)
        m = mrb_dfdp(g, budget_ms=budget)
        if m.mrb is None:
            out.update(success=False, value=None, summary="MRB not found within budget")
            return out
        tb = total_buffers_given_mrb(g, m.mrb, budget_ms=budget)
        out.update(success=tb.complete and tb.total is not None, value=tb.total, mrb=m.mrb,
                   ordering=list(tb.plan.ordering) if tb.plan else None,
                   summary=f"MRB={_fmt(m.mrb)} total_buffers={tb.total}")
        return out
    if not isinstance(obj, Instance):
        raise BadInput(f"{name} needs a geometric instance")
    if name == "trlb":
        res = trlb_solve(obj, opts.get("framework", "BST"), opts.get("mode", "RBM"), opts.get("method", "SP"),
                         bool(opts.get("preprocess", False)), seed, budget)
        n_act = len(res.plan.actions) if res.plan else None
        out.update(success=res.success, value=n_act, actions=n_act, elapsed_ms=res.elapsed_ms,
                   plan=res.plan.to_json() if res.plan else None,
                   summary=f"actions={n_act}" if res.success else "no plan within budget")
        return out
    if name in ("mchs", "fchs"):
        world = DualWorld(obj, float(opts.get("overlap", 0.3)), not opts.get("no_handoff", False))
        res = dualarm_solve(world, "MC" if name == "mchs" else "FC", FcParams(), seed)
        out.update(success=res.success, value=res.makespan, actions=len(res.plan.actions),
                   elapsed_ms=res.elapsed_ms, plan=res.plan.to_json(),
                   schedules=[s.to_json() for s in res.schedules],
                   summary=f"makespan={_fmt(res.makespan)} actions={len(res.plan.actions)}")
        return out
    if name == "orla":
        model = CostModel.for_instance(obj, opts.get("scenario", "EE"), float(opts.get("C", 10.0)))
        res = orla_star(obj, model, opts.get("objective", "full"), budget_ms=budget, seed=seed)
        n_act = len(res.plan.actions) if res.plan else None
        out.update(success=res.success, value=res.J, cost=res.J, actions=n_act, dist=res.dist, mani=res.mani,
                   elapsed_ms=res.elapsed_ms, plan=res.plan.to_json() if res.plan else None,
                   summary=f"J={_fmt(res.J)} actions={n_act}" if res.success else "no plan within budget")
        return out
    raise BadInput(f"unknown solver {name!r}")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return f"{v:.6g}" if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# svg snapshots


def arrangement_svg(instance: Instance, final: Mapping[int, Pose] | None = None, scale: float = 200.0) -> str:
    """Start (blue), goal (green, dashed) and final (orange) footprints."""
    ws = instance.workspace
    W, H = ws.w * scale, ws.h * scale
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.2f} {H:.2f}">',
             f'<rect x="0" y="0" width="{W:.2f}" height="{H:.2f}" fill="white" stroke="black"/>']
    layers = [(instance.start, "#1f77b4", ""), (instance.goal, "#2ca02c", ' stroke-dasharray="4 3"')]
    if final is not None:
        layers.append((final, "#ff7f0e", ""))
    for arr, color, extra in layers:
        for oid in instance.ids:
            p, shape = arr[oid], instance.shape(oid)
            style = f'fill="none" stroke="{color}"{extra}'
            if isinstance(shape, Disc):
                parts.append(f'<circle cx="{p.x * scale:.2f}" cy="{H - p.y * scale:.2f}" '
                             f'r="{shape.radius * scale:.2f}" {style}/>')
            else:
                pts = " ".join(f"{x * scale:.2f},{H - y * scale:.2f}" for x, y in world_vertices(shape, p))
                parts.append(f'<polygon points="{pts}" {style}/>')
            parts.append(f'<text x="{p.x * scale:.2f}" y="{H - p.y * scale:.2f}" font-size="10" '
                         f'fill="{color}" text-anchor="middle">{oid}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# bench

BENCH_FIELDS = ("solver", "n", "rho", "seed", "success", "value", "actions", "cost", "elapsed_ms")


def _bench_case(case: dict) -> dict:
    fam = case["family"]
    ws = Workspace(*fam.get("workspace", (1.0, 1.0)))
    row = {"solver": case["solver"], "n": case["n"], "rho": case["rho"], "seed": case["seed"],
           "success": False, "value": "", "actions": "", "cost": "", "elapsed_ms": ""}
    try:
        inst = generate_random_instance(case["n"], case["rho"], fam.get("shape", "disc"), case["seed"], ws,
                                        labeled=fam.get("labeled", True))
    except GenerationError:
        row["value"] = "generation-failed"
        return row
    t0 = time.perf_counter()
    try:
        res = run_solver(case["solver"], inst, {**case["params"], "seed": case["seed"],
                                                "budget_ms": case["time_limit_ms"]})
    except BadInput as e:
        row["value"] = f"bad-input: {e}"
        return row
    row["elapsed_ms"] = round((time.perf_counter() - t0) * 1e3, 3)
    row["success"] = bool(res.get("success"))
    for k in ("value", "actions", "cost"):
        v = res.get(k)
        row[k] = "" if v is None else (round(v, 9) if isinstance(v, float) else v)
    if case.get("svg_dir") and res.get("plan"):
        from .plans import replay

        final = replay(inst, Plan.from_json(res["plan"]).actions).final
        name = f"{case['solver']}_n{case['n']}_rho{case['rho']}_s{case['seed']}.svg"
        Path(case["svg_dir"]).mkdir(parents=True, exist_ok=True)
        (Path(case["svg_dir"]) / name).write_text(arrangement_svg(inst, final))
    return row


def bench_cases(spec: Mapping) -> list[dict]:
    fam = spec.get("family", {})
    ns = fam.get("n", [5])
    rhos = fam.get("rho", [0.3])
    seeds = fam.get("seeds", list(range(3)))
    limit = float(spec.get("time_limit_ms", DEFAULT_BUDGET_MS))
    cases = []
    for s in spec.get("solvers", []):
        sname, params = (s, {}) if isinstance(s, str) else (s["name"], dict(s.get("params", {})))
        if sname not in SOLVERS:
            raise BadInput(f"unknown solver {sname!r}")
        for n in ns:
            for rho in rhos:
                for seed in seeds:
                    cases.append({"solver": sname, "params": params, "n": int(n), "rho": float(rho),
                                  "seed": int(seed), "family": fam, "time_limit_ms": limit,
                                  "svg_dir": spec.get("svg_dir")})
    return cases


def run_bench(spec: Mapping, workers: int = 1) -> list[dict]:
    """Per-case rows sorted by (solver, n, rho, seed), then mean-over-successes rows."""
    cases = bench_cases(spec)
    if workers > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_case, cases))
    else:
        rows = [_bench_case(c) for c in cases]
    rows.sort(key=lambda r: (r["solver"], r["n"], r["rho"], r["seed"]))
    agg = []
    keys = sorted({(r["solver"], r["n"], r["rho"]) for r in rows})
    for key in keys:
        group = [r for r in rows if (r["solver"], r["n"], r["rho"]) == key]
        ok = [r for r in group if r["success"]]

        def mean(field: str):
            vals = [r[field] for r in ok if isinstance(r[field], (int, float)) and not isinstance(r[field], bool)]
            return round(statistics.fmean(vals), 9) if vals else ""

        agg.append({"solver": key[0], "n": key[1], "rho": key[2], "seed": "mean",
                    "success": f"{len(ok)}/{len(group)}", "value": mean("value"), "actions": mean("actions"),
                    "cost": mean("cost"), "elapsed_ms": mean("elapsed_ms")})
    return rows + agg


def rows_to_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in BENCH_FIELDS})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    if args.special:
        param = args.m if args.m is not None else args.n
        if param is None:
            raise BadInput("--special needs --n or --m")
        inst = construct_special_instance(args.special, param)
    else:
        if args.n is None:
            raise BadInput("--n is required")
        inst = generate_random_instance(args.n, args.rho, args.shape, args.seed,
                                        Workspace(args.width, args.height), labeled=not args.unlabeled)
    _emit(json.dumps(inst.to_json(), indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    obj = load_input(args.instance)
    opts = {"seed": args.seed, "budget_ms": args.budget_ms, "scenario": args.scenario.upper(),
            "objective": args.objective, "framework": args.framework, "mode": args.mode,
            "method": args.method, "preprocess": args.preprocess, "overlap": args.overlap,
            "no_handoff": args.no_handoff, "C": args.C}
    res = run_solver(args.solver, obj, opts)
    if args.out:
        Path(args.out).write_text(json.dumps(res, indent=1, default=_json_default) + "\n")
    print(f"{args.solver}: {res['summary']}")
    return EXIT_OK if res["success"] else EXIT_FAIL


def _json_default(o):
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, float) and math.isinf(o):
        return None
    return str(o)


def cmd_validate(args) -> int:
    inst = load_input(args.instance)
    if not isinstance(inst, Instance):
        raise BadInput("validate needs a geometric instance")
    plan = load_plan(args.plan)
    res = validate_plan(inst, plan)
    if res.ok:
        print(f"ok: {len(plan.actions)} actions")
        return EXIT_OK
    print(f"violation at step {res.index}: {res.message}")
    return EXIT_FAIL


def cmd_bench(args) -> int:
    spec = _read_json(args.spec)
    if args.svg_dir:
        spec["svg_dir"] = args.svg_dir
    rows = run_bench(spec, args.workers)
    _emit(rows_to_csv(rows), args.out or spec.get("out"))
    return EXIT_OK


def cmd_export_mip(args) -> int:
    g = _labeled(load_input(args.instance))
    _emit(export_mip(g, args.alpha, args.beta), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rearrange", description="Tabletop rearrangement planning tools.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random or special instance")
    g.add_argument("--special", choices=sorted({"sticks", "grid", "dependency_grid", "cycle", "labeled_cycle",
                                                "two_cycles"}))
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--rho", type=float, default=0.3)
    g.add_argument("--shape", default="disc", choices=["disc", "square", "rect", "poly", "rand"])
    g.add_argument("--width", type=float, default=1.0)
    g.add_argument("--height", type=float, default=1.0)
    g.add_argument("--unlabeled", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a solver on an instance or graph file")
    s.add_argument("solver", choices=SOLVERS)
    s.add_argument("instance", help="path, or the name of a bundled instance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget-ms", type=float, default=DEFAULT_BUDGET_MS)
    s.add_argument("--out")
    s.add_argument("--scenario", default="ee", choices=["ee", "mb", "EE", "MB"])
    s.add_argument("--objective", default="full", choices=["full", "action"])
    s.add_argument("--C", type=float, default=10.0)
    s.add_argument("--framework", default="BST", choices=["OS", "ST", "BST"])
    s.add_argument("--mode", default="RBM", choices=["RBM", "TBM", "RO"])
    s.add_argument("--method", default="SP", choices=["SP", "OPT"])
    s.add_argument("--preprocess", action="store_true")
    s.add_argument("--overlap", type=float, default=0.3)
    s.add_argument("--no-handoff", action="store_true")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="replay a plan against an instance")
    v.add_argument("plan")
    v.add_argument("instance")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="run a benchmark sweep and write CSV")
    b.add_argument("spec")
    b.add_argument("--out")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--svg-dir")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export-mip", help="write the lifting-order MIP as LP text")
    e.add_argument("instance")
    e.add_argument("--alpha", type=float, default=1.0)
    e.add_argument("--beta", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export_mip)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BadInput, GenerationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
