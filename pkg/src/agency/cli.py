"""Command line front end.

One subcommand per workflow: list the builtin games, audit assumptions,
solve for truthful equilibria, verify a candidate, test an allocation
for efficiency, sample the utility frontier, enumerate tiny-game
equilibria exactly, and dump indifference-curve data for the bid plane.

Reports are a single JSON document per run.  With ``--out DIR`` the
report, any CSV tables, and companion figures land in that directory;
without it the report (or the table, under ``--format csv``) goes to
stdout.  Exit status: 0 pass, 1 a check failed (witness in the report),
2 usage or structural error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

import numpy as np

from . import figures
from .assumptions import (
    assumption_battery,
    audit_game,
    validity_report,
)
from .catalog import (
    ALIASES,
    DESCRIPTIONS,
    battery_games,
    closed_form_candidate,
    finite_variant,
    get_game,
    names,
)
from .efficiency import (
    DEFAULT_BID_RESOLUTION,
    bid_axes,
    check_efficiency,
    frontier_sample,
    mesh_utilities,
)
from .equilibrium import (
    enumerate_equilibria_small,
    solve_truthful,
    verify_truthful_equilibrium,
)
from .gamefile import load_candidate_file, load_game, load_game_file, save_candidate
from .games import GameError, GameSpec, bounds_on_grid, evaluate, make_allocation
from .reporting import csv_text, report_text, write_text
from .reports import jsonable

BATTERY_COLUMNS = ("A1", "A2", "B", "C", "D2", "E", "F")


def _typed(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise GameError(f"--param expects k=v, got {pair!r}")
        params[key] = _typed(value)
    return params


def _load(args):
    """Resolve --game/--file (+ --param) into a bundle-like pair."""
    params = _parse_params(getattr(args, "param", None))
    if args.game and args.file:
        raise GameError("give either --game or --file, not both")
    if args.game:
        return get_game(args.game, **params)
    if args.file:
        spec, defn = load_game_file(args.file)
        if params:
            defn = json.loads(json.dumps(defn))
            defn["params"] = {**defn.get("params", {}), **params}
            spec = load_game(defn)
        from .catalog import GameBundle

        return GameBundle(spec, defn)
    raise GameError("a game is required: --game NAME or --file PATH")


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise GameError(f"expected comma-separated numbers, got {text!r}") from None


class Emitter:
    """Single-threaded, ordered output assembly for one run."""

    def __init__(self, args):
        self.out = args.out
        self.format = args.format
        self.tables: list[tuple[str, str]] = []
        self.figure_jobs: list = []
        self.written: list[str] = []

    def table(self, name: str, header, rows) -> None:
        self.tables.append((name, csv_text(header, rows)))

    def figure(self, fn, name: str, *fargs, **fkwargs) -> None:
        if self.out:
            self.figure_jobs.append((fn, name, fargs, fkwargs))

    def finish(self, payload: dict) -> None:
        text = report_text(payload)
        if self.out:
            os.makedirs(self.out, exist_ok=True)
            self.written.append(write_text(os.path.join(self.out, "report.json"), text))
            for name, body in self.tables:
                self.written.append(write_text(os.path.join(self.out, name), body))
            for fn, name, fargs, fkwargs in self.figure_jobs:
                path = os.path.join(self.out, name)
                try:
                    self.written.append(fn(*fargs, path=path, **fkwargs))
                except Exception as exc:  # figures are side files only
                    print(f"figure {name} skipped: {exc}", file=sys.stderr)
            for path in self.written:
                print(path)
        elif self.format == "csv" and self.tables:
            sys.stdout.write(self.tables[0][1])
        elif self.format == "csv":
            rows = _flat_rows(payload)
            sys.stdout.write(csv_text(("key", "value"), rows))
        else:
            sys.stdout.write(text)


def _flat_rows(payload, prefix: str = ""):
    rows = []
    if isinstance(payload, dict):
        for key in sorted(payload):
            rows.extend(_flat_rows(payload[key], f"{prefix}{key}."))
    elif isinstance(payload, (list, tuple)):
        for k, item in enumerate(payload):
            rows.extend(_flat_rows(item, f"{prefix}{k}."))
    else:
        rows.append((prefix[:-1], payload))
    return rows


def _run_config(args, **extra) -> dict:
    # worker count changes scheduling, never results, so it stays out of
    # the report to keep bytes identical across parallelism levels
    cfg = {"command": args.command}
    for key in ("game", "file", "resolution", "bid_resolution", "samples", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    params = _parse_params(getattr(args, "param", None))
    if params:
        cfg["params"] = params
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# subcommands

def _cmd_list_games(args, emit: Emitter) -> int:
    back = {target: alias for alias, target in ALIASES.items()}
    games = []
    for name in names():
        bundle = get_game(name)
        entry = {
            "name": name,
            "description": DESCRIPTIONS.get(name, ""),
            "params": bundle.definition.get("params", {}),
            "n": bundle.spec.n,
            "flags": sorted(bundle.spec.flags),
        }
        if name in back:
            entry["alias"] = back[name]
        games.append(entry)
    emit.table("games.csv", ("name", "n", "params", "description"),
               [(g["name"], g["n"],
                 " ".join(f"{k}={v}" for k, v in sorted(g["params"].items())),
                 g["description"]) for g in games])
    emit.finish({"run": _run_config(args), "games": games})
    return 0


def _check_rows(checks: dict) -> list:
    return [(key, rep.passed, rep.residual) for key, rep in checks.items()]


def _cmd_check_assumptions(args, emit: Emitter) -> int:
    samples = args.samples or 10_000
    if args.battery:
        bundles = battery_games()
        rows = assumption_battery([b.spec for b in bundles], samples=samples,
                                  seed=args.seed, workers=args.workers or 1)
        emit.table("battery.csv", ("game", "check", "passed", "residual"),
                   [(row.name, key, rep.passed, rep.residual)
                    for row in rows for key, rep in row.checks.items()])
        emit.figure(figures.battery_figure, "battery.png",
                    [row.name for row in rows], list(BATTERY_COLUMNS),
                    [[row.checks[c].passed for c in BATTERY_COLUMNS] for row in rows])
        emit.finish({"run": _run_config(args, battery=True),
                     "battery": [row.to_jsonable() for row in rows]})
        return 0

    bundle = _load(args)
    spec = bundle.spec
    cand = None
    if args.candidate:
        cand = load_candidate_file(args.candidate, spec, args.resolution)
    row = audit_game(spec, samples=samples, seed=args.seed)
    validity = validity_report(spec, cand, samples=samples, seed=args.seed)
    emit.table("checks.csv", ("check", "passed", "residual"), _check_rows(row.checks))
    emit.figure(figures.margins_figure, "checks.png",
                list(row.checks), [rep.residual if rep.passed else -max(rep.residual, 1e-12)
                                   for rep in row.checks.values()],
                title=spec.name)
    emit.finish({"run": _run_config(args), "checks": row.to_jsonable(),
                 "validity": validity.to_jsonable()})
    return 0 if validity.valid else 1


def _cmd_solve(args, emit: Emitter) -> int:
    bundle = _load(args)
    spec = bundle.spec
    result = solve_truthful(spec, resolution=args.resolution,
                            workers=args.workers or 1)
    ok = [i for i, rep in enumerate(result.reports) if rep.passed]
    best = result.candidates[ok[0]] if ok else None
    validity = validity_report(spec, best, samples=args.samples or 10_000,
                               seed=args.seed)
    payload = {"run": _run_config(args), "solve": result.to_jsonable(),
               "validity": validity.to_jsonable(),
               "found": best.to_jsonable() if best else None}
    if best is not None:
        emit.table("candidate.csv", ("field", "value"),
                   _flat_rows(jsonable(best.to_jsonable())))
        if emit.out:
            os.makedirs(emit.out, exist_ok=True)
            path = os.path.join(emit.out, "candidate.json")
            save_candidate(best, path)
            emit.written.append(path)
        if spec.action_space.scalar:
            grid = best.profile.grid
            emit.figure(figures.schedule_figure, "profile.png",
                        grid.axes[0], best.profile.values,
                        bounds_on_grid(spec, grid), title=spec.name)
    emit.finish(payload)
    return 0 if best is not None else 1


def _materialize_candidate(args, bundle):
    if args.candidate:
        return load_candidate_file(args.candidate, bundle.spec, args.resolution)
    if bundle.closed_form is not None:
        return closed_form_candidate(bundle, args.resolution)
    raise GameError(f"{bundle.spec.name} has no stored outcome; pass --candidate")


def _cmd_verify(args, emit: Emitter) -> int:
    bundle = _load(args)
    cand = _materialize_candidate(args, bundle)
    report = verify_truthful_equilibrium(bundle.spec, cand)
    emit.table("conditions.csv", ("condition", "passed", "residual"),
               _check_rows(report.conditions))
    emit.figure(figures.margins_figure, "conditions.png",
                list(report.conditions),
                [rep.residual if rep.passed else -max(rep.residual, 1e-12)
                 for rep in report.conditions.values()],
                title=f"{bundle.spec.name}: certificate")
    emit.finish({"run": _run_config(args), "verify": report.to_jsonable()})
    return 0 if report.passed else 1


def _allocation_for(args, bundle):
    spec = bundle.spec
    if args.candidate:
        cand = load_candidate_file(args.candidate, spec, args.resolution)
        bids = cand.profile.at(cand.action)
        return make_allocation(spec, cand.action, bids)
    cf = bundle.closed_form
    if cf is not None:
        return make_allocation(spec, cf.action, cf.bids)
    if bundle.reference is not None:
        ref = bundle.reference
        return make_allocation(spec, ref.action, ref.bids)
    raise GameError(f"{spec.name} has no stored allocation; pass --candidate")


def _cmd_efficiency(args, emit: Emitter) -> int:
    bundle = _load(args)
    alloc = _allocation_for(args, bundle)
    report = check_efficiency(bundle.spec, alloc,
                              bid_resolution=args.bid_resolution or DEFAULT_BID_RESOLUTION,
                              resolution=args.resolution)
    if report.witness is not None:
        emit.figure(figures.margins_figure, "witness.png",
                    [f"u{k}" for k in range(bundle.spec.n + 1)],
                    report.witness["margins"]
                    if isinstance(report.witness, dict) else report.witness.margins,
                    title="dominating allocation margins")
    emit.table("efficiency.csv", ("field", "value"),
               _flat_rows(jsonable(report.to_jsonable())))
    emit.finish({"run": _run_config(args),
                 "allocation": {"action": jsonable(alloc.action),
                                "bids": list(alloc.bids),
                                "utilities": list(alloc.utilities)},
                 "efficiency": report.to_jsonable()})
    return 0 if report.passed else 1


def _frontier_header(spec: GameSpec) -> list[str]:
    if spec.action_space.scalar:
        acts = ["a"]
    else:
        acts = [f"a{d + 1}" for d in range(spec.action_space.ndim)]
    return acts + [f"b{i + 1}" for i in range(spec.n)] + \
        [f"u{k}" for k in range(spec.n + 1)]


def _cmd_frontier(args, emit: Emitter) -> int:
    bundle = _load(args)
    spec = bundle.spec
    rows = frontier_sample(spec, resolution=args.resolution,
                           bid_resolution=args.bid_resolution or 21)
    table = [tuple(r["allocation"]) + tuple(r["utilities"]) for r in rows]
    emit.table("frontier.csv", _frontier_header(spec), table)
    emit.figure(figures.frontier_figure, "frontier.png",
                [r["utilities"] for r in rows], title=f"{spec.name}: frontier")
    emit.finish({"run": _run_config(args), "count": len(rows), "frontier": rows})
    return 0


def _cmd_oracle(args, emit: Emitter) -> int:
    bundle = _load(args)
    spec = bundle.spec
    if args.bids is None:
        raise GameError("oracle needs --bids v1,v2,...")
    bid_set = _float_list(args.bids)
    grid = None
    if args.actions:
        pts = _float_list(args.actions)
        grid = finite_variant(spec, pts).grid()
    elif spec.action_space.kind != "finite":
        raise GameError("oracle needs --actions for continuum games")
    result = enumerate_equilibria_small(spec, bid_set, grid)
    emit.table("oracle.csv",
               ["action", *(f"b{i + 1}" for i in range(spec.n)),
                *(f"u{k}" for k in range(spec.n + 1)), "tie_break_dependent"],
               [(jsonable(eq.action), *eq.bids, *eq.utilities,
                 eq.tie_break_dependent) for eq in result.equilibria])
    emit.finish({"run": _run_config(args), "oracle": result.to_jsonable()})
    return 0


def _curve_reference(args, bundle):
    spec = bundle.spec
    if args.candidate:
        cand = load_candidate_file(args.candidate, spec, args.resolution)
        bids = np.asarray(cand.profile.at(cand.action), float)
        return cand.action, bids
    if bundle.reference is not None:
        return bundle.reference.action, np.asarray(bundle.reference.bids, float)
    cf = bundle.closed_form
    if cf is not None:
        if "A" in cf.benchmarks:
            mark = cf.benchmarks["A"]
            return mark.action, np.asarray(mark.bids, float)
        return cf.action, np.asarray(cf.bids, float)
    raise GameError(f"{spec.name} has no reference allocation; pass --candidate")


def _cmd_curves(args, emit: Emitter) -> int:
    bundle = _load(args)
    spec = bundle.spec
    if spec.n != 2:
        raise GameError("curves needs exactly two principals")
    action, ref_bids = _curve_reference(args, bundle)
    ref_levels = evaluate(spec, action, ref_bids)
    res = args.bid_resolution or 41
    if res == 1:
        axes = [np.asarray([ref_bids[0]]), np.asarray([ref_bids[1]])]
    else:
        axes = bid_axes(spec, action, res)
    mesh = np.asarray(list(itertools.product(axes[0], axes[1])), float)
    utils = mesh_utilities(spec, action, mesh)
    header = ["b1", "b2", "u0", "u1", "u2", "ref_u0", "ref_u1", "ref_u2"]
    rows = [(mesh[g, 0], mesh[g, 1], utils[g, 0], utils[g, 1], utils[g, 2],
             ref_levels[0], ref_levels[1], ref_levels[2])
            for g in range(mesh.shape[0])]
    emit.table("curves.csv", header, rows)
    levels = utils.T.reshape(3, len(axes[0]), len(axes[1])).transpose(0, 2, 1)
    emit.figure(figures.curves_figure, "curves.png",
                axes[0], axes[1], levels, ref_bids, ref_levels,
                title=f"{spec.name} at a={jsonable(action)}")
    emit.finish({
        "run": _run_config(args),
        "reference": {"action": jsonable(action), "bids": list(map(float, ref_bids)),
                      "levels": [float(v) for v in ref_levels]},
        "rows": len(rows),
    })
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--game", help="builtin game name")
    common.add_argument("--file", help="game definition JSON file")
    common.add_argument("--param", action="append", metavar="K=V",
                        help="game parameter override (repeatable)")
    common.add_argument("--resolution", type=int, help="action grid resolution")
    common.add_argument("--bid-resolution", type=int, dest="bid_resolution",
                        help="bid grid resolution")
    common.add_argument("--samples", type=int, help="sample count for audits")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--out", help="output directory for report files")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="stdout format when --out is not given")
    common.add_argument("--workers", type=int, help="parallel workers")

    parser = argparse.ArgumentParser(
        prog="agency",
        description="solver and audit toolkit for menu-auction games")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-games", parents=[common],
                   help="catalogue of builtin games")

    p = sub.add_parser("check-assumptions", parents=[common],
                       help="audit one game (or --battery for the full set)")
    p.add_argument("--battery", action="store_true",
                   help="audit the canonical game set")
    p.add_argument("--candidate", help="candidate JSON for the direct route")

    sub.add_parser("solve", parents=[common],
                   help="find and certify truthful equilibria")

    p = sub.add_parser("verify", parents=[common],
                       help="certify a candidate truthful equilibrium")
    p.add_argument("--candidate", help="candidate JSON file")

    p = sub.add_parser("efficiency", parents=[common],
                       help="test an allocation for joint improvements")
    p.add_argument("--candidate", help="candidate JSON file")

    sub.add_parser("frontier", parents=[common],
                   help="sample undominated allocations")

    p = sub.add_parser("oracle", parents=[common],
                       help="exact equilibrium enumeration on tiny grids")
    p.add_argument("--actions", help="comma-separated action values")
    p.add_argument("--bids", help="comma-separated allowed bid values")

    p = sub.add_parser("curves", parents=[common],
                       help="indifference-curve data in the bid plane")
    p.add_argument("--candidate", help="candidate JSON for the reference point")

    return parser


_HANDLERS = {
    "list-games": _cmd_list_games,
    "check-assumptions": _cmd_check_assumptions,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "efficiency": _cmd_efficiency,
    "frontier": _cmd_frontier,
    "oracle": _cmd_oracle,
    "curves": _cmd_curves,
}


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    emit = Emitter(args)
    try:
        return _HANDLERS[args.command](args, emit)
    except (GameError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
