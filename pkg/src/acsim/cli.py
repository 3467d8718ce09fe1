"""acsim command line: simulate, montecarlo, ci, verify, replay, list-schemes, dump-state.

Exit codes: 0 success, 1 configuration error, 2 invariant breach, 3 verification counterexample.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys

from . import schemes as registry
from .core import INF, Atom, RelationalState, StateBuilder, Universe, format_value, parse_value, run_command
from .errors import AcsimError, BoundTooLarge, ConfigError, InvariantBreach
from .mapping import Implementation, lockstep_trace_check, query_mismatch, verify_state_matching
from .schemes import case_study, gms
from .schemes.adac import DEFAULT_RIGHTS
from .sim import (ci_loop, measure_projection, monte_carlo, record_lines, simulate, summarize)

log = logging.getLogger("acsim")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3

DEFAULT_CONFIG = {
    "workload": "gms",
    "schemes": ["rbac_u", "dac_v", "sd3gm"],
    "population": {"users": [5, 100], "admins": [1, 5], "member_fraction": 0.5},
    "rates": dict(case_study.DEFAULT_RATES),  # events per simulated hour; a [lo, hi] pair is sampled per run
    "p_strict": case_study.DEFAULT_P_STRICT,
    "command_seconds": case_study.DEFAULT_COMMAND_SECONDS,
    "goal_hours": 8.0,
    "step_seconds": 1.0,
    "seed": 0,
    "runs": 100,
    "first_run": 0,
    "workers": 1,
    "trace_sharing": False,
    "log_level": "events",
    "ci": {"scheme": "rbac_u", "measure": "time", "confidence": 0.9, "tolerance": 0.1, "max_runs": 1000},
    "verify": {"workload": "gms", "scheme": "rbac_u", "impl": "sigma_r", "depth": 2,
               "users": 2, "groups": 1, "messages": 2, "subjects": 2, "objects": 2,
               "depth_s": None, "depth_target": None, "depth_back": None},
    "out": "results",
}

# keys whose value is a free-form map checked elsewhere
_OPEN = {"rates"}


def _merge(base, over, path):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"config: unknown key {where!r}")
        if isinstance(base[k], dict) and k not in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(f"config: {where!r} must be an object")
            out[k] = _merge(base[k], v, where)
        elif k in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(f"config: {where!r} must be an object")
            for rk in v:
                if rk not in base[k]:
                    raise ConfigError(f"config: unknown key {where}.{rk!r}; known rates: {sorted(base[k])}")
            out[k] = {**base[k], **v}
        else:
            out[k] = v
    return out


def _num(cfg, key, lo=None, integer=False, allow_none=False):
    parts = key.split(".")
    v = cfg
    for p in parts:
        v = v[p]
    if v is None and allow_none:
        return
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if not ok or isinstance(v, bool):
        raise ConfigError(f"config: {key!r} must be {'an integer' if integer else 'a number'}, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"config: {key!r} must be >= {lo}, got {v!r}")


def _range(cfg, key):
    v = cfg["population"][key]
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v, v]
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in v)
            and 1 <= v[0] <= v[1]):
        raise ConfigError(f"config: 'population.{key}' must be an integer or [lo, hi] with 1 <= lo <= hi")
    return tuple(v)


def validate_config(cfg: dict) -> dict:
    if cfg["workload"] != "gms":
        raise ConfigError(f"config: 'workload' must be 'gms' for simulation, got {cfg['workload']!r}")
    if not isinstance(cfg["schemes"], list) or not cfg["schemes"]:
        raise ConfigError("config: 'schemes' must be a non-empty list")
    for i, s in enumerate(cfg["schemes"]):
        if s not in registry.CASE_STUDY_IMPLS:
            raise ConfigError(f"config: 'schemes[{i}]' names unknown scheme {s!r}; "
                              f"known: {sorted(registry.CASE_STUDY_IMPLS)}")
    for k in ("goal_hours", "command_seconds"):
        _num(cfg, k, 0)
    _num(cfg, "step_seconds", 1e-9)
    for k in ("seed", "first_run"):
        _num(cfg, k, 0, integer=True)
    for k in ("runs", "workers", "ci.max_runs", "verify.depth", "verify.users", "verify.groups",
              "verify.messages", "verify.subjects", "verify.objects"):
        _num(cfg, k, 1 if k != "verify.depth" else 0, integer=True)
    for k in ("verify.depth_s", "verify.depth_target", "verify.depth_back"):
        _num(cfg, k, 0, integer=True, allow_none=True)
    for k in ("ci.confidence", "ci.tolerance"):
        _num(cfg, k)
        if not 0 < cfg["ci"][k[3:]] < 1:
            raise ConfigError(f"config: {k!r} must lie in (0, 1)")
    _num(cfg, "p_strict", 0)
    _num(cfg, "population.member_fraction", 0)
    _range(cfg, "users")
    _range(cfg, "admins")
    for k, v in cfg["rates"].items():
        vals = v if isinstance(v, list) else [v]
        if len(vals) not in (1, 2) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) and x >= 0
                                              for x in vals):
            raise ConfigError(f"config: 'rates.{k}' must be a rate >= 0 or a [lo, hi] pair")
    if cfg["log_level"] not in ("full", "events", "none"):
        raise ConfigError(f"config: 'log_level' must be full, events or none")
    if not isinstance(cfg["trace_sharing"], bool):
        raise ConfigError("config: 'trace_sharing' must be true or false")
    if cfg["ci"]["scheme"] not in cfg["schemes"]:
        raise ConfigError(f"config: 'ci.scheme' {cfg['ci']['scheme']!r} is not among 'schemes'")
    if cfg["ci"]["measure"] not in case_study.MEASURES:
        raise ConfigError(f"config: 'ci.measure' must be one of {list(case_study.MEASURES)}")
    return cfg


def load_config(path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as e:
            raise ConfigError(f"config: cannot read {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: {path} is not valid JSON: {e}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"config: {path} must hold a JSON object")
        cfg = _merge(cfg, user, "")
    if overrides:
        cfg = _merge(cfg, overrides, "")
    return validate_config(cfg)


def sim_config(cfg: dict):
    pop = cfg["population"]
    params = case_study.CaseStudyParams(
        users=_range(cfg, "users"), admins=_range(cfg, "admins"), member_fraction=pop["member_fraction"],
        rates={k: (list(v) if isinstance(v, list) else v) for k, v in cfg["rates"].items()},
        p_strict=cfg["p_strict"], command_seconds=cfg["command_seconds"])
    return case_study.case_study_config(
        params, schemes=tuple(cfg["schemes"]), goal_time=cfg["goal_hours"] * 3600.0,
        step=float(cfg["step_seconds"]), seed=cfg["seed"], trace_sharing=cfg["trace_sharing"],
        log_level=cfg["log_level"])


# -- export ----------------------------------------------------------------------------------------

CSV_HEAD = ["run", "scheme", "users", "admins"]
CSV_TAIL = ["roles", "role_user_ratio", "coi_attempted", "coi_completed", "wall_ms"]
CSV_EXTRA = ["baseline_size", "max_shadow_size", "max_state_size", "state_overhead", "temp_admin_work",
             "events_executed", "events_blocked", "events_starved", "error"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, float):
        return repr(v) if v != INF else "inf"
    return str(v)


def export_csv(records, path) -> None:
    """One row per (run, scheme); measures in their declared order between the fixed columns."""
    flat = [r for rs in records for r in (rs if isinstance(rs, list) else [rs])]
    if not flat:
        raise ConfigError("export_csv needs at least one record")
    measures = []
    for r in flat:
        for m in r.totals:
            if m not in measures:
                measures.append(m)
    header = CSV_HEAD + measures + CSV_TAIL + CSV_EXTRA
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in flat:
            row = {**r.metrics, "run": r.run, "scheme": r.scheme, "wall_ms": round(r.wall_ms, 3),
                   "error": r.error, **r.totals}
            w.writerow([_cell(row.get(c)) for c in header])


def _write_runs(records, out):
    os.makedirs(out, exist_ok=True)
    for recs in records:
        with open(os.path.join(out, f"run_{recs[0].run:05d}.jsonl"), "w") as fh:
            for rec in recs:
                for line in record_lines(rec):
                    fh.write(line + "\n")
    export_csv(records, os.path.join(out, "summary.csv"))


def _report_errors(records) -> int:
    code = EXIT_OK
    for recs in records:
        for r in recs:
            if r.error:
                print(f"run {r.run} scheme {r.scheme}: {r.error_kind} error: {r.error}", file=sys.stderr)
                code = max(code, EXIT_INVARIANT if r.error_kind == "invariant" else EXIT_CONFIG)
    return code


# -- verification setups ----------------------------------------------------------------------------

def identity_impl(workload, target) -> Implementation:
    return Implementation(f"identity:{workload.name}->{target.name}", workload, target,
                          map_state=lambda g: g, expand=lambda name, args, st: [(name, args)],
                          queries={q: (q, lambda a: a) for q in workload.queries})


def verify_setup(v: dict):
    """(workload, target, implementation, start state, universe) for a verify config block."""
    workload = registry.scheme(v["workload"])
    target = registry.scheme(v["scheme"])
    if v["impl"] == "identity":
        impl = identity_impl(workload, target)
    else:
        impl = registry.implementation(v["impl"])
        if impl.workload.name != workload.name or impl.target.name != target.name:
            raise ConfigError(f"config: 'verify.impl' {v['impl']!r} implements {impl.workload.name} in "
                              f"{impl.target.name}, not {workload.name} in {target.name}")
    if workload.name == "gms":
        n = v["users"]
        users = tuple(gms.user(f"u{i + 1}") for i in range(n))
        groups = tuple(gms.group(f"g{i + 1}") for i in range(v["groups"]))
        msgs = tuple(gms.message(f"m{i + 1}") for i in range(v["messages"]))
        start = gms.single_group_start(n, n_members=min(2, n))
        universe = Universe({"U": users, "G": groups, "M": msgs})
    elif workload.name in ("dac", "adac"):
        subs = tuple(Atom("S", f"s{i + 1}") for i in range(v["subjects"]))
        objs = tuple(Atom("O", f"o{i + 1}") for i in range(v["objects"]))
        rels = {"S": {(s,) for s in subs}}
        if workload.name == "adac":
            rels["A"] = {(subs[0],)}
        start = RelationalState(rels)
        universe = Universe({"S": subs, "O": objs, "I": DEFAULT_RIGHTS})
    else:
        raise ConfigError(f"config: 'verify.workload' {workload.name!r} has no bounded start state; "
                          f"use gms, dac or adac")
    return workload, target, impl, start, universe


def state_to_json(state) -> dict:
    return {"relations": {n: sorted([format_value(x) for x in t] for t in rows)
                          for n, rows in sorted(state.relations.items())},
            "scalars": {n: format_value(x) for n, x in sorted(state.scalars.items())}}


def state_from_json(d) -> RelationalState:
    rels = {n: {tuple(parse_value(x) for x in t) for t in rows} for n, rows in d.get("relations", {}).items()}
    return RelationalState(rels, {n: parse_value(x) for n, x in d.get("scalars", {}).items()})


def trace_file(report, v, start) -> dict:
    return {"format": "acsim-trace/1", "workload": v["workload"], "scheme": v["scheme"], "impl": v["impl"],
            "verify": v, "start": state_to_json(start), **report.to_json()}


def replay(doc: dict) -> dict:
    """Re-execute a trace file's witness on its side and compare query answers at the end."""
    v = doc["verify"]
    workload, target, impl, start, universe = verify_setup(v)
    start = state_from_json(doc["start"])
    trace = [(step["command"], tuple(parse_value(a) for a in step["args"])) for step in doc["witness"]]
    out = {"side": doc["witness_side"], "steps": []}
    if doc["witness_side"] == "workload":
        rep = lockstep_trace_check(workload, target, impl, start, trace, universe)
        out["verdict"] = rep.verdict
        out["detail"] = rep.detail
        return out
    scheme = target
    st = StateBuilder(impl.map_state(start))
    for name, args in trace:
        out["steps"].append({"command": name, "fired": run_command(scheme, st, name, args)})
    final = st.freeze()
    q = doc.get("query")
    if q:
        qn, qargs = q["name"], tuple(parse_value(a) for a in q["args"])
        tn, targs = impl.map_query(qn, qargs)
        out["query"] = {"name": qn, "args": q["args"], "target_answer": bool(target.queries[tn].entail(final, targs))}
    out["final_state"] = final.dump()
    return out


# -- commands ------------------------------------------------------------------------------------------

def _cmd_simulate(cfg, args):
    sc = sim_config(cfg)
    recs = monte_carlo(sc, 1, workers=1, first=args.run if args.run is not None else cfg["first_run"])
    _write_runs(recs, cfg["out"])
    for r in recs[0]:
        print(json.dumps({"run": r.run, "scheme": r.scheme, "totals": {k: v for k, v in r.totals.items()}},
                         sort_keys=True))
    return _report_errors(recs)


def _cmd_montecarlo(cfg, args):
    sc = sim_config(cfg)
    recs = monte_carlo(sc, cfg["runs"], workers=cfg["workers"], first=cfg["first_run"])
    _write_runs(recs, cfg["out"])
    print(json.dumps(summarize(recs), sort_keys=True, indent=1))
    return _report_errors(recs)


def _cmd_ci(cfg, args):
    sc = sim_config(cfg)
    c = cfg["ci"]
    proj = measure_projection(c["scheme"], c["measure"])
    first = cfg["first_run"]
    rep = ci_loop(lambda i: proj(simulate(sc, first + i)), c["confidence"], c["tolerance"], c["max_runs"])
    doc = {"scheme": c["scheme"], "measure": c["measure"], "mean": rep.mean, "variance": rep.variance,
           "n": rep.n, "half_width": rep.half_width, "confidence": rep.u, "tolerance": rep.v,
           "terminated_by": rep.terminated_by, "diagnostic": rep.diagnostic, "samples": rep.samples}
    os.makedirs(cfg["out"], exist_ok=True)
    with open(os.path.join(cfg["out"], "ci.json"), "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    print(json.dumps({k: v for k, v in doc.items() if k != "samples"}, sort_keys=True))
    return EXIT_OK


def _cmd_verify(cfg, args):
    v = cfg["verify"]
    workload, target, impl, start, universe = verify_setup(v)
    rep = verify_state_matching(workload, target, impl, start, v["depth"], depth_s=v["depth_s"],
                                universe=universe, depth_back=v["depth_back"], depth_target=v["depth_target"])
    print(json.dumps(rep.to_json(), sort_keys=True, indent=1))
    if rep.ok:
        return EXIT_OK
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "counterexample.json")
    with open(path, "w") as fh:
        json.dump(trace_file(rep, v, start), fh, sort_keys=True, indent=1)
    print(f"counterexample trace written to {path}", file=sys.stderr)
    return EXIT_COUNTEREXAMPLE


def _cmd_replay(cfg, args):
    try:
        with open(args.trace) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"replay: cannot load {args.trace}: {e}") from None
    for k in ("verify", "start", "witness", "witness_side"):
        if k not in doc:
            raise ConfigError(f"replay: trace file lacks {k!r}")
    out = replay(doc)
    print(json.dumps(out, sort_keys=True, indent=1))
    return EXIT_OK


def _cmd_list(cfg, args):
    print("schemes: " + " ".join(sorted(registry.SCHEMES)))
    print("implementations: " + " ".join(
        f"{n}({i().workload.name}->{i().target.name})" for n, i in sorted(registry.IMPLEMENTATIONS.items())))
    print("case-study schemes: " + " ".join(sorted(registry.CASE_STUDY_IMPLS)))
    return EXIT_OK


def _cmd_dump_state(cfg, args):
    sc = sim_config(cfg)
    run = args.run if args.run is not None else cfg["first_run"]
    setup = sc.setup_for(run)
    print(f"# run {run} workload start ({json.dumps(setup.info, sort_keys=True)})")
    print(setup.start.dump())
    for s in sc.schemes:
        print(f"# {s.name} via {s.impl.name}")
        print(s.impl.map_state(setup.start).dump())
    return EXIT_OK


COMMANDS = {"simulate": _cmd_simulate, "montecarlo": _cmd_montecarlo, "ci": _cmd_ci, "verify": _cmd_verify,
            "replay": _cmd_replay, "list-schemes": _cmd_list, "dump-state": _cmd_dump_state}


def build_parser():
    p = argparse.ArgumentParser(prog="acsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "replay":
            sp.add_argument("trace", help="counterexample trace file written by verify")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--runs", type=int)
        sp.add_argument("--run", type=int, help="run index for simulate and dump-state")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--goal-hours", type=float)
        sp.add_argument("--step-seconds", type=float)
        sp.add_argument("--confidence", type=float)
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--max-runs", type=int)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--workload")
        sp.add_argument("--scheme")
        sp.add_argument("--impl")
        sp.add_argument("--out")
        sp.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    return p


def _overrides(args) -> dict:
    o = {}
    flat = {"runs": "runs", "workers": "workers", "seed": "seed", "goal_hours": "goal_hours",
            "step_seconds": "step_seconds", "out": "out"}
    for a, k in flat.items():
        if getattr(args, a) is not None:
            o[k] = getattr(args, a)
    ci = {k: getattr(args, a) for a, k in (("confidence", "confidence"), ("tolerance", "tolerance"),
                                           ("max_runs", "max_runs")) if getattr(args, a) is not None}
    if ci:
        o["ci"] = ci
    ver = {k: getattr(args, k) for k in ("depth", "workload", "scheme", "impl") if getattr(args, k) is not None}
    if ver:
        o["verify"] = ver
    return o


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.print_config:
            print(json.dumps(cfg, sort_keys=True, indent=1))
            return EXIT_OK
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, BoundTooLarge) as e:
        print(f"acsim: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantBreach as e:
        print(f"acsim: invariant breach: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except AcsimError as e:
        print(f"acsim: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
