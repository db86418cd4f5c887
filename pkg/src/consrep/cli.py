"""Command-line front end: explore, verify, trace.

Configuration comes from flags, falling back to a JSON config file, then
defaults.  Exit codes: 0 pass, 1 usage or configuration error, 2 state
bound exceeded, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys

from . import consensus_model as cm
from . import lts, repsem, verifier
from .errors import BoundExceeded, ConsrepError, GraphTruncated, StepNotEnabled

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BOUND = 2
EXIT_CHECK_FAILED = 3


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="consrep",
        description="Explore and verify the consensus system and its "
                    "standard-form representative semantics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (flags win over it)")
        p.add_argument("--n", type=int, help="number of agents")
        p.add_argument("--values", help="comma-separated proposed values")
        p.add_argument("--budget", type=int, help="crash budget (default n-1)")
        p.add_argument("--max-states", type=int, dest="max_states",
                       help="state bound (default 5000000)")
        p.add_argument("--mutate", action="append", default=None,
                       choices=sorted(cm.MUTATIONS),
                       help="enable a fault-injection mutation (testing hook)")
        p.add_argument("--output", help="write the result to this path")

    p_explore = sub.add_parser("explore", help="explore the state space")
    add_common(p_explore)
    p_explore.add_argument("--mode", choices=["calculus", "representative", "both"],
                           help="successor semantics (default representative)")
    p_explore.add_argument("--format", choices=["json", "dot", "text"],
                           help="output format (default text)")

    p_verify = sub.add_parser("verify", help="run every machine check")
    add_common(p_verify)
    p_verify.add_argument("--mode", choices=["calculus", "representative", "both"],
                          help="ignored; verification always uses both")
    p_verify.add_argument("--format", choices=["json", "dot", "text"],
                          help="report format (default json)")

    p_trace = sub.add_parser("trace", help="replay a schedule of rule instances")
    add_common(p_trace)
    p_trace.add_argument("schedule", nargs="*",
                         help="steps: first 'ti=K', then rule instances as "
                              "printed by the enabled list")
    return parser.parse_args(argv)


_DEFAULTS = {
    "n": None,
    "values": None,
    "budget": None,
    "mode": "representative",
    "max_states": verifier.DEFAULT_MAX_STATES,
    "format": None,
    "output": None,
    "mutate": [],
}


def _load_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if isinstance(cfg["values"], str):
        cfg["values"] = [int(x) for x in cfg["values"].split(",") if x]
    if cfg["n"] is None or not cfg["values"]:
        raise ValueError("an instance needs --n and --values")
    return cfg


def _build_system(cfg) -> cm.System:
    inst = cm.make_instance(cfg["n"], cfg["values"], cfg["budget"])
    return cm.build_system(inst, cfg["mutate"])


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def _dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def cmd_explore(cfg) -> int:
    sys_ = _build_system(cfg)
    modes = ["representative", "calculus"] if cfg["mode"] == "both" else [cfg["mode"]]
    code = EXIT_OK
    graphs = []
    for mode in modes:
        try:
            graphs.append(verifier.explore(sys_, mode, cfg["max_states"]))
        except BoundExceeded as exc:
            graphs.append(exc.graph)
            code = EXIT_BOUND
    stats = [verifier.graph_stats(g) for g in graphs]
    if len(graphs) == 2 and not any(g.truncated for g in graphs):
        stats.append({
            "modes_agree": set(graphs[0].nodes) == set(graphs[1].nodes)
            and {t[:3] for t in graphs[0].edges} == {t[:3] for t in graphs[1].edges}
        })
    fmt = cfg["format"] or "text"
    graph = graphs[0]
    if fmt == "dot":
        _emit(verifier.export_dot(graph), cfg["output"])
    elif fmt == "json":
        payload = {"stats": stats, "graph": verifier.graph_jsonable(graph)}
        _emit(_dump_json(payload), cfg["output"])
    else:
        lines = []
        for s in stats:
            lines.extend(f"{k}: {v}" for k, v in s.items())
            lines.append("")
        _emit("\n".join(lines).rstrip(), cfg["output"])
    return code


def cmd_verify(cfg) -> int:
    sys_ = _build_system(cfg)
    max_states = cfg["max_states"]
    reports = []
    bound_hit = False

    corr = verifier.check_correspondence(sys_, max_states)
    reports.append(corr.to_jsonable())
    bound_hit |= corr.truncated

    try:
        conf = verifier.check_confluence(sys_, max_states)
        reports.append(conf.to_jsonable())
    except BoundExceeded:
        bound_hit = True
        reports.append({"check": "confluence", "status": "skipped",
                        "details": {"reason": "state bound exceeded"}})

    graph = None
    try:
        graph = verifier.explore(sys_, "representative", max_states)
    except BoundExceeded as exc:
        bound_hit = True
        graph = exc.graph
    for check in ("normal-forms", "properties", "bisimulation"):
        if graph.truncated:
            reports.append({"check": check, "status": "skipped",
                            "details": {"reason": "state bound exceeded"}})
            continue
        if check == "normal-forms":
            reports.append(verifier.check_normal_forms(sys_, graph).to_jsonable())
        elif check == "properties":
            reports.append(verifier.check_properties(sys_, graph).to_jsonable())
        else:
            ok, evidence = verifier.weak_bisim(graph, verifier.ok_spec_graph(sys_))
            reports.append({
                "check": "bisimulation",
                "status": "pass" if ok else "fail",
                "details": {"relation_pairs": len(evidence)} if ok
                else {"distinguishing": evidence},
            })

    payload = {"instance": {"n": sys_.n, "values": list(sys_.u),
                            "budget": sys_.inst.budget,
                            "mutations": sorted(sys_.mutations)},
               "reports": reports}
    _emit(_dump_json(payload), cfg["output"])
    if any(r.get("status") == "fail" for r in reports):
        return EXIT_CHECK_FAILED
    if bound_hit:
        return EXIT_BOUND
    return EXIT_OK


def cmd_trace(cfg, schedule) -> int:
    sys_ = _build_system(cfg)
    initial = cm.make_initial(sys_.inst)
    choices = {f"ti={c.ti}": c for c in lts.select_ti(sys_, initial)}
    lines = []
    if not schedule:
        for name, chosen in choices.items():
            rep = repsem.sf(sys_, chosen)
            lines.append(f"-- initial after {name}")
            lines.append(repsem.rep_str(rep))
        _emit("\n".join(lines), cfg["output"])
        return EXIT_OK
    first = schedule[0]
    if first not in choices:
        raise StepNotEnabled(first, sorted(choices))
    rep = repsem.sf(sys_, choices[first])
    lines.append(f"-- {first}")
    lines.append(repsem.rep_str(rep))
    for step in schedule[1:]:
        enabled = {tr.rule: tr for tr in lts.successors(sys_, rep, "representative")}
        if step not in enabled:
            raise StepNotEnabled(step, sorted(enabled))
        rep = enabled[step].target
        lines.append(f"-- {step}")
        lines.append(repsem.rep_str(rep))
    enabled = sorted(tr.rule for tr in lts.successors(sys_, rep, "representative"))
    lines.append(f"-- enabled: {', '.join(enabled) or '(none)'}")
    _emit("\n".join(lines), cfg["output"])
    return EXIT_OK


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else _sys.argv[1:])
    try:
        cfg = _load_config(args)
        if args.command == "explore":
            return cmd_explore(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_trace(cfg, args.schedule)
    except StepNotEnabled as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except GraphTruncated as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_BOUND
    except ConsrepError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
