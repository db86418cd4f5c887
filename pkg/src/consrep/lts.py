"""Labelled transitions over canonical representatives.

Calculus mode derives every transition from the expanded normal form:
communication pairs an output in transit with the matching collector (or
the observer), suspicion fires the right branch of a collector sum,
perfect suspicion lets the observer skip a crashed agent, and a crash
shrinks the live set.  Each raw successor is canonicalised back to a
representative, which realises closure under structural congruence.

Representative mode takes the successors straight from the rule set on
representatives.  Both modes expose the same observable: the `ok` send,
which leaves the representative fixed.
"""

from __future__ import annotations

from typing import NamedTuple

from . import consensus_model as cm
from . import repsem
from .calculus_ast import (
    BOT,
    CHAN_OK,
    Config,
    chan_str,
    substitute,
    value_str,
)
from .errors import TiAlreadySet
from .evaluation import flatten_components, split_restriction

TAU = ("tau",)


def act_send(ch, v) -> tuple:
    return ("snd", ch, v)


def act_recv(ch, v) -> tuple:
    return ("rcv", ch, v)


def action_str(action) -> str:
    match action:
        case ("tau",):
            return "tau"
        case ("snd", ch, v):
            return f"{chan_str(ch)}!{value_str(v)}"
        case ("rcv", ch, v):
            return f"{chan_str(ch)}?{value_str(v)}"
    return repr(action)


class Transition(NamedTuple):
    source: repsem.Representative
    action: tuple
    target: repsem.Representative
    rule: str


def select_ti(sys: cm.System, cfg: Config) -> list:
    """One successor per possible trusted immortal.  Must be applied before
    anything else; every other rule requires the choice made."""
    if cfg.ti is not None:
        raise TiAlreadySet(f"trusted immortal already {cfg.ti}")
    return [cfg._replace(ti=t) for t in sorted(cfg.live)]


def initial_reps(sys: cm.System) -> list:
    """Canonical representatives of the instance, one per trusted immortal."""
    cfg = cm.make_initial(sys.inst)
    return [repsem.sf(sys, c) for c in select_ti(sys, cfg)]


# ---------------------------------------------------------------------------
# Calculus-mode successors.

def _guard_leaves(p) -> list:
    leaves = []
    stack = [p]
    while stack:
        g = stack.pop()
        if g[0] == "sum":
            stack.append(g[2])
            stack.append(g[1])
        else:
            leaves.append(g)
    return leaves


def calculus_raw_successors(sys: cm.System, rep: repsem.Representative) -> list:
    """Table-style transitions of the expanded normal form, as
    (rule, action, raw configuration) with the target not yet evaluated."""
    cfg = repsem.sfi(sys, rep)
    chans, core = split_restriction(cfg.net)
    comps = flatten_components(core)
    restricted = set(chans)

    def rebuild(replacements: dict) -> Config:
        net = ("nnil",)
        for idx in range(len(comps) - 1, -1, -1):
            if idx in replacements:
                leaf = replacements[idx]
                if leaf is None:
                    continue
            else:
                leaf = ("loc",) + comps[idx]
            net = leaf if net == ("nnil",) else ("npar", leaf, net)
        for ch in reversed(chans):
            net = ("res", net, ch)
        return cfg._replace(net=net)

    outputs = []   # (idx, location, channel, value)
    inputs = []    # (idx, location, channel, pattern, continuation)
    results = []

    for idx, (location, p) in enumerate(comps):
        assert cfg.is_live(location)
        match p:
            case ("out", ch, ("lit", v), ("nil",)):
                outputs.append((idx, location, ch, v))
                continue
            case ("const", "WRAP", _):
                continue  # inert observer: no transitions
            case ("tau", cont):
                results.append((f"Tau l={location}", TAU,
                                rebuild({idx: ("loc", location, cont)})))
                continue
        for leaf in _guard_leaves(p):
            match leaf:
                case ("in", ch, pattern, cont):
                    inputs.append((idx, location, ch, pattern, cont))
                case ("susp", k, cont):
                    if k != location and (k != rep.ti
                                          or "no-ti-protection" in sys.mutations):
                        results.append((f"Susp l={location} k={k}", TAU,
                                        rebuild({idx: ("loc", location, cont)})))
                case ("psusp", k, cont):
                    if not cfg.is_live(k):
                        results.append((f"PSusp l={location} k={k}", TAU,
                                        rebuild({idx: ("loc", location, cont)})))

    for oidx, _, och, ov in outputs:
        for iidx, iloc, ich, pattern, cont in inputs:
            if och == ich:
                received = ("loc", iloc, substitute(cont, pattern, ov))
                results.append((f"Com {chan_str(och)}", TAU,
                                rebuild({oidx: None, iidx: received})))
        if och not in restricted:
            results.append((f"Snd {chan_str(och)}", act_send(och, ov),
                            rebuild({oidx: None})))

    if cfg.budget > 0:
        for location in sorted(cfg.live):
            if location == rep.ti:
                continue
            stopped = rebuild({})._replace(live=cfg.live - {location},
                                           budget=cfg.budget - 1)
            results.append((f"Stop l={location}", TAU, stopped))

    return results


def _calculus_successors(sys, rep) -> list:
    transitions = set()
    for rule, action, raw in calculus_raw_successors(sys, rep):
        transitions.add(Transition(rep, action, repsem.sf(sys, raw), rule))
    return sorted(transitions)


def _representative_successors(sys, rep) -> list:
    transitions = {
        Transition(rep, TAU, target, rule)
        for rule, target in repsem.rep_successors(sys, rep)
    }
    wj, _, wb = rep.wrap
    if wj == 0 and wb == 1:
        # Emitting ok consumes the observer; extraction restores it, so the
        # observable loops on the representative.
        transitions.add(Transition(rep, act_send(CHAN_OK, BOT), rep, "Snd ok"))
    return sorted(transitions)


def successors(sys: cm.System, rep: repsem.Representative,
               mode: str = "representative") -> list:
    """Every transition from a representative, canonically sorted."""
    if mode == "calculus":
        return _calculus_successors(sys, rep)
    if mode == "representative":
        return _representative_successors(sys, rep)
    raise ValueError(f"unknown mode {mode!r}")


def weak_reach(graph, rep) -> set:
    """States reachable through zero or more internal steps in a graph."""
    seen = {rep}
    frontier = [rep]
    adjacency = graph.tau_adjacency()
    while frontier:
        s = frontier.pop()
        for t in adjacency.get(s, ()):
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen
