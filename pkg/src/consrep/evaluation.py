"""Structural evaluation of configurations.

The evaluation relation rewrites a located term until every component is
either a message in transit, a guarded sum waiting for input, or the
observer; it splits located parallel compositions, garbage-collects dead
and empty components, evaluates output arguments, unfolds constants and
resolves conditionals.  It is locally confluent and terminating on the
reachable fragment, so its fixed point is the canonical syntactic form a
configuration is summarised by.

One refinement keeps it terminating everywhere it matters: a constant call
whose unfolding resolves straight back to the very same call (the stalled
observer is the one case) is *inert* and is not unfolded.  Cutting that
trivial cycle keeps such components stable under evaluation without losing
any behaviour, since the cycle never exposes a new redex.
"""

from __future__ import annotations

from typing import NamedTuple

from .calculus_ast import (
    NNIL,
    STAR,
    Config,
    Defs,
    as_nat,
    eval_expr,
    match_pattern,
    subst_proc,
)
from .errors import NonTermination, NotFullyEvaluated, UndefinedConstant

DEFAULT_EVAL_STEPS = 10**6


class EvalStep(NamedTuple):
    rule: str
    path: tuple


def _unfold_call(name: str, arg, defs: Defs):
    """Unfold a constant call: the substituted body, or None when the call
    is inert (its unfolding resolves straight back to the same call)."""
    eq = defs.equations.get(name)
    if eq is None:
        raise UndefinedConstant(name)
    av = eval_expr(arg, defs.ftable)
    if defs.cache is not None and (name, av) in defs.cache:
        return defs.cache[name, av]
    pattern, body = eq
    unfolded = subst_proc(body, match_pattern(pattern, av))
    t = unfolded
    while t[0] == "if":
        t = t[2] if as_nat(eval_expr(t[1], defs.ftable)) > 0 else t[3]
    if t[0] == "const" and t[1] == name and eval_expr(t[2], defs.ftable) == av:
        unfolded = None
    if defs.cache is not None:
        defs.cache[name, av] = unfolded
    return unfolded


def is_inert_call(name: str, arg, defs: Defs) -> bool:
    """True when unfolding ``name(arg)`` resolves back to the same call."""
    return _unfold_call(name, arg, defs) is None


def _located_step(cfg: Config, location, p, defs: Defs):
    """The unique evaluation step of a located component, or None.

    At most one rule applies per position: rules are disjoint by the head
    constructor, and a dead location admits only garbage collection.
    """
    if not cfg.is_live(location):
        return ("E3", NNIL)
    match p:
        case ("par", a, b):
            return ("E1", ("npar", ("loc", location, a), ("loc", location, b)))
        case ("nil",):
            return ("E2", NNIL)
        case ("out", ch, e, cont):
            if e[0] == "lit":
                return None
            v = eval_expr(e, defs.ftable)
            return ("EOut", ("loc", location, ("out", ch, ("lit", v), cont)))
        case ("const", name, arg):
            unfolded = _unfold_call(name, arg, defs)
            if unfolded is None:
                return None
            return ("EConst", ("loc", location, unfolded))
        case ("if", e, a, b):
            if as_nat(eval_expr(e, defs.ftable)) > 0:
                return ("EIfTrue", ("loc", location, a))
            return ("EIfFalse", ("loc", location, b))
    return None


def eval_steps(cfg: Config, defs: Defs) -> list:
    """All single evaluation steps from a configuration, with their focus."""
    found = []

    def walk(net, path, rebuild):
        match net:
            case ("loc", location, p):
                s = _located_step(cfg, location, p, defs)
                if s is not None:
                    found.append((EvalStep(s[0], path), rebuild(s[1])))
            case ("npar", a, b):
                if a == NNIL:
                    found.append((EvalStep("E4", path), rebuild(b)))
                if b == NNIL:
                    found.append((EvalStep("E5", path), rebuild(a)))
                walk(a, path + (0,), lambda x, b=b, rb=rebuild: rb(("npar", x, b)))
                walk(b, path + (1,), lambda x, a=a, rb=rebuild: rb(("npar", a, x)))
            case ("res", inner, ch):
                walk(inner, path + ("r",),
                     lambda x, ch=ch, rb=rebuild: rb(("res", x, ch)))

    walk(cfg.net, (), lambda x: x)
    return [(step, cfg._replace(net=net)) for step, net in found]


def _norm(net, cfg: Config, defs: Defs, counter: list, max_steps: int):
    while True:
        match net:
            case ("nnil",):
                return net
            case ("res", inner, ch):
                return ("res", _norm(inner, cfg, defs, counter, max_steps), ch)
            case ("npar", a, b):
                a2 = _norm(a, cfg, defs, counter, max_steps)
                b2 = _norm(b, cfg, defs, counter, max_steps)
                if a2 == NNIL:
                    _tick(counter, max_steps)
                    return b2
                if b2 == NNIL:
                    _tick(counter, max_steps)
                    return a2
                return ("npar", a2, b2)
            case ("loc", location, p):
                s = _located_step(cfg, location, p, defs)
                if s is None:
                    return net
                _tick(counter, max_steps)
                net = s[1]
            case _:
                return net


def _tick(counter: list, max_steps: int):
    counter[0] += 1
    if counter[0] > max_steps:
        raise NonTermination(f"no fixed point within {max_steps} steps")


def evaluate(cfg: Config, defs: Defs, max_steps: int = DEFAULT_EVAL_STEPS) -> Config:
    """Maximal evaluation: the unique fixed point reachable from ``cfg``.

    Applies steps in a fixed order; local confluence (machine-checked by
    the verifier) makes the result independent of that order.
    """
    counter = [0]
    return cfg._replace(net=_norm(cfg.net, cfg, defs, counter, max_steps))


# ---------------------------------------------------------------------------
# Canonical ordering of fully evaluated configurations.

def split_restriction(net):
    """Peel the outer restriction chain: (channels outermost-first, core)."""
    chans = []
    while net[0] == "res":
        chans.append(net[2])
        net = net[1]
    return tuple(chans), net


def flatten_components(core) -> list:
    """Located components of a restriction-free parallel tree, in order."""
    comps: list = []

    def walk(n):
        match n:
            case ("nnil",):
                pass
            case ("loc", location, p):
                comps.append((location, p))
            case ("npar", a, b):
                if a == NNIL or b == NNIL:
                    raise NotFullyEvaluated("nil under a parallel composition")
                walk(a)
                walk(b)
            case ("res", _, _):
                raise NotFullyEvaluated("restriction below a parallel composition")
            case _:
                raise NotFullyEvaluated(f"not a network: {n!r}")

    walk(core)
    return comps


def _segment_key(location, p):
    """Sort key placing a component in its segment of the normal form:
    round messages, sync messages, decisions, round collectors, sync
    collectors, observer."""
    match p:
        case ("out", ("a", s, i, r), ("lit", _), ("nil",)) if location == s:
            return (0, s, i, r)
        case ("out", ("b", s, i), ("lit", _), ("nil",)) if location == s:
            return (1, s, i)
        case ("out", ("c", s), ("lit", _), ("nil",)) if location == s:
            return (2, s)
        case ("sum", ("in", ("a", _, q, r), _, _), _) if location == q:
            return (3, q, r)
        case ("sum", ("in", ("b", _, q), _, _), _) if location == q:
            return (4, q)
        case _ if location == STAR:
            return (5,)
    raise NotFullyEvaluated(
        f"component {location}[...] matches no normal-form segment"
    )


def canonical_order(cfg: Config) -> Config:
    """Reorder a fully evaluated configuration into its segment layout.

    Flattens the parallel tree, keeps the restriction group outermost
    (sorted), and sorts components by segment then by index keys.
    Idempotent.
    """
    chans, core = split_restriction(cfg.net)
    comps = flatten_components(core)
    comps.sort(key=lambda lp: (_segment_key(*lp), lp[1]))
    net = NNIL
    for location, p in reversed(comps):
        leaf = ("loc", location, p)
        net = leaf if net == NNIL else ("npar", leaf, net)
    for ch in sorted(chans, reverse=True):
        net = ("res", net, ch)
    return cfg._replace(net=net)


def congruent(sys, c1: Config, c2: Config) -> bool:
    """Structural congruence on reachable configurations, decided through
    equality of standard-form representatives."""
    from . import repsem

    return repsem.sf(sys, c1) == repsem.sf(sys, c2)
