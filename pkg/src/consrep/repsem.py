"""Standard-form representatives and their operational rules.

A representative is the global-state view of a reachable configuration:
the context (live set, crash budget, trusted immortal), the messages in
transit per phase, the collectors with their local state, and the
observer position.  Extraction evaluates a configuration to its fixed
point, reads the boxed fields off each component and sorts them;
expansion rebuilds the unique normal-form configuration.  Extraction is
constant on structural-congruence classes, so representative equality
decides congruence on the reachable fragment.

``rep_successors`` is an operational semantics given directly on
representatives.  Per phase there is a reception rule and a suspicion
twin; reception consumes the message in transit, suspicion leaves it and
feeds bot to the collector instead.  Receiving from the last peer rolls
the collector into the next round or the next phase.  The observer
advances on each accepted decision (or past a crashed agent), goes inert
on a conflicting one, and stands at the public `ok` output after the last.
A crash removes an agent and everything it owns.  The whole rule set is
checked against the calculus semantics state by state - see the verifier.

Two canonical choices keep extraction a function: once the observer
reaches the `ok` output its remembered value is gone from the term, so
the representative pins it to bot; and a configuration whose observer was
consumed by the environment is restored to that same ok-position
representative.  Emitting `ok` therefore leaves the representative fixed
(the observable self-loop lives in the transition-system layer).
"""

from __future__ import annotations

import hashlib
import json
from typing import NamedTuple

from . import consensus_model as cm
from .calculus_ast import BOT, Config, value_str
from .errors import InvariantViolation, NotReachableShape
from .evaluation import evaluate, flatten_components, split_restriction


class Representative(NamedTuple):
    live: tuple      # sorted agent ids
    budget: int
    ti: int
    out1: tuple      # (sender, receiver, round, relay-vector)
    out2: tuple      # (sender, receiver, knowledge-vector)
    out3: tuple      # (sender, decision value)
    in1: tuple       # (agent, round, knowledge, messages, awaited sender)
    in2: tuple       # (agent, knowledge, messages, awaited sender)
    wrap: tuple      # (position, remembered value, accepting flag)


def validate_rep(sys: cm.System, rep: Representative) -> None:
    n = sys.n
    live = set(rep.live)

    def fail(msg):
        raise InvariantViolation(msg)

    if rep.ti not in live:
        fail(f"trusted immortal {rep.ti} not live")
    if rep.budget < 0:
        fail("negative crash budget")
    if not live <= set(range(1, n + 1)):
        fail("live set out of range")

    seen1 = set()
    for p, i, r, _ in rep.out1:
        if p not in live:
            fail(f"round message owned by dead agent {p}")
        if not (1 <= i <= n and 1 <= r < n):
            fail(f"round message ({p},{i},{r}) out of bounds")
        if (p, i, r) in seen1:
            fail(f"duplicate round message ({p},{i},{r})")
        seen1.add((p, i, r))
    seen2 = set()
    for p, i, _ in rep.out2:
        if p not in live:
            fail(f"sync message owned by dead agent {p}")
        if not 1 <= i <= n:
            fail(f"sync message ({p},{i}) out of bounds")
        if (p, i) in seen2:
            fail(f"duplicate sync message ({p},{i})")
        seen2.add((p, i))
    out3_owners = [p for p, _ in rep.out3]
    if len(out3_owners) != len(set(out3_owners)):
        fail("duplicate decision message")
    if not set(out3_owners) <= live:
        fail("decision message owned by dead agent")

    roles: list = []
    for p, r, _, _, i in rep.in1:
        roles.append(p)
        if p not in live:
            fail(f"dead agent {p} collecting")
        if not (1 <= r < n and 1 <= i <= n):
            fail(f"collector ({p},{r},i={i}) out of bounds")
    for p, _, _, i in rep.in2:
        roles.append(p)
        if p not in live:
            fail(f"dead agent {p} collecting")
        if not 1 <= i <= n:
            fail(f"collector ({p},i={i}) out of bounds")
    roles.extend(out3_owners)
    if len(roles) != len(set(roles)):
        fail("an agent holds two roles at once")

    wj, ww, wb = rep.wrap
    if wb not in (0, 1):
        fail(f"observer flag {wb}")
    if not 0 <= wj <= n:
        fail(f"observer position {wj}")
    if wj == 0 and (wb != 1 or ww != BOT):
        fail("observer at ok must be accepting with no remembered value")
    if wb == 0 and wj == 0:
        fail("inert observer cannot sit at ok")


# ---------------------------------------------------------------------------
# Extraction and expansion.

def sf(sys: cm.System, cfg: Config) -> Representative:
    """Extract the standard-form representative of a reachable configuration."""
    if cfg.ti is None:
        raise InvariantViolation("trusted immortal not set")
    fixed = evaluate(cfg, sys.defs)
    chans, core = split_restriction(fixed.net)
    if sorted(chans) != list(sys.restriction):
        raise NotReachableShape("restriction group differs from the system's")
    out1, out2, out3, in1, in2 = [], [], [], [], []
    wrap = None
    for location, proc in flatten_components(core):
        kind, fields = cm.classify_component(sys, location, proc)
        if kind == "out1":
            out1.append(fields)
        elif kind == "out2":
            out2.append(fields)
        elif kind == "out3":
            out3.append(fields)
        elif kind == "in1":
            in1.append(fields)
        elif kind == "in2":
            in2.append(fields)
        else:
            if wrap is not None:
                raise NotReachableShape("two observer components")
            wrap = fields
    if wrap is None:
        wrap = (0, BOT, 1)  # the observer was consumed after emitting ok
    rep = Representative(
        live=tuple(sorted(cfg.live)),
        budget=cfg.budget,
        ti=cfg.ti,
        out1=tuple(sorted(out1)),
        out2=tuple(sorted(out2)),
        out3=tuple(sorted(out3)),
        in1=tuple(sorted(in1)),
        in2=tuple(sorted(in2)),
        wrap=wrap,
    )
    validate_rep(sys, rep)
    return rep


def sfi(sys: cm.System, rep: Representative) -> Config:
    """Expand a representative back to its normal-form configuration."""
    validate_rep(sys, rep)
    comps = [cm.out1_comp(*e) for e in rep.out1]
    comps += [cm.out2_comp(*e) for e in rep.out2]
    comps += [cm.out3_comp(*e) for e in rep.out3]
    comps += [cm.c1_wait_comp(sys, *e) for e in rep.in1]
    comps += [cm.c2_wait_comp(sys, *e) for e in rep.in2]
    wj, ww, wb = rep.wrap
    if wj == 0:
        comps.append(cm.ok_comp())
    elif wb == 1:
        comps.append(cm.wrap_wait_comp(sys, wj, ww))
    else:
        comps.append(cm.wrap_inert_comp(wj, ww))
    net = ("nnil",)
    for comp in reversed(comps):
        net = comp if net == ("nnil",) else ("npar", comp, net)
    for ch in reversed(sys.restriction):
        net = ("res", net, ch)
    return Config(live=frozenset(rep.live), budget=rep.budget, ti=rep.ti, net=net)


# ---------------------------------------------------------------------------
# The representative semantics.

def _add(entries: tuple, entry) -> tuple:
    return tuple(sorted(entries + (entry,)))


def _drop(entries: tuple, entry) -> tuple:
    return tuple(e for e in entries if e != entry)


def _swap(entries: tuple, old, new) -> tuple:
    return tuple(sorted(tuple(e for e in entries if e != old) + (new,)))


def _phase1_step(sys, rep, entry, delta, consumed, rule, out):
    """Advance a round collector on ``delta`` (a relay vector, or bot for a
    suspicion).  ``consumed`` is the transit entry to remove, if any."""
    n = sys.n
    q, r, vv, msgs, i = entry
    msgs2 = cm.msg_add1(msgs, delta, r, i)
    out1 = _drop(rep.out1, consumed) if consumed else rep.out1
    if i < n:
        if rule == "SR1" and "sr1-deletes-in1" in sys.mutations:
            in1 = _drop(rep.in1, entry)
        else:
            in1 = _swap(rep.in1, entry, (q, r, vv, msgs2, i + 1))
        out.append((f"{rule} q={q} p={i} r={r}",
                    rep._replace(out1=out1, in1=in1)))
    elif r < n - 1:
        vv2 = cm.updatek(r, msgs2, vv)
        dd2 = cm.updater(r, msgs2, vv)
        sends = tuple((q, j, r + 1, dd2) for j in range(1, n + 1))
        out.append((f"{rule} q={q} p={i} r={r}", rep._replace(
            out1=tuple(sorted(out1 + sends)),
            in1=_swap(rep.in1, entry, (q, r + 1, vv2, msgs2, 1)),
        )))
    else:
        vv2 = cm.updatek(r, msgs2, vv)
        sends = tuple((q, j, vv2) for j in range(1, n + 1))
        out.append((f"{rule} q={q} p={i} r={r}", rep._replace(
            out1=out1,
            out2=tuple(sorted(rep.out2 + sends)),
            in1=_drop(rep.in1, entry),
            in2=_add(rep.in2, (q, vv2, msgs2, 1)),
        )))


def _phase2_step(sys, rep, entry, payload, consumed, rule, out):
    n = sys.n
    q, vv, msgs, i = entry
    msgs2 = cm.msg_add2(msgs, payload, i)
    out2 = _drop(rep.out2, consumed) if consumed else rep.out2
    if i < n:
        out.append((f"{rule} q={q} p={i}", rep._replace(
            out2=out2,
            in2=_swap(rep.in2, entry, (q, vv, msgs2, i + 1)),
        )))
    else:
        vv2 = vv if "skip-correct" in sys.mutations else cm.correct_fn(msgs2, vv)
        out.append((f"{rule} q={q} p={i}", rep._replace(
            out2=out2,
            out3=_add(rep.out3, (q, cm.getfst(vv2))),
            in2=_drop(rep.in2, entry),
        )))


def _may_suspect(sys, rep, suspected: int, at: int) -> bool:
    if suspected == at:
        return False
    if suspected == rep.ti and "no-ti-protection" not in sys.mutations:
        return False
    return True


def rep_successors(sys: cm.System, rep: Representative) -> list:
    """All internal steps of the representative semantics, as
    (rule instance, successor) pairs, canonically sorted."""
    n = sys.n
    out: list = []

    out1_by_key = {e[:3]: e for e in rep.out1}
    for entry in rep.in1:
        q, r, _, _, i = entry
        transit = out1_by_key.get((i, q, r))
        if transit is not None:
            sr = "SR1" if i < n else ("SR2" if r < n - 1 else "SR3")
            _phase1_step(sys, rep, entry, transit[3], transit, sr, out)
        if _may_suspect(sys, rep, i, q) and "no-phase1-susp" not in sys.mutations:
            sr = "SR4" if i < n else ("SR5" if r < n - 1 else "SR6")
            _phase1_step(sys, rep, entry, BOT, None, sr, out)

    out2_by_key = {e[:2]: e for e in rep.out2}
    for entry in rep.in2:
        q, _, _, i = entry
        transit = out2_by_key.get((i, q))
        if transit is not None:
            _phase2_step(sys, rep, entry, transit[2], transit,
                         "SR1'" if i < n else "SR2'", out)
        if _may_suspect(sys, rep, i, q):
            _phase2_step(sys, rep, entry, BOT, None,
                         "SR4'" if i < n else "SR5'", out)

    wj, ww, wb = rep.wrap
    if wb == 1 and 1 <= wj <= n:
        decision = next((e for e in rep.out3 if e[0] == wj), None)
        if decision is not None:
            v = decision[1]
            if (ww == BOT and v != BOT) or ww == v:
                wrap2 = (wj + 1, v, 1) if wj + 1 <= n else (0, BOT, 1)
            else:
                wrap2 = (wj, ww, 0)
            out.append((f"SRW1 j={wj} v={value_str(v)}", rep._replace(
                out3=_drop(rep.out3, decision), wrap=wrap2)))
        if wj not in rep.live:
            wrap2 = (wj + 1, ww, 1) if wj + 1 <= n else (0, BOT, 1)
            out.append((f"SRW2 j={wj}", rep._replace(wrap=wrap2)))

    if rep.budget > 0:
        for p in rep.live:
            if p == rep.ti:
                continue
            out.append((f"SR7 p={p}", rep._replace(
                live=tuple(x for x in rep.live if x != p),
                budget=rep.budget - 1,
                out1=tuple(e for e in rep.out1 if e[0] != p),
                out2=tuple(e for e in rep.out2 if e[0] != p),
                out3=tuple(e for e in rep.out3 if e[0] != p),
                in1=tuple(e for e in rep.in1 if e[0] != p),
                in2=tuple(e for e in rep.in2 if e[0] != p),
            )))

    for _, successor in out:
        validate_rep(sys, successor)
    return sorted(set(out))


# ---------------------------------------------------------------------------
# Canonical serialisation.

def value_jsonable(v):
    match v:
        case ("bot",):
            return None
        case ("nat", k):
            return k
        case ("pair", a, b):
            return [value_jsonable(a), value_jsonable(b)]
        case ("set", elems):
            return {"set": [value_jsonable(e) for e in elems]}
    raise TypeError(f"not a value: {v!r}")


def rep_jsonable(rep: Representative) -> dict:
    return {
        "live": list(rep.live),
        "budget": rep.budget,
        "ti": rep.ti,
        "out1": [[p, i, r, value_jsonable(d)] for p, i, r, d in rep.out1],
        "out2": [[p, i, value_jsonable(v)] for p, i, v in rep.out2],
        "out3": [[p, value_jsonable(v)] for p, v in rep.out3],
        "in1": [[p, r, value_jsonable(v), value_jsonable(m), i]
                for p, r, v, m, i in rep.in1],
        "in2": [[p, value_jsonable(v), value_jsonable(m), i]
                for p, v, m, i in rep.in2],
        "wrap": [rep.wrap[0], value_jsonable(rep.wrap[1]), rep.wrap[2]],
    }


def rep_key(rep: Representative) -> str:
    """Canonical byte string; the state-deduplication key."""
    return json.dumps(rep_jsonable(rep), sort_keys=True, separators=(",", ":"))


def rep_digest(rep: Representative) -> str:
    return hashlib.sha1(rep_key(rep).encode()).hexdigest()[:10]


def rep_str(rep: Representative) -> str:
    lines = [
        f"live={{{','.join(map(str, rep.live))}}} budget={rep.budget} ti={rep.ti}",
    ]
    for p, i, r, d in rep.out1:
        lines.append(f"  msg1 {p}->{i} r{r} {value_str(d)}")
    for p, i, v in rep.out2:
        lines.append(f"  msg2 {p}->{i} {value_str(v)}")
    for p, v in rep.out3:
        lines.append(f"  decide {p}: {value_str(v)}")
    for p, r, v, m, i in rep.in1:
        lines.append(f"  collect1 {p} r{r} awaiting {i} V={value_str(v)} M={value_str(m)}")
    for p, v, m, i in rep.in2:
        lines.append(f"  collect2 {p} awaiting {i} V={value_str(v)} M={value_str(m)}")
    wj, ww, wb = rep.wrap
    state = "ok!" if wj == 0 else (f"at {wj}" if wb == 1 else f"inert at {wj}")
    lines.append(f"  observer {state} value={value_str(ww)}")
    return "\n".join(lines)
