"""Explicit-state exploration and the machine checks.

Each statement the design rests on becomes a check over the explored
state space: local confluence of evaluation, existence and uniqueness of
normal forms (round-trips of extraction and expansion), the state-by-state
correspondence between the calculus semantics and the representative
semantics, the consensus properties (validity, agreement, termination),
and weak bisimilarity with the one-state specification that just emits on
`ok`.  Checks return reports; nothing is probabilistic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import consensus_model as cm
from . import lts, repsem
from .calculus_ast import BOT, value_str
from .errors import BoundExceeded, EmptyKnowledge, GraphTruncated
from .evaluation import eval_steps, evaluate
from .lts import TAU, action_str

DEFAULT_MAX_STATES = 5_000_000


@dataclass
class LtsGraph:
    mode: str
    initials: tuple
    node_ids: dict                 # Representative -> discovery index
    edges: tuple                   # Transition
    truncated: bool = False
    defects: tuple = ()            # (Representative, diagnosis) pairs
    _tau_adj: dict | None = field(default=None, repr=False)
    _adj: dict | None = field(default=None, repr=False)

    @property
    def nodes(self):
        return self.node_ids.keys()

    def tau_adjacency(self) -> dict:
        if self._tau_adj is None:
            adj: dict = {}
            for tr in self.edges:
                if tr.action == TAU:
                    adj.setdefault(tr.source, []).append(tr.target)
            self._tau_adj = adj
        return self._tau_adj

    def adjacency(self) -> dict:
        if self._adj is None:
            adj: dict = {}
            for tr in self.edges:
                adj.setdefault(tr.source, []).append(tr)
            self._adj = adj
        return self._adj


def explore(sys: cm.System, mode: str = "representative",
            max_states: int = DEFAULT_MAX_STATES) -> LtsGraph:
    """Breadth-first closure of the instance under the chosen successor
    function, starting from one representative per trusted immortal.

    A state on which the algorithm itself is undefined (an empty decision,
    reachable only under fault-injection mutations) is kept as a node with
    no successors and recorded as a defect.
    """
    initials = tuple(lts.initial_reps(sys))
    node_ids: dict = {}
    edges: list = []
    defects: list = []
    queue: deque = deque()
    for rep in initials:
        if rep not in node_ids:
            node_ids[rep] = len(node_ids)
            queue.append(rep)
    while queue:
        rep = queue.popleft()
        try:
            succs = lts.successors(sys, rep, mode)
        except EmptyKnowledge as exc:
            defects.append((rep, str(exc)))
            continue
        for tr in succs:
            if tr.target not in node_ids:
                if len(node_ids) >= max_states:
                    graph = LtsGraph(mode, initials, node_ids, tuple(edges),
                                     truncated=True, defects=tuple(defects))
                    raise BoundExceeded(graph, max_states)
                node_ids[tr.target] = len(node_ids)
                queue.append(tr.target)
            edges.append(tr)
    return LtsGraph(mode, initials, node_ids, tuple(edges), defects=tuple(defects))


# ---------------------------------------------------------------------------
# Reports.

@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict
    counterexamples: list

    def to_jsonable(self) -> dict:
        return {
            "check": self.name,
            "status": "pass" if self.passed else "fail",
            "details": self.details,
            "counterexamples": self.counterexamples[:20],
        }


@dataclass
class CorrespondenceReport:
    checked: int
    sound_failures: list           # (state, extra representative-step target)
    complete_failures: list        # (state, unmatched calculus-step target)
    truncated: bool
    defects: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.sound_failures and not self.complete_failures

    def to_jsonable(self) -> dict:
        def fmt(pairs):
            return [
                {"state": repsem.rep_digest(s),
                 "target": repsem.rep_digest(t) if t is not None else None}
                for s, t in pairs[:20]
            ]

        return {
            "check": "correspondence",
            "status": "pass" if self.passed else "fail",
            "details": {
                "states_checked": self.checked,
                "truncated": self.truncated,
                "defects": len(self.defects),
            },
            "sound_failures": fmt(self.sound_failures),
            "complete_failures": fmt(self.complete_failures),
        }


# ---------------------------------------------------------------------------
# Confluence.

def check_confluence(sys: cm.System, max_states: int = DEFAULT_MAX_STATES,
                     max_configs: int = DEFAULT_MAX_STATES) -> CheckReport:
    """Every single-step evaluation diamond joins on equal fixed points.

    Unevaluated configurations arise as the raw targets of transitions
    (and as the freshly chosen-immortal initials); the check closes each
    under single evaluation steps and compares the fixed points of every
    branching."""
    raw_configs = [cfg for cfg in lts.select_ti(sys, cm.make_initial(sys.inst))]
    graph = explore(sys, "representative", max_states)
    for rep in graph.nodes:
        for _, _, raw in lts.calculus_raw_successors(sys, rep):
            raw_configs.append(raw)

    seen: set = set()
    diamonds = 0
    undefined = 0
    failures: list = []
    for cfg in raw_configs:
        frontier = [cfg]
        while frontier:
            c = frontier.pop()
            if c in seen:
                continue
            seen.add(c)
            if len(seen) > max_configs:
                raise BoundExceeded(graph, max_configs)
            try:
                succs = sorted({target for _, target in eval_steps(c, sys.defs)})
                if len(succs) > 1:
                    diamonds += 1
                    fixes = {evaluate(s, sys.defs) for s in succs}
                    if len(fixes) != 1:
                        failures.append(
                            f"a diamond joins on {len(fixes)} distinct fixed points"
                        )
            except EmptyKnowledge:
                # The algorithm is undefined here (mutations only); nothing
                # to join.
                undefined += 1
                continue
            frontier.extend(s for s in succs if s not in seen)
    return CheckReport(
        name="confluence",
        passed=not failures,
        details={"configurations": len(seen), "diamonds": diamonds,
                 "undefined": undefined},
        counterexamples=failures,
    )


# ---------------------------------------------------------------------------
# Correspondence.

def check_correspondence(sys: cm.System,
                         max_states: int = DEFAULT_MAX_STATES) -> CorrespondenceReport:
    """Per reachable representative, the internal successor sets of the two
    semantics must be equal.  Explores the union so a divergence on either
    side still gets visited and reported."""
    visited: set = set()
    queue: deque = deque()
    truncated = False
    sound: list = []
    complete: list = []
    defects: list = []
    checked = 0
    for rep in lts.initial_reps(sys):
        if rep not in visited:
            visited.add(rep)
            queue.append(rep)
    while queue:
        rep = queue.popleft()
        checked += 1
        try:
            rep_targets = {t for _, t in repsem.rep_successors(sys, rep)}
        except EmptyKnowledge:
            rep_targets = None
        try:
            calc_targets = {tr.target for tr in lts.successors(sys, rep, "calculus")
                            if tr.action == TAU}
        except EmptyKnowledge as exc:
            calc_targets = None
            defect = str(exc)
        if rep_targets is None or calc_targets is None:
            # The algorithm itself is undefined here (empty decision); the
            # two semantics must at least be undefined on the same states.
            if rep_targets is not None:
                complete.append((rep, None))
            elif calc_targets is not None:
                sound.append((rep, None))
            else:
                defects.append((rep, defect))
            continue
        for t in sorted(rep_targets - calc_targets):
            sound.append((rep, t))
        for t in sorted(calc_targets - rep_targets):
            complete.append((rep, t))
        for t in sorted(rep_targets | calc_targets):
            if t not in visited:
                if len(visited) >= max_states:
                    truncated = True
                    continue
                visited.add(t)
                queue.append(t)
    return CorrespondenceReport(checked, sound, complete, truncated, defects)


# ---------------------------------------------------------------------------
# Normal-form round trips.

def check_normal_forms(sys: cm.System, graph: LtsGraph) -> CheckReport:
    """Extraction succeeded on every reachable state already (or the graph
    would not exist); re-check expansion round-trips on each node."""
    failures = []
    for rep in graph.nodes:
        expanded = repsem.sfi(sys, rep)
        if repsem.sf(sys, expanded) != rep:
            failures.append(f"round trip broke at {repsem.rep_digest(rep)}")
        fixed = evaluate(expanded, sys.defs)
        if fixed != expanded:
            failures.append(
                f"expansion of {repsem.rep_digest(rep)} is not fully evaluated"
            )
    return CheckReport(
        name="normal-forms",
        passed=not failures,
        details={"states": len(graph.node_ids)},
        counterexamples=failures,
    )


# ---------------------------------------------------------------------------
# Consensus properties.

def _rule_family(rule: str) -> str:
    return rule.split()[0]


def _rule_params(rule: str) -> dict:
    params = {}
    for part in rule.split()[1:]:
        if "=" in part:
            k, v = part.split("=", 1)
            params[k] = v
    return params


_SUSPICION_FAMILIES = {"SR4", "SR5", "SR6", "SR4'", "SR5'", "Susp"}
_CRASH_FAMILIES = {"SR7", "Stop"}


def _valid_relay(sys, dv) -> bool:
    entries = cm.relay_entries(dv)
    if [q for q, _ in entries] != list(range(1, sys.n + 1)):
        return False
    return all(v == BOT or v == ("nat", sys.u[q - 1]) for q, v in entries)


def _valid_know(sys, vv) -> bool:
    entries = cm.know_entries(vv)
    if [q for q, _, _ in entries] != list(range(1, sys.n + 1)):
        return False
    return all(
        (v == BOT or v == ("nat", sys.u[q - 1])) and 0 <= r <= sys.n - 1
        for q, v, r in entries
    )


def _valid_msgs(sys, msgs) -> bool:
    for tag, vec, rnd, sender in cm.msg_entries(msgs):
        if not 1 <= sender <= sys.n:
            return False
        if tag == 1:
            if not 1 <= rnd <= sys.n - 1:
                return False
            if vec != BOT and not _valid_relay(sys, vec):
                return False
        else:
            if vec != BOT and not _valid_know(sys, vec):
                return False
    return True


def _node_validity_violations(sys, rep) -> list:
    uvals = {("nat", v) for v in sys.u}
    bad = []
    for p, i, r, dv in rep.out1:
        if not _valid_relay(sys, dv):
            bad.append(f"round message {p}->{i} r{r} carries an invalid vector")
    for p, i, vv in rep.out2:
        if not _valid_know(sys, vv):
            bad.append(f"sync message {p}->{i} carries an invalid vector")
    for p, v in rep.out3:
        if v not in uvals:
            bad.append(f"agent {p} decided unproposed value {value_str(v)}")
    for p, r, vv, msgs, _ in rep.in1:
        if not _valid_know(sys, vv) or not _valid_msgs(sys, msgs):
            bad.append(f"collector {p} r{r} holds invalid state")
    for p, vv, msgs, _ in rep.in2:
        if not _valid_know(sys, vv) or not _valid_msgs(sys, msgs):
            bad.append(f"collector {p} holds invalid state")
    ww = rep.wrap[1]
    if ww != BOT and ww not in uvals:
        bad.append(f"observer remembers unproposed value {value_str(ww)}")
    return bad


def _tau_cycle(graph: LtsGraph):
    """Return one internal-step cycle if the graph has any, else None."""
    adj = graph.tau_adjacency()
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {rep: WHITE for rep in graph.nodes}
    for root in graph.nodes:
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(adj.get(root, ())))]
        colour[root] = GREY
        trail = [root]
        while stack:
            node, children = stack[-1]
            advanced = False
            for child in children:
                if colour[child] == GREY:
                    return trail[trail.index(child):] + [child]
                if colour[child] == WHITE:
                    colour[child] = GREY
                    trail.append(child)
                    stack.append((child, iter(adj.get(child, ()))))
                    advanced = True
                    break
            if not advanced:
                colour[node] = BLACK
                trail.pop()
                stack.pop()
    return None


def check_properties(sys: cm.System, graph: LtsGraph) -> CheckReport:
    """Validity, agreement, termination, plus the transition-level trace
    invariants (only `ok` is observable, suspicion spares the trusted
    immortal, perfect suspicion only hits crashed agents, crashes are
    monotone)."""
    if graph.truncated:
        raise GraphTruncated("properties need a fully explored graph")
    failures: list = []
    decided: dict = {}

    for rep, diagnosis in graph.defects:
        failures.append(
            f"algorithm undefined at {repsem.rep_digest(rep)}: {diagnosis}"
        )
    for rep in graph.nodes:
        failures.extend(_node_validity_violations(sys, rep))
        if rep.wrap[2] == 0:
            failures.append(
                f"agreement broken: observer went inert at {repsem.rep_digest(rep)}"
            )
        seen_here = {value_str(v) for _, v in rep.out3}
        if rep.wrap[1] != BOT:
            seen_here.add(value_str(rep.wrap[1]))
        for s in seen_here:
            decided[s] = decided.get(s, 0) + 1

    for tr in graph.edges:
        family = _rule_family(tr.rule)
        params = _rule_params(tr.rule)
        if tr.action != TAU and tr.action != ("snd", ("ok",), BOT):
            failures.append(f"observable other than ok: {action_str(tr.action)}")
        if family in _SUSPICION_FAMILIES:
            suspected = int(params.get("p") or params.get("k"))
            if suspected == tr.source.ti:
                failures.append(f"trusted immortal suspected via {tr.rule}")
        if family in {"SRW2", "PSusp"}:
            suspected = int(params.get("j") or params.get("k"))
            if suspected in tr.source.live:
                failures.append(f"live agent {suspected} perfectly suspected")
        if not set(tr.target.live) <= set(tr.source.live):
            failures.append(f"live set grew across {tr.rule}")
        if tr.target.budget > tr.source.budget:
            failures.append(f"crash budget grew across {tr.rule}")
        if (tr.target.budget < tr.source.budget) != (family in _CRASH_FAMILIES):
            failures.append(f"budget change does not match rule {tr.rule}")

    cycle = _tau_cycle(graph)
    if cycle is not None:
        failures.append(
            "internal-step cycle through "
            + " -> ".join(repsem.rep_digest(r) for r in cycle)
        )
    adj = graph.tau_adjacency()
    stuck = 0
    for rep in graph.nodes:
        if not adj.get(rep):
            wj, _, wb = rep.wrap
            if wj != 0 or wb != 1:
                stuck += 1
                failures.append(
                    f"maximal run ends undecided at {repsem.rep_digest(rep)}"
                )
    return CheckReport(
        name="properties",
        passed=not failures,
        details={
            "states": len(graph.node_ids),
            "transitions": len(graph.edges),
            "decided_values": dict(sorted(decided.items())),
            "undecided_maximal_states": stuck,
        },
        counterexamples=failures,
    )


def check_safety_subset(sys: cm.System, reps) -> CheckReport:
    """Validity and agreement over a set of states, for bounded runs where
    the full graph (and with it termination) is out of reach."""
    failures: list = []
    count = 0
    for rep in reps:
        count += 1
        failures.extend(_node_validity_violations(sys, rep))
        if rep.wrap[2] == 0:
            failures.append(
                f"agreement broken: observer went inert at {repsem.rep_digest(rep)}"
            )
    return CheckReport(
        name="safety-subset",
        passed=not failures,
        details={"states": count},
        counterexamples=failures,
    )


# ---------------------------------------------------------------------------
# Weak bisimulation.

def ok_spec_graph(sys: cm.System) -> LtsGraph:
    """The specification: an observer standing at the public ok output,
    nothing else, no crashes left."""
    spec_rep = repsem.Representative(
        live=tuple(range(1, sys.n + 1)),
        budget=0,
        ti=1,
        out1=(), out2=(), out3=(), in1=(), in2=(),
        wrap=(0, BOT, 1),
    )
    edges = tuple(lts.successors(sys, spec_rep, "representative"))
    return LtsGraph("representative", (spec_rep,), {spec_rep: 0}, edges)


def weak_bisim(g1: LtsGraph, g2: LtsGraph):
    """Decide weak bisimilarity of the initial states of two graphs.

    Returns (True, relation) with the relation as cross-graph node-id
    pairs, or (False, description of a distinguishing observation path).
    """
    if g1.truncated or g2.truncated:
        raise GraphTruncated("bisimulation needs fully explored graphs")

    states = [(0, rep) for rep in g1.nodes] + [(1, rep) for rep in g2.nodes]
    index = {s: k for k, s in enumerate(states)}
    graphs = (g1, g2)

    tau_succ: list = [[] for _ in states]
    visible: dict = {}
    for side, g in enumerate(graphs):
        for tr in g.edges:
            src = index[(side, tr.source)]
            dst = index[(side, tr.target)]
            if tr.action == TAU:
                tau_succ[src].append(dst)
            else:
                visible.setdefault(tr.action, [[] for _ in states])
                visible[tr.action][src].append(dst)

    def closure(start: int) -> frozenset:
        seen = {start}
        frontier = [start]
        while frontier:
            s = frontier.pop()
            for t in tau_succ[s]:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return frozenset(seen)

    tclo = [closure(k) for k in range(len(states))]
    weak_moves: dict = {}
    for action, succ in sorted(visible.items()):
        moves = []
        for k in range(len(states)):
            reach: set = set()
            for x in tclo[k]:
                for y in succ[x]:
                    reach |= tclo[y]
            moves.append(frozenset(reach))
        weak_moves[action] = moves

    labels = sorted(weak_moves)
    block = [0] * len(states)
    history = [block]
    while True:
        sigs = {}
        new_block = []
        for k in range(len(states)):
            sig = (
                block[k],
                frozenset(block[x] for x in tclo[k]),
                tuple(frozenset(block[x] for x in weak_moves[a][k]) for a in labels),
            )
            if sig not in sigs:
                sigs[sig] = len(sigs)
            new_block.append(sigs[sig])
        if new_block == block:
            break
        block = new_block
        history.append(block)

    init_blocks = {block[index[(0, r)]] for r in g1.initials}
    init_blocks |= {block[index[(1, r)]] for r in g2.initials}
    if len(init_blocks) == 1:
        relation = sorted(
            (g1.node_ids[r1], g2.node_ids[r2])
            for r1 in g1.nodes for r2 in g2.nodes
            if block[index[(0, r1)]] == block[index[(1, r2)]]
        )
        return True, relation

    def distinguish(s: int, t: int) -> list:
        """A distinguishing observation path, replayed off the refinement.

        The two states first get different classes in some refinement
        round; at the round before, their signatures differ on a label.
        A visible difference ends the path; a silent one steps into the
        class only one side reaches, where the states already differ one
        round earlier, so the replay terminates."""
        path: list = []
        rnd = next(r for r, blk in enumerate(history) if blk[s] != blk[t])
        while True:
            prev = history[rnd - 1]
            for label in labels:
                sblocks = {prev[x] for x in weak_moves[label][s]}
                tblocks = {prev[x] for x in weak_moves[label][t]}
                if sblocks != tblocks:
                    side = "left" if sblocks - tblocks else "right"
                    detail = ("the other side cannot do it at all"
                              if not (sblocks and tblocks)
                              else "into a class the other side cannot reach")
                    return path + [f"the {side} side weakly does "
                                   f"{action_str(label)} ({detail})"]
            sclo = {prev[x] for x in tclo[s]}
            tclo_blocks = {prev[x] for x in tclo[t]}
            diff = sclo - tclo_blocks
            if diff:
                s = min(x for x in tclo[s] if prev[x] in diff)
                path.append("left takes internal steps")
            else:
                t = min(x for x in tclo[t] if prev[x] in tclo_blocks - sclo)
                path.append("right takes internal steps")
            rnd = next(r for r, blk in enumerate(history) if blk[s] != blk[t])

    s0 = index[(0, g1.initials[0])]
    bad = next(
        (index[(side, r)] for side, g in enumerate(graphs) for r in g.initials
         if block[index[(side, r)]] != block[s0]),
        None,
    )
    path = distinguish(s0, bad) if bad is not None else ["initials differ"]
    return False, " ; ".join(path)


# ---------------------------------------------------------------------------
# Exports.

def graph_stats(graph: LtsGraph) -> dict:
    adj = graph.adjacency()
    terminal = sum(1 for rep in graph.nodes
                   if all(tr.target == rep for tr in adj.get(rep, [])))
    decided: dict = {}
    for rep in graph.nodes:
        seen_here = {value_str(v) for _, v in rep.out3}
        if rep.wrap[1] != BOT:
            seen_here.add(value_str(rep.wrap[1]))
        for s in seen_here:
            decided[s] = decided.get(s, 0) + 1
    return {
        "mode": graph.mode,
        "states": len(graph.node_ids),
        "transitions": len(graph.edges),
        "initial_states": len(graph.initials),
        "terminal_states": terminal,
        "decided_values": dict(sorted(decided.items())),
        "truncated": graph.truncated,
    }


def export_dot(graph: LtsGraph) -> str:
    lines = ["digraph lts {", "  rankdir=LR;"]
    for rep, ident in sorted(graph.node_ids.items(), key=lambda kv: kv[1]):
        wj, ww, wb = rep.wrap
        label = (f"{repsem.rep_digest(rep)}\\n"
                 f"live={len(rep.live)} b={rep.budget} w=({wj},{value_str(ww)},{wb})")
        shape = "doublecircle" if wj == 0 else "ellipse"
        lines.append(f'  n{ident} [label="{label}", shape={shape}];')
    for tr in sorted(graph.edges):
        a = graph.node_ids[tr.source]
        b = graph.node_ids[tr.target]
        lines.append(
            f'  n{a} -> n{b} [label="{_rule_family(tr.rule)}:{action_str(tr.action)}"];'
        )
    lines.append("}")
    return "\n".join(lines)


def graph_jsonable(graph: LtsGraph) -> dict:
    nodes = sorted(graph.node_ids.items(), key=lambda kv: kv[1])
    return {
        "mode": graph.mode,
        "truncated": graph.truncated,
        "initials": [graph.node_ids[r] for r in graph.initials],
        "nodes": [dict(id=ident, **repsem.rep_jsonable(rep)) for rep, ident in nodes],
        "edges": [
            {
                "source": graph.node_ids[tr.source],
                "target": graph.node_ids[tr.target],
                "action": action_str(tr.action),
                "rule": tr.rule,
            }
            for tr in sorted(graph.edges)
        ],
    }
