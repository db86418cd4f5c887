"""Four-layer term language: data values, expressions, processes, networks.

All terms are immutable tagged tuples.  That keeps equality, hashing and
total ordering structural and cheap, which the state-space explorer leans
on heavily.  Constructors validate their arguments; everything downstream
trusts the tags.

Locations are agent ids (positive ints) or the observer location ``STAR``.
Channels are structured ids rather than strings: a slot may hold either a
concrete int or a variable name that substitution later resolves, so the
indexed channel families used by process equations need no name mangling.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from .errors import (
    PatternMismatch,
    TypeMismatch,
    UnboundFunction,
    UnboundVariable,
)

STAR = "*"

# ---------------------------------------------------------------------------
# Data values:  bot | nat | pair | finite set

BOT = ("bot",)


def nat(k):
    assert isinstance(k, int) and k >= 0, k
    return ("nat", k)


def vpair(a, b):
    return ("pair", a, b)


def finset(vals):
    """Finite-set value; duplicates collapse, order is canonical."""
    return ("set", tuple(sorted(set(vals))))


def is_value(v) -> bool:
    match v:
        case ("bot",):
            return True
        case ("nat", int(k)):
            return k >= 0
        case ("pair", a, b):
            return is_value(a) and is_value(b)
        case ("set", tuple(elems)):
            return all(is_value(e) for e in elems)
    return False


def as_nat(v) -> int:
    if v[0] != "nat":
        raise TypeMismatch(f"expected a natural, got {value_str(v)}")
    return v[1]


def value_str(v) -> str:
    match v:
        case ("bot",):
            return "_"
        case ("nat", k):
            return str(k)
        case ("pair", a, b):
            return f"({value_str(a)},{value_str(b)})"
        case ("set", elems):
            return "{" + ",".join(value_str(e) for e in elems) + "}"
    return repr(v)


# ---------------------------------------------------------------------------
# Channel ids.  Slots hold ints once concrete; equation bodies may leave
# variable names in slots, filled in by substitution.

CHAN_OK = ("ok",)


def chan_a(sender, receiver, rnd):
    return ("a", sender, receiver, rnd)


def chan_b(sender, receiver):
    return ("b", sender, receiver)


def chan_c(agent):
    return ("c", agent)


def chan_is_concrete(ch) -> bool:
    return all(isinstance(s, int) for s in ch[1:])


def chan_str(ch) -> str:
    return "_".join(str(s) for s in ch)


# ---------------------------------------------------------------------------
# Expressions:  lit | var | paire | call

def lit(v):
    assert is_value(v), v
    return ("lit", v)


def var(x):
    assert isinstance(x, str), x
    return ("var", x)


def paire(a, b):
    return ("paire", a, b)


def call(f, arg):
    assert isinstance(f, str), f
    return ("call", f, arg)


def tuple_e(*es):
    """Right-nested pair expression, the argument-tuple convention."""
    assert es
    out = es[-1]
    for e in reversed(es[:-1]):
        out = paire(e, out)
    return out


def tuple_v(*vs):
    assert vs
    out = vs[-1]
    for v in reversed(vs[:-1]):
        out = vpair(v, out)
    return out


FunctionTable = dict[str, Callable]


def eval_expr(e, ftable: FunctionTable):
    """Evaluate a closed expression to a data value.  Pure."""
    match e:
        case ("lit", v):
            return v
        case ("var", x):
            raise UnboundVariable(f"free variable {x!r} in expression")
        case ("paire", a, b):
            return ("pair", eval_expr(a, ftable), eval_expr(b, ftable))
        case ("call", f, arg):
            fn = ftable.get(f)
            if fn is None:
                raise UnboundFunction(f"no function {f!r} in table")
            return fn(eval_expr(arg, ftable))
    raise TypeMismatch(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Processes.
#
#   nil | out | in | susp | psusp | sum | if | tau | const | par
#
# Sum branches must be guards; conditional branches may be arbitrary
# processes (the consensus equations put parallel sends and constant calls
# under conditionals, so the stricter reading of the grammar is untenable).

NIL = ("nil",)

_GUARD_TAGS = {"nil", "out", "in", "susp", "psusp", "sum", "if"}


def out(ch, e, cont):
    return ("out", ch, e, cont)


def inp(ch, pattern, cont):
    return ("in", ch, pattern, cont)


def susp(k, cont):
    return ("susp", k, cont)


def psusp(k, cont):
    return ("psusp", k, cont)


def plus(g1, g2):
    assert g1[0] in _GUARD_TAGS and g2[0] in _GUARD_TAGS, (g1[0], g2[0])
    return ("sum", g1, g2)


def cond(e, p, q):
    return ("if", e, p, q)


def tau(cont):
    return ("tau", cont)


def const(name, arg):
    assert isinstance(name, str), name
    return ("const", name, arg)


def par(p, q):
    return ("par", p, q)


def par_chain(ps):
    """Right-nested parallel composition of processes."""
    assert ps
    outp = ps[-1]
    for p in reversed(ps[:-1]):
        outp = par(p, outp)
    return outp


def out_atom(ch, e):
    """Output with no continuation."""
    return out(ch, e, NIL)


def inpat(ch, x, k, cont):
    """Receive on ``ch`` or suspect location ``k``; both continue as ``cont``
    (with bot substituted for the pattern on the suspicion branch)."""
    return plus(inp(ch, x, cont), susp(k, substitute(cont, x, BOT)))


# ---------------------------------------------------------------------------
# Networks:  nnil | loc | npar | res

NNIL = ("nnil",)


def located(location, p):
    assert location == STAR or (isinstance(location, int) and location >= 1)
    return ("loc", location, p)


def npar(m, n):
    return ("npar", m, n)


def npar_chain(ns):
    if not ns:
        return NNIL
    outn = ns[-1]
    for n in reversed(ns[:-1]):
        outn = npar(n, outn)
    return outn


def res(n, ch):
    return ("res", n, ch)


def res_chain(n, chans):
    for ch in reversed(list(chans)):
        n = res(n, ch)
    return n


# ---------------------------------------------------------------------------
# Configurations.

class Config(NamedTuple):
    live: frozenset
    budget: int
    ti: int | None
    net: tuple

    def is_live(self, location) -> bool:
        return location == STAR or location in self.live


class Defs(NamedTuple):
    """Equation set plus the function table its expressions draw from.

    ``cache``, when a dict, memoises constant unfoldings by argument value;
    local states recur across global states constantly.  Callers that build
    throwaway equation sets may leave it None.
    """
    equations: dict
    ftable: FunctionTable
    cache: dict | None = None


# ---------------------------------------------------------------------------
# Pattern matching and substitution.

def match_pattern(pattern, v) -> dict:
    """Bind the variables of a pattern to the components of a value."""
    env: dict = {}

    def walk(pat, val):
        if isinstance(pat, str):
            assert pat not in env, f"duplicate variable {pat!r} in pattern"
            env[pat] = val
        else:
            if val[0] != "pair":
                raise PatternMismatch(
                    f"pattern {pat!r} needs a pair, got {value_str(val)}"
                )
            walk(pat[0], val[1])
            walk(pat[1], val[2])

    walk(pattern, v)
    return env


def pattern_vars(pattern) -> set:
    if isinstance(pattern, str):
        return {pattern}
    return pattern_vars(pattern[0]) | pattern_vars(pattern[1])


def _subst_slot(slot, env):
    # Channel and suspicion slots: variable names resolve to naturals.
    if isinstance(slot, str) and slot in env:
        v = env[slot]
        if v[0] != "nat":
            raise TypeMismatch(f"slot {slot!r} bound to non-natural {value_str(v)}")
        return v[1]
    return slot


def _subst_chan(ch, env):
    return (ch[0],) + tuple(_subst_slot(s, env) for s in ch[1:])


def subst_expr(e, env: dict):
    match e:
        case ("lit", _):
            return e
        case ("var", x):
            v = env.get(x)
            return e if v is None else ("lit", v)
        case ("paire", a, b):
            return ("paire", subst_expr(a, env), subst_expr(b, env))
        case ("call", f, arg):
            return ("call", f, subst_expr(arg, env))
    raise TypeMismatch(f"not an expression: {e!r}")


def subst_proc(p, env: dict):
    if not env:
        return p
    match p:
        case ("nil",):
            return p
        case ("out", ch, e, cont):
            return ("out", _subst_chan(ch, env), subst_expr(e, env),
                    subst_proc(cont, env))
        case ("in", ch, pattern, cont):
            # The pattern binds; shadowed names are not substituted inside.
            inner = {k: v for k, v in env.items() if k not in pattern_vars(pattern)}
            return ("in", _subst_chan(ch, env), pattern, subst_proc(cont, inner))
        case ("susp", k, cont):
            return ("susp", _subst_slot(k, env), subst_proc(cont, env))
        case ("psusp", k, cont):
            return ("psusp", _subst_slot(k, env), subst_proc(cont, env))
        case ("sum", g1, g2):
            return ("sum", subst_proc(g1, env), subst_proc(g2, env))
        case ("if", e, a, b):
            return ("if", subst_expr(e, env), subst_proc(a, env), subst_proc(b, env))
        case ("tau", cont):
            return ("tau", subst_proc(cont, env))
        case ("const", name, arg):
            return ("const", name, subst_expr(arg, env))
        case ("par", a, b):
            return ("par", subst_proc(a, env), subst_proc(b, env))
    raise TypeMismatch(f"not a process: {p!r}")


def substitute(p, pattern, v):
    """P{v/X}: replace the free variables of the pattern by the matching
    components of the value.  Only data values are substituted."""
    assert is_value(v), v
    return subst_proc(p, match_pattern(pattern, v))


# ---------------------------------------------------------------------------
# Free names: variable names plus concrete channel ids.

def _expr_names(e, acc: set):
    match e:
        case ("lit", _):
            pass
        case ("var", x):
            acc.add(x)
        case ("paire", a, b):
            _expr_names(a, acc)
            _expr_names(b, acc)
        case ("call", _, arg):
            _expr_names(arg, acc)


def _chan_names(ch, acc: set):
    if chan_is_concrete(ch):
        acc.add(ch)
    else:
        acc.add((ch[0],) + tuple(s for s in ch[1:] if isinstance(s, int)))
        for s in ch[1:]:
            if isinstance(s, str):
                acc.add(s)


def _proc_names(p, acc: set):
    match p:
        case ("nil",):
            pass
        case ("out", ch, e, cont):
            _chan_names(ch, acc)
            _expr_names(e, acc)
            _proc_names(cont, acc)
        case ("in", ch, pattern, cont):
            _chan_names(ch, acc)
            inner: set = set()
            _proc_names(cont, inner)
            acc |= inner - pattern_vars(pattern)
        case ("susp", k, cont) | ("psusp", k, cont):
            if isinstance(k, str):
                acc.add(k)
            _proc_names(cont, acc)
        case ("sum", g1, g2) | ("par", g1, g2):
            _proc_names(g1, acc)
            _proc_names(g2, acc)
        case ("if", e, a, b):
            _expr_names(e, acc)
            _proc_names(a, acc)
            _proc_names(b, acc)
        case ("tau", cont):
            _proc_names(cont, acc)
        case ("const", _, arg):
            _expr_names(arg, acc)


def free_names(t) -> set:
    """Free variable names and channel ids of a process or network."""
    acc: set = set()
    match t:
        case ("nnil",):
            pass
        case ("loc", _, p):
            _proc_names(p, acc)
        case ("npar", m, n):
            acc |= free_names(m) | free_names(n)
        case ("res", n, ch):
            acc = free_names(n) - {ch}
        case _:
            _proc_names(t, acc)
    return acc


# ---------------------------------------------------------------------------
# Debug rendering.  Compact, not round-trippable.

def expr_str(e) -> str:
    match e:
        case ("lit", v):
            return value_str(v)
        case ("var", x):
            return x
        case ("paire", a, b):
            return f"({expr_str(a)},{expr_str(b)})"
        case ("call", f, arg):
            return f"{f}({expr_str(arg)})"
    return repr(e)


def _pat_str(pattern) -> str:
    if isinstance(pattern, str):
        return pattern
    return f"({_pat_str(pattern[0])},{_pat_str(pattern[1])})"


def proc_str(p) -> str:
    match p:
        case ("nil",):
            return "0"
        case ("out", ch, e, ("nil",)):
            return f"{chan_str(ch)}!<{expr_str(e)}>"
        case ("out", ch, e, cont):
            return f"{chan_str(ch)}!<{expr_str(e)}>.{proc_str(cont)}"
        case ("in", ch, pattern, cont):
            return f"{chan_str(ch)}?({_pat_str(pattern)}).{proc_str(cont)}"
        case ("susp", k, cont):
            return f"susp_{k}.{proc_str(cont)}"
        case ("psusp", k, cont):
            return f"psusp_{k}.{proc_str(cont)}"
        case ("sum", g1, g2):
            return f"({proc_str(g1)} + {proc_str(g2)})"
        case ("if", e, a, b):
            return f"if {expr_str(e)} then {proc_str(a)} else {proc_str(b)}"
        case ("tau", cont):
            return f"tau.{proc_str(cont)}"
        case ("const", name, arg):
            return f"{name}({expr_str(arg)})"
        case ("par", a, b):
            return f"({proc_str(a)} | {proc_str(b)})"
    return repr(p)


def net_str(n) -> str:
    match n:
        case ("nnil",):
            return "0"
        case ("loc", location, p):
            return f"{location}[{proc_str(p)}]"
        case ("npar", a, b):
            return f"{net_str(a)} | {net_str(b)}"
        case ("res", inner, ch):
            return f"({net_str(inner)}) \\ {chan_str(ch)}"
    return repr(n)


def config_str(cfg: Config) -> str:
    live = ",".join(str(x) for x in sorted(cfg.live))
    ti = "_" if cfg.ti is None else str(cfg.ti)
    return f"<({{{live}}},{cfg.budget}), ti={ti}, {net_str(cfg.net)}>"
