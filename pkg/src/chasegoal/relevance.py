"""Relevance analysis: keep only rules that can contribute to a query answer.

The base instance is abstracted into a critical instance (every tuple over
the constants of the program plus a star constant, typed per sort when a
schema is available).  The program runs forward on that abstraction, then the
query facts are traced backwards through the rules; rules never reached are
dropped.  Equality body atoms that no backward trace ever needed are inlined
away, which is what lets the magic-set stage bind through them later.
"""

from __future__ import annotations

from collections import deque
from itertools import product
from typing import Iterable, Optional

from .chase import (
    DepthLimitExceeded,
    FactLimitExceeded,
    Limits,
    naive_fixpoint,
)
from .eqprep import reflexivity_axioms, sym_trans
from .kernel import (
    Atom,
    Constant,
    Functional,
    Instance,
    Predicate,
    PredicateId,
    Program,
    Rule,
    Term,
    Variable,
    enumerate_matches,
    match_atom,
    pred_label,
    rule_atoms,
    substitute,
)


class AbstractionFixpointDiverged(RuntimeError):
    """The forward fixpoint on the abstract instance hit a guard; retry with
    function symbols abstracted to constants."""


class SortMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# Abstract instances
# ---------------------------------------------------------------------------


def _iter_constants(t: Term):
    if isinstance(t, Constant):
        yield t
    elif isinstance(t, Functional):
        for a in t.args:
            yield from _iter_constants(a)


def _program_constants(rules) -> "set[Constant]":
    out: set[Constant] = set()
    for r in rules:
        for atom in rule_atoms(r):
            for t in atom.args:
                out.update(_iter_constants(t))
    return out


def _fresh_name(base: str, taken: "set[str]") -> str:
    name = base
    while name in taken:
        name += "'"
    return name


def _constant_sorts(program: Program, schema) -> "dict[Constant, str]":
    """Sorts of program constants as schema positions imply them.  A constant
    at positions of two different sorts is an error; a constant whose sort
    the schema does not determine stays unknown."""
    inferred: dict[Constant, str] = {}
    for r in program.rules:
        for atom in rule_atoms(r):
            if not isinstance(atom.predicate, Predicate):
                continue
            sorts = schema.get((atom.predicate.name, atom.predicate.arity))
            if sorts is None:
                continue
            for i, t in enumerate(atom.args):
                if isinstance(t, Constant):
                    seen = inferred.get(t)
                    if seen is not None and seen != sorts[i]:
                        raise SortMismatch(
                            "constant %s used at positions of sort %s and %s"
                            % (t.name, seen, sorts[i])
                        )
                    inferred[t] = sorts[i]
    return inferred


def critical_instance(
    program: Program,
    base: "Instance | Iterable[PredicateId]",
    typed: bool = False,
    schema=None,
) -> Instance:
    """All facts over the predicates of the base signature with arguments
    from the program's constants plus a star.  With a schema, each sort gets
    its own star and constants only appear at positions of their sort;
    constants of unknown sort are allowed everywhere (the abstraction stays
    an over-approximation)."""
    base_preds = base.predicates() if isinstance(base, Instance) else set(base)
    constants = _program_constants(program.rules)
    taken = {c.name for c in constants}

    out = Instance()
    if not typed or not schema:
        star = Constant(_fresh_name("*", taken))
        pool = sorted(constants | {star}, key=lambda c: c.name)
        for pred in sorted(base_preds, key=pred_label):
            for args in product(pool, repeat=pred.arity):
                out.add(Atom(pred, args))
        return out

    inferred = _constant_sorts(program, schema)
    stars: dict[Optional[str], Constant] = {}

    def star_of(sort: Optional[str]) -> Constant:
        c = stars.get(sort)
        if c is None:
            c = Constant(_fresh_name("*%s" % (sort or ""), taken), sort)
            taken.add(c.name)
            stars[sort] = c
        return c

    for pred in sorted(base_preds, key=pred_label):
        if not isinstance(pred, Predicate):
            continue
        sorts = schema.get((pred.name, pred.arity)) or (None,) * pred.arity
        pools = []
        for i in range(pred.arity):
            sort = sorts[i]
            ok = [
                c
                for c in constants
                if sort is None or inferred.get(c) in (None, sort)
            ]
            pools.append(sorted(ok + [star_of(sort)], key=lambda c: c.name))
        for args in product(*pools):
            out.add(Atom(pred, args))
    return out


def abstract_functions_to_constants(program: Program) -> Program:
    """Replace every outermost function term f(..) by a constant unique to
    f, keeping rule and atom positions aligned with the input program."""
    taken = {c.name for c in _program_constants(program.rules)}
    cache: dict[str, Constant] = {}

    def conv(t: Term) -> Term:
        if isinstance(t, Functional):
            c = cache.get(t.symbol)
            if c is None:
                c = Constant(_fresh_name("_fn_" + t.symbol, taken))
                taken.add(c.name)
                cache[t.symbol] = c
            return c
        return t

    def conv_atom(a: Atom) -> Atom:
        return Atom(a.predicate, tuple(conv(t) for t in a.args))

    rules = tuple(
        Rule(conv_atom(r.head), tuple(conv_atom(a) for a in r.body))
        for r in program.rules
    )
    return Program(rules, program.query)


# ---------------------------------------------------------------------------
# Relevance
# ---------------------------------------------------------------------------


def relevance(
    program: Program,
    base: "Instance | Iterable[PredicateId]",
    una_known: bool = False,
    typed: bool = False,
    schema=None,
    abstract_functions: bool = False,
    fixpoint_limits: Limits = Limits(max_depth=10, max_facts=100_000),
) -> Program:
    """Subset of the program's rules reachable backwards from the query facts
    of the abstract fixpoint, in input order.

    With the unique name assumption, trivial equalities c = c are skipped
    while tracing; body equality atoms that no trace ever needed are then
    removed from the kept rules by inlining x = t.
    """
    if program.query is None:
        raise ValueError("relevance needs a program with a query predicate")
    analysis = abstract_functions_to_constants(program) if abstract_functions else program

    bprime = critical_instance(analysis, base, typed, schema)
    aux = reflexivity_axioms(analysis, bprime.predicates()) + sym_trans()
    try:
        fixpoint = naive_fixpoint(
            tuple(analysis.rules) + tuple(aux), bprime, fixpoint_limits
        )
    except (DepthLimitExceeded, FactLimitExceeded) as err:
        raise AbstractionFixpointDiverged(str(err)) from err

    seeds = [
        f
        for f in fixpoint.with_predicate(program.query)
        if all(isinstance(t, Constant) for t in f.args)
    ]
    queue = deque(sorted(seeds, key=repr))
    seen = set(queue)
    kept: set[int] = set()
    blocked: set[tuple[int, int]] = set()
    sources = list(enumerate(analysis.rules)) + [(None, r) for r in sym_trans()]

    while queue:
        fact = queue.popleft()
        for idx, rule in sources:
            sigma0 = match_atom(rule.head, fact)
            if sigma0 is None:
                continue
            for nu in enumerate_matches(rule.body, fixpoint, sigma0):
                if idx is not None:
                    kept.add(idx)
                for i, b in enumerate(rule.body):
                    g = substitute(nu, b)
                    if (
                        una_known
                        and g.is_equality
                        and isinstance(g.args[0], Constant)
                        and g.args[0] == g.args[1]
                    ):
                        continue
                    if g.is_equality and idx is not None:
                        blocked.add((idx, i))
                    if g not in seen:
                        seen.add(g)
                        queue.append(g)

    out = []
    for idx, rule in enumerate(program.rules):
        if idx not in kept:
            continue
        unblocked = {
            j
            for j, a in enumerate(rule.body)
            if a.is_equality and (idx, j) not in blocked
        }
        out.append(_inline_equalities(rule, unblocked) if unblocked else rule)
    return Program(tuple(out), program.query)


def _inline_equalities(rule: Rule, positions: "set[int]") -> Rule:
    sub: dict[Variable, Term] = {}
    for j in sorted(positions):
        atom = substitute(sub, rule.body[j])
        lhs, rhs = atom.args
        if not isinstance(lhs, Variable):
            raise ValueError("cannot inline %r in %r" % (atom, rule))
        for k in list(sub):
            sub[k] = substitute({lhs: rhs}, sub[k])
        sub[lhs] = rhs
    body = tuple(
        substitute(sub, a) for j, a in enumerate(rule.body) if j not in positions
    )
    return Rule(substitute(sub, rule.head), body)
