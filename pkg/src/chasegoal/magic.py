"""Equality-aware magic sets.

Adornments mark each argument position of a derived predicate as bound (b)
or free (f).  The equality predicate only ever gets the collapsed one-sided
form "eqb": bf and fb are the same demand up to symmetry, a fully bound
equality demands each side separately, and ff is not allowed.  Bodies are
reordered so that every equality atom has a variable bound by the magic
seed or by an earlier relational atom; programs where no such ordering
exists are rejected.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

from .kernel import (
    EQUALITY,
    Atom,
    MagicPredicate,
    PredicateId,
    Program,
    Rule,
    Term,
    vars_of,
)


class NoAdmissibleOrdering(ValueError):
    pass


def adorn(atom: Atom, bound: "set") -> str:
    """Raw adornment of an atom given the bound variables: a position is
    bound iff all its variables are."""
    return "".join("b" if vars_of(t) <= bound else "f" for t in atom.args)


def reorder(body: Iterable[Atom], bound_terms: Iterable[Term]) -> "tuple[Atom, ...]":
    """Admissible body ordering: relational atoms keep their relative order
    and each equality atom is emitted as soon as one of its variables is
    bound (by `bound_terms` or by an emitted relational atom)."""
    body = tuple(body)
    binders = vars_of(bound_terms)
    result: list[Atom] = []
    pending = [a for a in body if a.is_equality]
    relational = [a for a in body if not a.is_equality]

    def flush():
        nonlocal pending
        keep = []
        for e in pending:
            if vars_of(e) & binders:
                result.append(e)
            else:
                keep.append(e)
        pending = keep

    flush()
    for atom in relational:
        result.append(atom)
        binders |= vars_of(atom)
        flush()
    if pending:
        raise NoAdmissibleOrdering(
            "no admissible ordering: %r has no bound variable" % (pending[0],)
        )
    return tuple(result)


def magic(program: Program, sips: str = "maximal") -> Program:
    """Magic-set transformation seeded by an all-free demand on the query
    predicate.  Magic rules are emitted for body atoms that are equalities
    or whose predicate occurs in some head of the program; an equality
    demand bound on one side is processed under both orientations."""
    if program.query is None:
        raise ValueError("magic needs a program with a query predicate")
    if sips != "maximal":
        raise ValueError("only the maximal-binding sips is implemented")

    by_head: dict[PredicateId, list[Rule]] = {}
    for r in program.rules:
        by_head.setdefault(r.head.predicate, []).append(r)
    head_preds = set(by_head)

    out: list[Rule] = []
    seen_rules: set[Rule] = set()

    def emit(rule: Rule):
        if rule not in seen_rules:
            seen_rules.add(rule)
            out.append(rule)

    seed = MagicPredicate(program.query, "f" * program.query.arity)
    emit(Rule(Atom(seed, ()), ()))
    queued = {seed}
    work = deque([seed])

    def process(rule: Rule, m: MagicPredicate, beta: str):
        bound_terms = tuple(t for t, a in zip(rule.head.args, beta) if a == "b")
        magic_atom = Atom(m, bound_terms)
        ordered = reorder(rule.body, bound_terms)
        emit(Rule(rule.head, (magic_atom,) + ordered))
        bound = vars_of(bound_terms)
        for i, b in enumerate(ordered):
            if b.is_equality or b.predicate in head_preds:
                raw = adorn(b, bound)
                if b.is_equality:
                    if raw == "ff":
                        raise NoAdmissibleOrdering(
                            "equality atom %r with no bound side" % (b,)
                        )
                    # One demand per bound side. A fully bound equality is a
                    # check; demanding each side's class separately lets every
                    # equality step that touches either class fire, and merge
                    # rewriting of the demand facts carries the interest along
                    # a proof chain. A two-sided demand predicate would need
                    # symmetry and transitivity rules as demand sources, which
                    # no admissible ordering can accommodate.
                    sub = MagicPredicate(EQUALITY, "eqb")
                    demands = [
                        (t,) for t, a in zip(b.args, raw) if a == "b"
                    ]
                else:
                    sub = MagicPredicate(b.predicate, raw)
                    demands = [tuple(t for t, a in zip(b.args, raw) if a == "b")]
                for args in demands:
                    emit(Rule(Atom(sub, args), (magic_atom,) + ordered[:i]))
                if sub not in queued:
                    queued.add(sub)
                    work.append(sub)
            bound |= vars_of(b)

    while work:
        m = work.popleft()
        betas = ("bf", "fb") if m.adornment == "eqb" else (m.adornment,)
        for rule in by_head.get(m.base, ()):
            for beta in betas:
                process(rule, m, beta)

    return Program(tuple(out), program.query)
