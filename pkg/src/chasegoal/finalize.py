"""Final rewrites before the chase: defunctionalization replaces function
terms and constants in rule bodies with variables constrained by graph
predicates, desingularization folds the remaining body equalities away.
After both, rule bodies contain nothing but variables."""

from __future__ import annotations

import itertools

from .kernel import (
    Atom,
    Constant,
    FunPredicate,
    Functional,
    Program,
    Rule,
    Term,
    Variable,
    rule_atoms,
    substitute,
    vars_of,
)


class NonVariableEqualityBody(ValueError):
    pass


# ---------------------------------------------------------------------------
# Defunctionalization
# ---------------------------------------------------------------------------


def _head_functionals(atom: Atom):
    """Functional subterms of a head atom, innermost first, deduplicated."""
    seen = []

    def walk(t: Term):
        if isinstance(t, Functional):
            for a in t.args:
                walk(a)
            if t not in seen:
                seen.append(t)

    for t in atom.args:
        walk(t)
    return seen


def defunctionalize(program: Program) -> Program:
    """Replace body occurrences of constants and function terms by fresh
    variables bound through graph atoms (con_c(z), fun_f(args,z)) placed
    right before the atom that contained the occurrence, innermost term
    first.  For every function symbol that occurred in some body, each rule
    with that symbol in its head additionally yields a companion rule
    deriving the graph fact fun_f(args, f(args)).  One fact rule con_c(c)
    per constant closes the construction."""
    body_symbols: set[str] = set()
    fact_rules: dict[str, Rule] = {}
    rewritten: list[Rule] = []

    for rule in program.rules:
        taken = {v.name for v in vars_of(rule_atoms(rule))}
        counter = itertools.count(1)

        def fresh() -> Variable:
            while True:
                name = "z#%d" % next(counter)
                if name not in taken:
                    taken.add(name)
                    return Variable(name)

        mapping: dict[Term, Variable] = {}
        new_body: list[Atom] = []
        for atom in rule.body:
            graph_atoms: list[Atom] = []

            def rewrite(t: Term) -> Term:
                if isinstance(t, Variable):
                    return t
                if isinstance(t, Constant):
                    z = mapping.get(t)
                    if z is None:
                        z = fresh()
                        mapping[t] = z
                        graph_atoms.append(
                            Atom(FunPredicate(t.name, 1, of_constant=True), (z,))
                        )
                        fact_rules.setdefault(
                            t.name,
                            Rule(Atom(FunPredicate(t.name, 1, of_constant=True), (t,)), ()),
                        )
                    return z
                args = tuple(rewrite(a) for a in t.args)
                inner = Functional(t.symbol, args)
                z = mapping.get(inner)
                if z is None:
                    z = fresh()
                    mapping[inner] = z
                    body_symbols.add(t.symbol)
                    graph_atoms.append(
                        Atom(FunPredicate(t.symbol, len(args) + 1), args + (z,))
                    )
                return z

            new_args = tuple(rewrite(t) for t in atom.args)
            new_body.extend(graph_atoms)
            new_body.append(Atom(atom.predicate, new_args))
        rewritten.append(Rule(rule.head, tuple(new_body)))

    out: list[Rule] = []
    seen: set[Rule] = set()
    for rule in rewritten:
        out.append(rule)
        for t in _head_functionals(rule.head):
            if t.symbol not in body_symbols:
                continue
            companion = Rule(
                Atom(FunPredicate(t.symbol, len(t.args) + 1), t.args + (t,)),
                rule.body,
            )
            if companion not in seen:
                seen.add(companion)
                out.append(companion)
    for name in sorted(fact_rules):
        out.append(fact_rules[name])
    return Program(tuple(out), program.query)


# ---------------------------------------------------------------------------
# Desingularization
# ---------------------------------------------------------------------------


def desingularize(program: Program) -> Program:
    """Remove every body equality ?x = t by substituting t for ?x in the
    whole rule, then drop duplicate body atoms.  Equality atoms whose left
    side is not a variable cannot be folded."""
    out = []
    for rule in program.rules:
        head, body = rule.head, list(rule.body)
        while True:
            idx = next((i for i, a in enumerate(body) if a.is_equality), None)
            if idx is None:
                break
            lhs, rhs = body[idx].args
            if not isinstance(lhs, Variable):
                raise NonVariableEqualityBody(
                    "left side of %r is not a variable in %r" % (body[idx], rule)
                )
            del body[idx]
            sub = {lhs: rhs}
            head = substitute(sub, head)
            body = [substitute(sub, a) for a in body]
        deduped: list[Atom] = []
        for a in body:
            if a not in deduped:
                deduped.append(a)
        out.append(Rule(head, tuple(deduped)))
    return Program(tuple(out), program.query)
