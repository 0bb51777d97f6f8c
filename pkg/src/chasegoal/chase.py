"""Fixpoint evaluation.

`chase` runs the representative-based chase for programs whose bodies are
function-, constant- and equality-free (what the pipeline produces): equality
heads merge union-find classes, the class representative is the term-order
minimum, and facts holding a losing term at an argument position are
rewritten in place.  `naive_fixpoint` evaluates arbitrary logic programs with
explicit equality atoms and serves as the reference semantics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Optional

from .kernel import (
    Atom,
    Constant,
    Instance,
    Predicate,
    Program,
    Rule,
    Term,
    Variable,
    enumerate_matches,
    eq,
    is_ground,
    iter_subterms,
    match_atom,
    occurs_in,
    substitute,
    map_shallow,
    term_depth,
    term_key,
    vars_of,
)

# ---------------------------------------------------------------------------
# Limits and errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Limits:
    max_depth: int = 20
    max_facts: int = 10_000_000


class ChaseError(RuntimeError):
    pass


class DepthLimitExceeded(ChaseError):
    pass


class FactLimitExceeded(ChaseError):
    pass


class BodyContractViolation(ChaseError):
    pass


def _guard_fact(fact: Atom, n_facts: int, limits: Limits):
    for t in fact.args:
        if term_depth(t) > limits.max_depth:
            raise DepthLimitExceeded(
                "term depth exceeds %d in %r" % (limits.max_depth, fact)
            )
    if n_facts > limits.max_facts:
        raise FactLimitExceeded("more than %d facts" % limits.max_facts)


# ---------------------------------------------------------------------------
# Union-find over ground terms
# ---------------------------------------------------------------------------


class UnionFind:
    """Union-find whose class representative is the term-order minimum."""

    def __init__(self):
        self.parent: dict[Term, Term] = {}

    def find(self, t: Term) -> Term:
        parent = self.parent
        root = t
        while root in parent:
            root = parent[root]
        while t is not root:
            nxt = parent.get(t)
            if nxt is None:
                break
            parent[t] = root
            t = nxt
        return root

    def union(self, s: Term, t: Term) -> "tuple[Term, Term] | None":
        """Merge the classes of s and t; returns (representative, loser)
        roots, or None if they were already the same class."""
        rs, rt = self.find(s), self.find(t)
        if rs == rt:
            return None
        if term_key(rs) <= term_key(rt):
            rep, loser = rs, rt
        else:
            rep, loser = rt, rs
        self.parent[loser] = rep
        return rep, loser

    def as_map(self) -> "dict[Term, Term]":
        return {t: self.find(t) for t in list(self.parent)}


# ---------------------------------------------------------------------------
# Chase
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChaseStats:
    derived_facts: int
    merges: int
    rule_applications: int
    iterations: int


@dataclass(frozen=True)
class ChaseResult:
    instance: Instance
    mu: "dict[Term, Term]"
    classes: "dict[Term, frozenset[Term]]"
    stats: ChaseStats
    derived: "tuple[Atom, ...]" = ()


def _check_chase_contract(program: Program):
    for r in program.rules:
        body_vars = vars_of(r.body)
        if vars_of(r.head) - body_vars:
            raise BodyContractViolation("unbound head variable in %r" % (r,))
        for a in r.body:
            if a.is_equality:
                raise BodyContractViolation("equality atom in body of %r" % (r,))
            for t in a.args:
                if not isinstance(t, Variable):
                    raise BodyContractViolation(
                        "non-variable body argument %r in %r" % (t, r)
                    )


class _ChaseState:
    def __init__(self, limits: Limits):
        self.instance = Instance()
        self.uf = UnionFind()
        self.limits = limits
        self.delta: set[Atom] = set()
        self.derived: list[Atom] = []
        self.merges = 0
        self.insertions = 0
        self.epoch = 0
        self.losers: set[Term] = set()

    def is_stale(self, term: Term) -> bool:
        return any(s in self.losers for s in iter_subterms(term))

    def insert(self, fact: Atom, count: bool) -> bool:
        if not self.instance.add(fact):
            return False
        _guard_fact(fact, len(self.instance), self.limits)
        self.delta.add(fact)
        if count:
            self.insertions += 1
            self.derived.append(fact)
        return True

    def merge(self, s: Term, t: Term, count: bool):
        merged = self.uf.union(s, t)
        if merged is None:
            return
        rep, loser = merged
        if count:
            self.merges += 1
            self.derived.append(eq(s, t))
        self.epoch += 1
        self.losers.add(loser)
        # Rewrite every fact holding the losing term at an argument position.
        # A fact that still mentions the loser below a function symbol after
        # the rewrite is dropped instead: its body facts were rewritten too,
        # re-enter the delta, and re-derive the normalized form.  Keeping it
        # would make the instance depend on the order rules fired in.
        mu = {loser: rep}
        for fact in list(self.instance.containing(loser)):
            self.instance.discard(fact)
            new = map_shallow(mu, fact)
            if any(occurs_in(loser, a) for a in new.args):
                continue
            if self.instance.add(new):
                self.delta.add(new)

    def apply_head(self, head: Atom, count: bool = True):
        args = tuple(self.uf.find(t) for t in head.args)
        if head.is_equality:
            s, t = args
            if s != t:
                self.merge(s, t, count)
            return
        self.insert(Atom(head.predicate, args), count)


def chase(
    program: Program,
    base: "Instance | Iterable[Atom]",
    limits: Limits = Limits(),
    seed: Optional[int] = None,
) -> ChaseResult:
    """Run the representative-based chase of `program` over `base`.

    Base facts may contain equality atoms (their classes are merged up
    front) and are not counted as derived.  The `seed` only shuffles the
    evaluation order; the resulting instance and term map are the same for
    every seed.
    """
    _check_chase_contract(program)
    state = _ChaseState(limits)
    rng = random.Random(seed) if seed is not None else None

    for fact in base:
        if not is_ground(fact):
            raise BodyContractViolation("non-ground base fact %r" % (fact,))
        state.apply_head(fact, count=False)

    rules = []
    for r in program.rules:
        if not r.body:
            state.apply_head(r.head)
            continue
        pivots = [
            (a, r.body[:i] + r.body[i + 1 :]) for i, a in enumerate(r.body)
        ]
        rules.append((r, pivots))

    applications = 0
    rounds = 0
    while state.delta:
        rounds += 1
        delta = list(state.delta)
        state.delta = set()
        if rng is not None:
            rng.shuffle(delta)
        by_pred: dict = {}
        for fact in delta:
            by_pred.setdefault(fact.predicate, []).append(fact)
        order = list(rules)
        if rng is not None:
            rng.shuffle(order)
        for rule, pivots in order:
            firings: list[dict] = []
            for pivot, rest in pivots:
                for fact in by_pred.get(pivot.predicate, ()):
                    # A fact rewritten away by a merge is stale; its
                    # normalized form re-entered the delta on its own.
                    if fact not in state.instance:
                        continue
                    sigma0 = match_atom(pivot, fact)
                    if sigma0 is None:
                        continue
                    firings.extend(enumerate_matches(rest, state.instance, sigma0))
            epoch0 = state.epoch
            head_is_eq = rule.head.is_equality
            for sigma in firings:
                if state.epoch != epoch0:
                    # Merges landed while this batch was being applied, so
                    # the facts this match was built from may be gone.
                    if head_is_eq:
                        # The equality was entailed when the body matched and
                        # entailed equalities only grow, so merging the
                        # normalized sides now is sound.  Skip only a side
                        # that still mentions a merged-away term; the rewritten
                        # body facts re-enter the delta and re-derive it.
                        s, t = (
                            state.uf.find(v)
                            for v in substitute(sigma, rule.head).args
                        )
                        if state.is_stale(s) or state.is_stale(t):
                            continue
                        applications += 1
                        if s != t:
                            state.merge(s, t, True)
                        continue
                    # Relational head: fire only if the premise still holds;
                    # rewritten facts re-enter the delta and re-match later.
                    if any(
                        substitute(sigma, a) not in state.instance
                        for a in rule.body
                    ):
                        continue
                applications += 1
                state.apply_head(substitute(sigma, rule.head))

    mu = state.uf.as_map()
    classes: dict[Term, set[Term]] = {}
    for t, rep in mu.items():
        classes.setdefault(rep, {rep}).add(t)
    stats = ChaseStats(
        derived_facts=state.insertions + state.merges,
        merges=state.merges,
        rule_applications=applications,
        iterations=rounds,
    )
    return ChaseResult(
        instance=state.instance,
        mu=mu,
        classes={rep: frozenset(members) for rep, members in classes.items()},
        stats=stats,
        derived=tuple(state.derived),
    )


# ---------------------------------------------------------------------------
# Naive fixpoint (reference semantics)
# ---------------------------------------------------------------------------


def naive_fixpoint(
    program: "Program | Iterable[Rule]",
    base: "Instance | Iterable[Atom]",
    limits: Limits = Limits(),
) -> Instance:
    """Least fixpoint of a logic program where equality atoms are ordinary
    facts.  Bodies may contain constants, function terms and equality atoms;
    no representative merging happens here."""
    rules = tuple(program.rules if isinstance(program, Program) else program)
    for r in rules:
        if vars_of(r.head) - vars_of(r.body):
            raise BodyContractViolation("unbound head variable in %r" % (r,))

    instance = Instance()
    delta: set[Atom] = set()

    def insert(fact: Atom):
        if instance.add(fact):
            _guard_fact(fact, len(instance), limits)
            delta.add(fact)

    for fact in base:
        insert(fact)
    for r in rules:
        if not r.body:
            insert(r.head)

    body_rules = [
        (r, [(a, r.body[:i] + r.body[i + 1 :]) for i, a in enumerate(r.body)])
        for r in rules
        if r.body
    ]
    while delta:
        current = list(delta)
        delta = set()
        by_pred: dict = {}
        for fact in current:
            by_pred.setdefault(fact.predicate, []).append(fact)
        new_facts: list[Atom] = []
        for rule, pivots in body_rules:
            for pivot, rest in pivots:
                for fact in by_pred.get(pivot.predicate, ()):
                    sigma0 = match_atom(pivot, fact)
                    if sigma0 is None:
                        continue
                    for sigma in enumerate_matches(rest, instance, sigma0):
                        new_facts.append(substitute(sigma, rule.head))
        for fact in new_facts:
            insert(fact)
    return instance


# ---------------------------------------------------------------------------
# Answers
# ---------------------------------------------------------------------------


def constant_answers(instance: Instance, query: Predicate) -> "set[tuple[Constant, ...]]":
    """Query facts whose arguments are all constants."""
    out = set()
    for fact in instance.with_predicate(query):
        if all(isinstance(t, Constant) for t in fact.args):
            out.add(fact.args)
    return out


def extract_answers(result: ChaseResult, query: Predicate) -> "set[tuple[Constant, ...]]":
    """All constant tuples equivalent to some query fact of the chase:
    the product of the constant members of each argument's class."""
    answers: set[tuple[Constant, ...]] = set()
    for fact in result.instance.with_predicate(query):
        options = []
        for t in fact.args:
            members = result.classes.get(t, frozenset((t,)))
            constants = [m for m in members if isinstance(m, Constant)]
            if not constants:
                break
            options.append(constants)
        else:
            answers.update(product(*options))
    return answers
