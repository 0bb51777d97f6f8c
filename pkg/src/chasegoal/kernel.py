"""Terms, atoms, rules and indexed fact stores shared by every pipeline stage."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str

    def __repr__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class Constant:
    name: str
    # The sort tag is annotation only: two constants with the same name denote
    # the same object whether or not a schema assigned them a sort.
    sort: Optional[str] = field(default=None, compare=False)

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Functional:
    symbol: str
    args: "tuple[Term, ...]"

    # Terms are hashed constantly by the fact indexes; the generated dataclass
    # hash would recompute the recursive tuple hash on every probe.
    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.symbol, self.args))
            object.__setattr__(self, "_h", h)
        return h

    def __repr__(self) -> str:
        return "%s(%s)" % (self.symbol, ",".join(map(repr, self.args)))


Term = Union[Variable, Constant, Functional]


def term_depth(t: Term) -> int:
    if isinstance(t, Functional):
        return 1 + max((term_depth(a) for a in t.args), default=0)
    return 0


def is_ground(x: "Term | Atom") -> bool:
    if isinstance(x, Variable):
        return False
    if isinstance(x, Constant):
        return True
    if isinstance(x, Functional):
        return all(is_ground(a) for a in x.args)
    return all(is_ground(a) for a in x.args)


def iter_vars(x) -> Iterator[Variable]:
    """Left-to-right variable occurrences of a term, atom or atom sequence."""
    if isinstance(x, Variable):
        yield x
    elif isinstance(x, Constant):
        return
    elif isinstance(x, (Functional, Atom)):
        for a in x.args:
            yield from iter_vars(a)
    else:
        for item in x:
            yield from iter_vars(item)


def vars_of(x) -> "set[Variable]":
    return set(iter_vars(x))


def iter_subterms(t: Term) -> Iterator[Term]:
    """The term itself and every term nested below it, outside in."""
    yield t
    if isinstance(t, Functional):
        for a in t.args:
            yield from iter_subterms(a)


def occurs_in(needle: Term, hay: Term) -> bool:
    if needle == hay:
        return True
    if isinstance(hay, Functional):
        return any(occurs_in(needle, a) for a in hay.args)
    return False


# Total order on terms: shallower terms first, then constants before
# functional terms, then names (and argument keys, recursively).  Variables
# sort after ground terms of the same depth so that class representatives
# picked by this order are always constants when a constant is available.

_KIND_CONSTANT = 0
_KIND_FUNCTIONAL = 1
_KIND_VARIABLE = 2


def term_key(t: Term):
    if isinstance(t, Constant):
        return (0, _KIND_CONSTANT, t.name, ())
    if isinstance(t, Variable):
        return (0, _KIND_VARIABLE, t.name, ())
    return (
        term_depth(t),
        _KIND_FUNCTIONAL,
        t.symbol,
        tuple(term_key(a) for a in t.args),
    )


def compare_terms(t1: Term, t2: Term) -> int:
    k1, k2 = term_key(t1), term_key(t2)
    if k1 < k2:
        return -1
    if k1 > k2:
        return 1
    return 0


# ---------------------------------------------------------------------------
# Predicates and atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Predicate:
    """Ordinary relation symbol."""

    name: str
    arity: int


@dataclass(frozen=True)
class _EqualityPredicate:
    arity: int = field(default=2, init=False)

    def __repr__(self) -> str:
        return "<eq>"


EQUALITY = _EqualityPredicate()


@dataclass(frozen=True)
class MagicPredicate:
    """m_R^a. The adornment is a word over {b,f}; for the equality base only
    the one-sided word "eqb" occurs (bf, fb and the two halves of bb all
    collapse into it)."""

    base: "PredicateId"
    adornment: str

    @property
    def arity(self) -> int:
        return self.adornment.count("b")


@dataclass(frozen=True)
class FunPredicate:
    """Graph predicate of a function symbol (or of a constant, arity 1)
    introduced by defunctionalization."""

    symbol: str
    arity: int
    of_constant: bool = False


PredicateId = Union[Predicate, _EqualityPredicate, MagicPredicate, FunPredicate]


@dataclass(frozen=True)
class Atom:
    predicate: PredicateId
    args: "tuple[Term, ...]"

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.predicate, self.args))
            object.__setattr__(self, "_h", h)
        return h

    @property
    def is_equality(self) -> bool:
        return isinstance(self.predicate, _EqualityPredicate)

    def __repr__(self) -> str:
        if self.is_equality:
            return "%r = %r" % self.args
        return "%s(%s)" % (pred_label(self.predicate), ",".join(map(repr, self.args)))


def eq(t1: Term, t2: Term) -> Atom:
    return Atom(EQUALITY, (t1, t2))


def pred_label(p: PredicateId) -> str:
    if isinstance(p, Predicate):
        return p.name
    if isinstance(p, _EqualityPredicate):
        return "eq"
    if isinstance(p, MagicPredicate):
        return "m_%s#%s" % (pred_label(p.base), p.adornment)
    if isinstance(p, FunPredicate):
        return ("con_%s" if p.of_constant else "fun_%s") % p.symbol
    raise TypeError("not a predicate: %r" % (p,))


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """Logic-program rule head <- body (the head may be an equality atom)."""

    head: Atom
    body: "tuple[Atom, ...]"

    def __repr__(self) -> str:
        if not self.body:
            return "%r." % (self.head,)
        return "%r :- %s." % (self.head, ", ".join(map(repr, self.body)))


@dataclass(frozen=True)
class Program:
    rules: "tuple[Rule, ...]"
    query: Optional[Predicate] = None


@dataclass(frozen=True)
class TGD:
    """body -> exists y. head-conjunction; the existential variables are the
    head variables that do not occur in the body."""

    body: "tuple[Atom, ...]"
    head: "tuple[Atom, ...]"

    @property
    def existential_vars(self) -> "frozenset[Variable]":
        return frozenset(vars_of(self.head) - vars_of(self.body))


@dataclass(frozen=True)
class EGD:
    body: "tuple[Atom, ...]"
    lhs: Term
    rhs: Term


ExistentialRule = Union[TGD, EGD]


def rule_atoms(r) -> Iterator[Atom]:
    """All atoms of a rule of any shape, head first."""
    if isinstance(r, Rule):
        yield r.head
        yield from r.body
    elif isinstance(r, TGD):
        yield from r.head
        yield from r.body
    elif isinstance(r, EGD):
        yield eq(r.lhs, r.rhs)
        yield from r.body
    else:
        raise TypeError("not a rule: %r" % (r,))


def program_predicates(rules: Iterable) -> "set[PredicateId]":
    preds: set[PredicateId] = set()
    for r in rules:
        for a in rule_atoms(r):
            preds.add(a.predicate)
    return preds


# ---------------------------------------------------------------------------
# Substitutions and shallow term maps
# ---------------------------------------------------------------------------

Substitution = "dict[Variable, Term]"
TermMap = "dict[Term, Term]"


def substitute(sigma: "dict[Variable, Term]", x):
    """Apply a variable substitution to a term or atom, at any depth."""
    if isinstance(x, Variable):
        return sigma.get(x, x)
    if isinstance(x, Constant):
        return x
    if isinstance(x, Functional):
        return Functional(x.symbol, tuple(substitute(sigma, a) for a in x.args))
    if isinstance(x, Atom):
        return Atom(x.predicate, tuple(substitute(sigma, a) for a in x.args))
    raise TypeError("cannot substitute into %r" % (x,))


def map_shallow(mu: "dict[Term, Term]", x):
    """Apply a ground term map to the occurrences that are not nested inside
    a function symbol: the atom's argument positions (or the term itself)."""
    if isinstance(x, Atom):
        return Atom(x.predicate, tuple(mu.get(a, a) for a in x.args))
    return mu.get(x, x)


FRESH_PREFIX = "_"


class FreshVars:
    """Monotone source of variable names the parsers refuse to accept, so
    generated variables can never collide with parsed ones."""

    def __init__(self, tag: str = "v"):
        self._tag = tag
        self._n = itertools.count(1)

    def __call__(self) -> Variable:
        return Variable("%s%s%d" % (FRESH_PREFIX, self._tag, next(self._n)))


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

_EMPTY: "frozenset[Atom]" = frozenset()


class Instance:
    """Mutable set of ground atoms with hash indexes by predicate, by
    (predicate, position, term) and by term occurrence.

    Single writer: the sets returned by the lookup methods are live views
    and must be copied before mutating the instance while iterating them.
    """

    def __init__(self, facts: Iterable[Atom] = ()):
        self._facts: set[Atom] = set()
        self._by_pred: dict[PredicateId, set[Atom]] = {}
        self._by_pos: dict[tuple, set[Atom]] = {}
        self._by_term: dict[Term, set[Atom]] = {}
        for f in facts:
            self.add(f)

    def add(self, fact: Atom) -> bool:
        if fact in self._facts:
            return False
        self._facts.add(fact)
        self._by_pred.setdefault(fact.predicate, set()).add(fact)
        for i, t in enumerate(fact.args):
            self._by_pos.setdefault((fact.predicate, i, t), set()).add(fact)
            for s in iter_subterms(t):
                self._by_term.setdefault(s, set()).add(fact)
        return True

    def discard(self, fact: Atom) -> bool:
        if fact not in self._facts:
            return False
        self._facts.discard(fact)
        self._by_pred[fact.predicate].discard(fact)
        for i, t in enumerate(fact.args):
            self._by_pos[(fact.predicate, i, t)].discard(fact)
            for sub in iter_subterms(t):
                s = self._by_term.get(sub)
                if s is not None:
                    s.discard(fact)
                    if not s:
                        del self._by_term[sub]
        return True

    def __contains__(self, fact: Atom) -> bool:
        return fact in self._facts

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._facts)

    def __len__(self) -> int:
        return len(self._facts)

    def with_predicate(self, pred: PredicateId) -> "set[Atom]":
        return self._by_pred.get(pred, _EMPTY)

    def with_term_at(self, pred: PredicateId, pos: int, term: Term) -> "set[Atom]":
        return self._by_pos.get((pred, pos, term), _EMPTY)

    def containing(self, term: Term) -> "set[Atom]":
        return self._by_term.get(term, _EMPTY)

    def terms(self) -> Iterator[Term]:
        return iter(self._by_term)

    def predicates(self) -> "set[PredicateId]":
        return {p for p, s in self._by_pred.items() if s}

    def copy(self) -> "Instance":
        return Instance(self._facts)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def match_term(pattern: Term, ground: Term, out: "dict[Variable, Term]") -> bool:
    """One-way structural match of a pattern term against a ground term,
    extending `out` in place."""
    if isinstance(pattern, Variable):
        bound = out.get(pattern)
        if bound is None:
            out[pattern] = ground
            return True
        return bound == ground
    if isinstance(pattern, Constant):
        return pattern == ground
    return (
        isinstance(ground, Functional)
        and pattern.symbol == ground.symbol
        and len(pattern.args) == len(ground.args)
        and all(match_term(p, g, out) for p, g in zip(pattern.args, ground.args))
    )


def match_atom(pattern: Atom, fact: Atom, sigma=None) -> "dict[Variable, Term] | None":
    if pattern.predicate != fact.predicate or len(pattern.args) != len(fact.args):
        return None
    out = dict(sigma) if sigma else {}
    for p, g in zip(pattern.args, fact.args):
        if not match_term(p, g, out):
            return None
    return out


def _candidates(atom: Atom, instance: Instance, sigma) -> "set[Atom]":
    # Prefer the most selective index: the first argument that is ground
    # under the current bindings.
    for i, arg in enumerate(atom.args):
        t = substitute(sigma, arg)
        if is_ground(t):
            return instance.with_term_at(atom.predicate, i, t)
    return instance.with_predicate(atom.predicate)


def enumerate_matches(body, instance: Instance, bindings=None) -> Iterator["dict[Variable, Term]"]:
    """Substitutions that extend `bindings` and match every body atom against
    the instance.  Atoms are joined left to right through the indexes."""
    body = tuple(body)

    def walk(k: int, sigma):
        if k == len(body):
            yield dict(sigma)
            return
        atom = body[k]
        for fact in _candidates(atom, instance, sigma):
            ext = match_atom(atom, fact, sigma)
            if ext is not None:
                yield from walk(k + 1, ext)

    yield from walk(0, dict(bindings) if bindings else {})
