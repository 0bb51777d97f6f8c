"""Parsing and serialization: existential rule files, logic-program dumps,
CSV base instances and schema sidecars.

Both rule grammars are line based.  A `#` starts a comment when it opens the
line or follows whitespace; inside a token (magic predicate names such as
`m_R#bf`, generated variables such as `?z#1`) it is part of the token.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .kernel import (
    EGD,
    EQUALITY,
    Atom,
    Constant,
    ExistentialRule,
    FRESH_PREFIX,
    FunPredicate,
    Functional,
    Instance,
    MagicPredicate,
    Predicate,
    PredicateId,
    Program,
    Rule,
    TGD,
    Term,
    Variable,
    eq,
    vars_of,
)

# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class FrontendError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0, source: str = ""):
        self.line, self.col, self.source = line, col, source
        where = ""
        if source:
            where += source
        if line:
            where += ":%d" % line
            if col:
                where += ":%d" % col
        super().__init__("%s%s%s" % (where, ": " if where else "", msg))


class MalformedRule(FrontendError):
    pass


class ArityMismatch(FrontendError):
    pass


class UnknownPredicate(FrontendError):
    pass


class UnboundFrontierVariable(FrontendError):
    pass


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<IMPL>:-)
  | (?P<ARROW>->)
  | (?P<VAR>\?[A-Za-z0-9_][A-Za-z0-9_'\#]*)
  | (?P<NAME>[A-Za-z0-9_][A-Za-z0-9_']*(?:\#[A-Za-z]+)?)
  | (?P<QUOTED>'(?:[^']|'')*')
  | (?P<LP>\()
  | (?P<RP>\))
  | (?P<COMMA>,)
  | (?P<EQ>=)
  | (?P<DOT>\.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == "'":
            in_quote = not in_quote
        elif ch == "#" and not in_quote and (i == 0 or line[i - 1] in " \t"):
            return line[:i]
    return line


def _tokenize(line: str, lineno: int, source: str) -> "list[_Token]":
    out = []
    pos = 0
    text = _strip_comment(line).rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MalformedRule(
                "unexpected character %r" % text[pos], lineno, pos + 1, source
            )
        kind = m.lastgroup
        if kind != "WS":
            out.append(_Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    return out


class _Cursor:
    def __init__(self, tokens: "list[_Token]", lineno: int, source: str):
        self.toks = tokens
        self.i = 0
        self.line = lineno
        self.source = source

    def peek(self) -> Optional[_Token]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> Optional[_Token]:
        t = self.peek()
        if t is not None:
            self.i += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.next()
        if t is None or t.kind != kind:
            raise MalformedRule(
                "expected %s, found %s" % (kind, t.text if t else "end of rule"),
                self.line,
                t.col if t else 0,
                self.source,
            )
        return t

    def fail(self, msg: str):
        t = self.peek()
        raise MalformedRule(msg, self.line, t.col if t else 0, self.source)


def _unquote(text: str) -> str:
    return text[1:-1].replace("''", "'")


# ---------------------------------------------------------------------------
# Term and atom parsing
# ---------------------------------------------------------------------------


def _parse_term(cur: _Cursor, functions: bool, fresh_ok: bool) -> Term:
    t = cur.next()
    if t is None:
        cur.fail("expected a term")
    if t.kind == "VAR":
        name = t.text[1:]
        if not fresh_ok and name.startswith(FRESH_PREFIX):
            raise MalformedRule(
                "variable name %s uses the reserved prefix %r" % (t.text, FRESH_PREFIX),
                cur.line,
                t.col,
                cur.source,
            )
        if not fresh_ok and "#" in name:
            raise MalformedRule(
                "variable name %s uses the reserved character '#'" % t.text,
                cur.line,
                t.col,
                cur.source,
            )
        return Variable(name)
    if t.kind == "QUOTED":
        return Constant(_unquote(t.text))
    if t.kind == "NAME":
        if not functions and "#" in t.text:
            raise MalformedRule(
                "'#' is not allowed in constants", cur.line, t.col, cur.source
            )
        nxt = cur.peek()
        if nxt is not None and nxt.kind == "LP":
            if not functions:
                raise MalformedRule(
                    "function terms are not allowed in input rules",
                    cur.line,
                    t.col,
                    cur.source,
                )
            cur.expect("LP")
            args = [_parse_term(cur, functions, fresh_ok)]
            while cur.peek() is not None and cur.peek().kind == "COMMA":
                cur.next()
                args.append(_parse_term(cur, functions, fresh_ok))
            cur.expect("RP")
            return Functional(t.text, tuple(args))
        return Constant(t.text)
    raise MalformedRule("expected a term, found %r" % t.text, cur.line, t.col, cur.source)


def _decode_predicate(name: str, arity: int, cur: _Cursor, col: int) -> PredicateId:
    if name.startswith("m_") and "#" in name:
        base_label, adornment = name[2:].rsplit("#", 1)
        if base_label == "eq":
            base: PredicateId = EQUALITY
            ok = adornment in ("bb", "eqb")
        else:
            base = Predicate(base_label, len(adornment))
            ok = adornment != "" and set(adornment) <= {"b", "f"}
        if not ok or arity != adornment.count("b"):
            raise MalformedRule(
                "malformed magic predicate %s/%d" % (name, arity), cur.line, col, cur.source
            )
        return MagicPredicate(base, adornment)
    if "#" in name:
        raise MalformedRule(
            "'#' is only allowed in magic predicate names: %s" % name,
            cur.line,
            col,
            cur.source,
        )
    if name.startswith("fun_"):
        return FunPredicate(name[4:], arity)
    if name.startswith("con_"):
        if arity != 1:
            raise MalformedRule(
                "constant graph predicate %s must be unary" % name, cur.line, col, cur.source
            )
        return FunPredicate(name[4:], 1, of_constant=True)
    return Predicate(name, arity)


def _parse_atom(cur: _Cursor, functions: bool, decode: bool, fresh_ok: bool) -> Atom:
    t = cur.peek()
    if t is None:
        cur.fail("expected an atom")
    if t.kind == "NAME" and cur.i + 1 < len(cur.toks) and cur.toks[cur.i + 1].kind == "LP":
        cur.next()
        cur.expect("LP")
        args = [_parse_term(cur, functions, fresh_ok)]
        while cur.peek() is not None and cur.peek().kind == "COMMA":
            cur.next()
            args.append(_parse_term(cur, functions, fresh_ok))
        cur.expect("RP")
        pred = (
            _decode_predicate(t.text, len(args), cur, t.col)
            if decode
            else Predicate(t.text, len(args))
        )
        if not decode and "#" in t.text:
            raise MalformedRule(
                "'#' is not allowed in predicate names", cur.line, t.col, cur.source
            )
        return Atom(pred, tuple(args))
    # Either a nullary atom or an equality s = t.
    if t.kind == "NAME" and (
        cur.i + 1 >= len(cur.toks) or cur.toks[cur.i + 1].kind in ("COMMA", "ARROW", "IMPL", "DOT")
    ):
        cur.next()
        if not decode and "#" in t.text:
            raise MalformedRule(
                "'#' is not allowed in predicate names", cur.line, t.col, cur.source
            )
        pred = _decode_predicate(t.text, 0, cur, t.col) if decode else Predicate(t.text, 0)
        return Atom(pred, ())
    lhs = _parse_term(cur, functions, fresh_ok)
    cur.expect("EQ")
    rhs = _parse_term(cur, functions, fresh_ok)
    return eq(lhs, rhs)


def _parse_atom_list(cur: _Cursor, functions: bool, decode: bool, fresh_ok: bool) -> "list[Atom]":
    atoms = [_parse_atom(cur, functions, decode, fresh_ok)]
    while cur.peek() is not None and cur.peek().kind == "COMMA":
        cur.next()
        atoms.append(_parse_atom(cur, functions, decode, fresh_ok))
    return atoms


# ---------------------------------------------------------------------------
# Existential rule files
# ---------------------------------------------------------------------------


def parse_rules(text: str, source: str = "<rules>") -> "list[ExistentialRule]":
    """Parse existential rules, one per line: `body -> head`.

    Head atoms are relational (a TGD, head variables missing from the body
    are existential) or a single equality `?x = ?y` / `?x = c` (an EGD).
    Input rules are function free; body equality atoms are accepted so that
    stage dumps can be read back.
    """
    rules: list[ExistentialRule] = []
    arities: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw, lineno, source)
        if not toks:
            continue
        cur = _Cursor(toks, lineno, source)
        body = _parse_atom_list(cur, functions=False, decode=False, fresh_ok=False)
        cur.expect("ARROW")
        head = _parse_atom_list(cur, functions=False, decode=False, fresh_ok=False)
        if cur.peek() is not None and cur.peek().kind == "DOT":
            cur.next()
        if cur.peek() is not None:
            cur.fail("trailing input after rule")
        if not any(not a.is_equality for a in body):
            raise MalformedRule(
                "rule body needs at least one relational atom", lineno, 1, source
            )
        for a in body + head:
            if a.is_equality:
                continue
            seen = arities.get(a.predicate.name)
            if seen is not None and seen[0] != a.predicate.arity:
                raise ArityMismatch(
                    "predicate %s used with arity %d (arity %d at line %d)"
                    % (a.predicate.name, a.predicate.arity, seen[0], seen[1]),
                    lineno,
                    1,
                    source,
                )
            arities.setdefault(a.predicate.name, (a.predicate.arity, lineno))
        eq_heads = [a for a in head if a.is_equality]
        if eq_heads:
            if len(head) != 1:
                raise MalformedRule(
                    "an equality head must be the only head atom", lineno, 1, source
                )
            lhs, rhs = head[0].args
            body_vars = vars_of(body)
            for side in (lhs, rhs):
                if isinstance(side, Variable) and side not in body_vars:
                    raise UnboundFrontierVariable(
                        "equality head variable ?%s does not occur in the body" % side.name,
                        lineno,
                        1,
                        source,
                    )
            if not isinstance(lhs, Variable) and not isinstance(rhs, Variable):
                raise MalformedRule(
                    "at least one side of an equality head must be a variable",
                    lineno,
                    1,
                    source,
                )
            rules.append(EGD(tuple(body), lhs, rhs))
        else:
            rules.append(TGD(tuple(body), tuple(head)))
    return rules


# ---------------------------------------------------------------------------
# Logic program files
# ---------------------------------------------------------------------------


def parse_program(text: str, source: str = "<program>") -> Program:
    """Parse a logic program, one rule per line: `head :- body.` or `head.`.

    Predicate names are decoded: `m_R#bf` and `m_eq#eqb` are magic
    predicates, `fun_f` / `con_c` are function and constant graph
    predicates, everything else is ordinary.  Ordinary predicates that
    happen to start with one of these prefixes are not representable; the
    format is for pipeline dumps, whose generated names never clash.
    """
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw, lineno, source)
        if not toks:
            continue
        cur = _Cursor(toks, lineno, source)
        head = _parse_atom(cur, functions=True, decode=True, fresh_ok=True)
        body: list[Atom] = []
        nxt = cur.peek()
        if nxt is not None and nxt.kind == "IMPL":
            cur.next()
            body = _parse_atom_list(cur, functions=True, decode=True, fresh_ok=True)
        if cur.peek() is not None and cur.peek().kind == "DOT":
            cur.next()
        if cur.peek() is not None:
            cur.fail("trailing input after rule")
        rules.append(Rule(head, tuple(body)))
    return Program(tuple(rules))


# ---------------------------------------------------------------------------
# Base instances and schemas
# ---------------------------------------------------------------------------

Schema = "dict[tuple[str, int], tuple[str, ...]]"


def parse_schema(text: str, source: str = "<schema>") -> "dict[tuple[str, int], tuple[str, ...]]":
    """Parse sort declarations, one per line: `pred/arity: sort1, sort2`."""
    out: dict[tuple[str, int], tuple[str, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = re.fullmatch(r"(\w+)\s*/\s*(\d+)\s*:\s*(.*)", line)
        if m is None:
            raise MalformedRule("malformed schema line %r" % line, lineno, 1, source)
        name, arity = m.group(1), int(m.group(2))
        sorts = tuple(s.strip() for s in m.group(3).split(",")) if m.group(3).strip() else ()
        if len(sorts) != arity:
            raise ArityMismatch(
                "%s/%d declares %d sorts" % (name, arity, len(sorts)), lineno, 1, source
            )
        if (name, arity) in out:
            raise MalformedRule("duplicate schema line for %s/%d" % (name, arity), lineno, 1, source)
        out[(name, arity)] = sorts
    return out


def parse_instance(
    data_dir,
    signature: "dict[str, Predicate]",
    schema: "dict[tuple[str, int], tuple[str, ...]] | None" = None,
) -> Instance:
    """Read one headerless CSV file per predicate (file stem = predicate
    name) from a directory.  Sorts from the schema are attached to the
    constants as annotations."""
    instance = Instance()
    data_dir = Path(data_dir)
    for path in sorted(data_dir.glob("*.csv")):
        pred = signature.get(path.stem)
        if pred is None:
            raise UnknownPredicate(
                "file %s does not match any predicate of the rule set" % path.name,
                source=str(path),
            )
        sorts = (schema or {}).get((pred.name, pred.arity))
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row and pred.arity > 0:
                    continue
                if len(row) != pred.arity:
                    raise ArityMismatch(
                        "row has %d fields, %s has arity %d"
                        % (len(row), pred.name, pred.arity),
                        lineno,
                        1,
                        str(path),
                    )
                args = tuple(
                    Constant(cell, sorts[i] if sorts else None)
                    for i, cell in enumerate(row)
                )
                instance.add(Atom(pred, args))
    return instance


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_BARE_RE = re.compile(r"[A-Za-z0-9_]+")


def _render_term(t: Term) -> str:
    if isinstance(t, Variable):
        return "?" + t.name
    if isinstance(t, Constant):
        if _BARE_RE.fullmatch(t.name):
            return t.name
        return "'%s'" % t.name.replace("'", "''")
    return "%s(%s)" % (t.symbol, ",".join(_render_term(a) for a in t.args))


def _render_pred(p: PredicateId) -> str:
    if isinstance(p, Predicate):
        return p.name
    if p is EQUALITY or isinstance(p, type(EQUALITY)):
        return "eq"
    if isinstance(p, MagicPredicate):
        return "m_%s#%s" % (_render_pred(p.base), p.adornment)
    if isinstance(p, FunPredicate):
        return ("con_" if p.of_constant else "fun_") + p.symbol
    raise TypeError("not a predicate: %r" % (p,))


def render_atom(a: Atom) -> str:
    if a.is_equality:
        return "%s = %s" % (_render_term(a.args[0]), _render_term(a.args[1]))
    if not a.args:
        return _render_pred(a.predicate)
    return "%s(%s)" % (_render_pred(a.predicate), ",".join(map(_render_term, a.args)))


def render_rule(r) -> str:
    if isinstance(r, Rule):
        if not r.body:
            return render_atom(r.head) + "."
        return "%s :- %s." % (render_atom(r.head), ", ".join(map(render_atom, r.body)))
    if isinstance(r, TGD):
        return "%s -> %s" % (
            ", ".join(map(render_atom, r.body)),
            ", ".join(map(render_atom, r.head)),
        )
    if isinstance(r, EGD):
        return "%s -> %s = %s" % (
            ", ".join(map(render_atom, r.body)),
            _render_term(r.lhs),
            _render_term(r.rhs),
        )
    raise TypeError("not a rule: %r" % (r,))


def serialize_program(p) -> str:
    """Deterministic text form of a Program, a rule list or an existential
    rule list: sorted by head predicate label, then full rule text."""
    rules = p.rules if isinstance(p, Program) else tuple(p)

    def key(r):
        if isinstance(r, Rule):
            return (_render_pred(r.head.predicate), render_rule(r))
        if isinstance(r, TGD):
            return (_render_pred(r.head[0].predicate), render_rule(r))
        return ("=", render_rule(r))

    return "\n".join(render_rule(r) for r in sorted(rules, key=key)) + "\n"


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    """A query answering problem: rules, base instance, query predicate,
    optional schema, and whether distinct constants are known distinct."""

    rules: "tuple[ExistentialRule, ...]"
    instance: Instance
    query: Predicate
    schema: "dict[tuple[str, int], tuple[str, ...]] | None" = None
    una_known: bool = False


def rules_signature(rules: Iterable) -> "dict[str, Predicate]":
    sig: dict[str, Predicate] = {}
    for r in rules:
        atoms = (r.head if isinstance(r, TGD) else ()) + r.body
        for a in atoms:
            if isinstance(a.predicate, Predicate):
                sig.setdefault(a.predicate.name, a.predicate)
    return sig


def check_query_predicate(rules: Iterable, query: Predicate, source: str = "<rules>"):
    """The query predicate may appear in TGD heads only, never in a body and
    never with an existential variable in its arguments."""
    for r in rules:
        for a in r.body:
            if a.predicate == query:
                raise MalformedRule(
                    "query predicate %s occurs in a rule body" % query.name, source=source
                )
        if isinstance(r, TGD):
            for a in r.head:
                if a.predicate == query and (vars_of(a) & r.existential_vars):
                    raise MalformedRule(
                        "query predicate %s has an existential argument" % query.name,
                        source=source,
                    )


def load_scenario(
    rules_path,
    data_dir,
    query_pred: str,
    schema_path=None,
    una_known: bool = False,
) -> Scenario:
    rules_path = Path(rules_path)
    rules = parse_rules(rules_path.read_text(encoding="utf-8"), source=str(rules_path))
    sig = rules_signature(rules)
    if query_pred not in sig:
        raise UnknownPredicate(
            "query predicate %s does not occur in the rules" % query_pred,
            source=str(rules_path),
        )
    query = sig[query_pred]
    check_query_predicate(rules, query, source=str(rules_path))
    schema = None
    if schema_path is not None:
        schema_path = Path(schema_path)
        schema = parse_schema(schema_path.read_text(encoding="utf-8"), source=str(schema_path))
        for (name, arity) in schema:
            if name in sig and sig[name].arity != arity:
                raise ArityMismatch(
                    "schema declares %s/%d, rules use arity %d" % (name, arity, sig[name].arity),
                    source=str(schema_path),
                )
    instance = parse_instance(data_dir, sig, schema)
    return Scenario(tuple(rules), instance, query, schema, una_known)
