"""Shared builders for the test suite: canonical rule forms, the reference
answer oracle, a random scenario generator and the running example."""

import itertools
import random
from dataclasses import dataclass

from chasegoal.chase import (
    ChaseError,
    Limits,
    UnionFind,
    constant_answers,
    naive_fixpoint,
)
from chasegoal.driver import PipelineConfig, run_pipeline
from chasegoal.eqprep import (
    congruence_axioms,
    reflexivity_axioms,
    skolemize,
    sym_trans,
)
from chasegoal.frontend import Scenario, parse_rules, render_rule
from chasegoal.kernel import (
    EGD,
    TGD,
    Atom,
    Constant,
    Instance,
    Predicate,
    Program,
    Rule,
    Variable,
    enumerate_matches,
    eq,
    iter_vars,
    map_shallow,
    rule_atoms,
    substitute,
)


# ---------------------------------------------------------------------------
# Comparing rule sets up to variable renaming
# ---------------------------------------------------------------------------


def canon_rule(r) -> str:
    """Render a rule with its variables renamed v1, v2, ... in order of first
    occurrence, so structurally identical rules compare equal as strings."""
    ren = {}
    for v in iter_vars(list(rule_atoms(r))):
        if v not in ren:
            ren[v] = Variable("v%d" % (len(ren) + 1))
    if isinstance(r, Rule):
        r2 = Rule(substitute(ren, r.head), tuple(substitute(ren, a) for a in r.body))
    elif isinstance(r, TGD):
        r2 = TGD(
            tuple(substitute(ren, a) for a in r.body),
            tuple(substitute(ren, a) for a in r.head),
        )
    elif isinstance(r, EGD):
        r2 = EGD(
            tuple(substitute(ren, a) for a in r.body),
            substitute(ren, r.lhs),
            substitute(ren, r.rhs),
        )
    else:
        raise TypeError(r)
    return render_rule(r2)


def canon_rules(rules) -> "list[str]":
    if isinstance(rules, Program):
        rules = rules.rules
    return sorted(canon_rule(r) for r in rules)


# ---------------------------------------------------------------------------
# Reference oracle: Skolemized program + explicit equality axioms, evaluated
# by the naive fixpoint with no representative merging at all.
# ---------------------------------------------------------------------------

# Tight guards: a draw whose naive fixpoint diverges burns the whole fact
# budget before the stream can reject it, so keep that budget small.
ORACLE_LIMITS = Limits(max_depth=5, max_facts=6_000)


def oracle_instance(scenario: Scenario, limits: Limits = ORACLE_LIMITS) -> Instance:
    p = skolemize(scenario.rules, scenario.query)
    base_preds = scenario.instance.predicates()
    aux = (
        reflexivity_axioms(p, base_preds)
        + congruence_axioms(p, base_preds)
        + sym_trans()
    )
    return naive_fixpoint(tuple(p.rules) + tuple(aux), scenario.instance, limits)


def answers_of(instance: Instance, query: Predicate) -> "set[tuple[str, ...]]":
    return {tuple(c.name for c in t) for t in constant_answers(instance, query)}


def oracle_answers(scenario: Scenario, limits: Limits = ORACLE_LIMITS):
    return answers_of(oracle_instance(scenario, limits), scenario.query)


def pipeline_answers(scenario: Scenario, mode: str, **cfg) -> "set[tuple[str, ...]]":
    report = run_pipeline(scenario, PipelineConfig(mode=mode, **cfg))
    return {tuple(a) for a in report.answers}


def merged_distinct_constants(instance: Instance) -> bool:
    """True when the equality closure of `instance` identifies two constants
    with different names (the unique name assumption fails)."""
    for fact in instance:
        if fact.is_equality:
            s, t = fact.args
            if isinstance(s, Constant) and isinstance(t, Constant) and s != t:
                return True
    return False


# ---------------------------------------------------------------------------
# Second reference model: restricted chase with labelled nulls over the raw
# existential rules (no Skolem terms). Used to cross-check skolemize.
# ---------------------------------------------------------------------------


def null_chase_answers(rules, base, query, max_rounds=200):
    inst = Instance(base)
    uf = UnionFind()
    fresh = itertools.count(1)

    def merge(s, t):
        merged = uf.union(s, t)
        if merged is None:
            return False
        rep, loser = merged
        for fact in list(inst.containing(loser)):
            inst.discard(fact)
            inst.add(map_shallow({loser: rep}, fact))
        return True

    def normalized(atoms):
        # rule constants must be looked up through the union-find, or a
        # body mentioning a merged-away constant stops matching anything
        return tuple(
            Atom(a.predicate, tuple(uf.find(t) if isinstance(t, Constant) else t for t in a.args))
            for a in atoms
        )

    for _ in range(max_rounds):
        changed = False
        for r in rules:
            if isinstance(r, EGD):
                for sigma in list(enumerate_matches(normalized(r.body), inst)):
                    s = uf.find(substitute(sigma, r.lhs))
                    t = uf.find(substitute(sigma, r.rhs))
                    if s != t:
                        changed |= merge(s, t)
            else:
                body, head = normalized(r.body), normalized(r.head)
                for sigma in list(enumerate_matches(body, inst)):
                    if any(True for _ in enumerate_matches(head, inst, sigma)):
                        continue
                    ext = dict(sigma)
                    for v in sorted(r.existential_vars, key=lambda v: v.name):
                        ext[v] = Constant("~n%d" % next(fresh))
                    for a in head:
                        changed |= inst.add(substitute(ext, a))
        if not changed:
            break
    else:
        raise RuntimeError("null chase did not settle in %d rounds" % max_rounds)

    classes = {}
    for t, rep in uf.as_map().items():
        classes.setdefault(rep, {rep}).add(t)
    answers = set()
    for fact in inst.with_predicate(query):
        options = []
        for t in fact.args:
            consts = [
                m.name
                for m in classes.get(t, {t})
                if isinstance(m, Constant) and not m.name.startswith("~n")
            ]
            if not consts:
                break
            options.append(consts)
        else:
            answers.update(itertools.product(*options))
    return answers


# ---------------------------------------------------------------------------
# Random scenarios. Existential rules strictly climb a predicate level so the
# chase stays terminating; scenarios whose *naive* reference fixpoint still
# diverges (equality can re-feed a generator through congruence, see the
# running example) are skipped by the stream.
# ---------------------------------------------------------------------------


@dataclass
class Drawn:
    scenario: Scenario
    oracle: "set[tuple[str, ...]] | None" = None
    naive: "Instance | None" = None


def random_scenario(rng: random.Random) -> Scenario:
    levels = {
        0: [Predicate("E", rng.choice((1, 2))), Predicate("F", rng.choice((1, 2)))],
        1: [Predicate("P", rng.choice((1, 2))), Predicate("R", 2)],
        2: [Predicate("S", rng.choice((1, 2)))],
    }
    level_of = {p: lvl for lvl, ps in levels.items() for p in ps}
    pool = [p for ps in levels.values() for p in ps]
    consts = [Constant("c%d" % i) for i in range(rng.randint(2, 4))]
    query = Predicate("Q", rng.choice((1, 2)))

    def body_atoms(n, max_level=2):
        vs = [Variable("x%d" % i) for i in range(1, 5)]
        atoms, used = [], []
        for _ in range(n):
            p = rng.choice([p for p in pool if level_of[p] <= max_level])
            args = []
            for _ in range(p.arity):
                if used and rng.random() < 0.45:
                    args.append(rng.choice(used))
                elif rng.random() < 0.15:
                    args.append(rng.choice(consts))
                else:
                    v = rng.choice(vs)
                    args.append(v)
                    used.append(v)
            atoms.append(Atom(p, tuple(args)))
        return atoms, sorted(set(used), key=lambda v: v.name)

    rules = []
    n_tgds = rng.randint(1, 3)
    for _ in range(n_tgds):
        for _ in range(20):
            body, bvars = body_atoms(rng.randint(1, 2), max_level=1)
            if bvars:
                break
        else:
            continue
        maxlvl = max(level_of[a.predicate] for a in body)
        existential = rng.random() < 0.6 and maxlvl < 2
        hvars = list(bvars)
        if existential:
            hvars.append(Variable("y"))
        head = []
        for _ in range(rng.randint(1, 2)):
            hp = rng.choice(
                [
                    p
                    for p in pool
                    if (level_of[p] > maxlvl if existential else level_of[p] >= maxlvl)
                ]
                or [levels[2][0]]
            )
            head.append(Atom(hp, tuple(rng.choice(hvars) for _ in range(hp.arity))))
        if existential and not any(Variable("y") in a.args for a in head):
            head[0] = Atom(head[0].predicate, (Variable("y"),) * head[0].predicate.arity)
        rules.append(TGD(tuple(body), tuple(head)))

    for _ in range(rng.randint(1, 2)):
        for _ in range(20):
            body, bvars = body_atoms(rng.randint(1, 2))
            if len(bvars) >= 2:
                rules.append(EGD(tuple(body), bvars[0], bvars[1]))
                break

    for _ in range(20):
        body, bvars = body_atoms(rng.randint(1, 2))
        if len(bvars) >= query.arity:
            head = Atom(query, tuple(bvars[: query.arity]))
            rules.append(TGD(tuple(body), (head,)))
            break

    facts = []
    for _ in range(rng.randint(2, 8)):
        p = rng.choice(pool)
        facts.append(Atom(p, tuple(rng.choice(consts) for _ in range(p.arity))))
    return Scenario(tuple(rules), Instance(facts), query, None, una_known=False)


def scenario_stream(seed: int, want: int, with_oracle: bool = True, limits: Limits = ORACLE_LIMITS):
    """Deterministic stream of `want` random scenarios. With `with_oracle`,
    only draws whose naive reference fixpoint terminates inside `limits` are
    produced, the honest UNA flag is attached and the oracle answers come
    along for the ride."""
    rng = random.Random(seed)
    produced = attempts = 0
    while produced < want:
        attempts += 1
        if attempts > 80 * want + 200:
            raise RuntimeError("scenario generator rejection rate too high")
        sc = random_scenario(rng)
        if not any(isinstance(r, TGD) and r.head[0].predicate == sc.query for r in sc.rules):
            continue
        if not with_oracle:
            yield Drawn(sc)
            produced += 1
            continue
        try:
            naive = oracle_instance(sc, limits)
        except ChaseError:
            continue
        una = not merged_distinct_constants(naive)
        sc = Scenario(sc.rules, sc.instance, sc.query, sc.schema, una_known=una)
        yield Drawn(sc, answers_of(naive, sc.query), naive)
        produced += 1


# ---------------------------------------------------------------------------
# The running example and the synthetic campus fixture
# ---------------------------------------------------------------------------

RUNNING_RULES = """\
A(?x), R(?x,?y) -> Q(?x)
S(?x,?z) -> R(?x,?y)
R(?x,?y), S(?x,?x2), R(?x2,?y2) -> ?y = ?y2
B(?x) -> T(?x,?y), A(?y)
T(?x,?y) -> ?x = ?y
"""

Q1 = Predicate("Q", 1)


def running_example(n: int) -> Scenario:
    rules = tuple(parse_rules(RUNNING_RULES))
    b, s = Predicate("B", 1), Predicate("S", 2)
    facts = [Atom(b, (Constant("a1"),))]
    facts += [
        Atom(s, (Constant("a%d" % i), Constant("a%d" % (i + 1))))
        for i in range(1, n)
    ]
    return Scenario(rules, Instance(facts), Q1, None, una_known=True)


CAMPUS_RULES = """\
Student(?x), enrolled(?x,?d) -> advisedBy(?x,?y)
advisedBy(?x,?y) -> Professor(?y)
Student(?x), enrolled(?x,'d0'), advisedBy(?x,?y) -> Q(?x)
"""


def campus_fixture(students=5000, depts=50, special=100) -> Scenario:
    rules = tuple(parse_rules(CAMPUS_RULES))
    student, enrolled = Predicate("Student", 1), Predicate("enrolled", 2)
    facts = []
    for i in range(students):
        s = Constant("s%d" % i)
        if i < special:
            d = Constant("d0")
        else:
            d = Constant("d%d" % (1 + i % (depts - 1)))
        facts.append(Atom(student, (s,)))
        facts.append(Atom(enrolled, (s, d)))
    return Scenario(rules, Instance(facts), Q1, None, una_known=True)


# ---------------------------------------------------------------------------
# Recursive application of the representative map (merges rewrite argument
# positions only, so nested occurrences are normalized here for comparisons)
# ---------------------------------------------------------------------------


def mu_hat(mu, t):
    from chasegoal.kernel import Functional

    while True:
        if isinstance(t, Functional):
            t = Functional(t.symbol, tuple(mu_hat(mu, a) for a in t.args))
        r = mu.get(t, t)
        if r == t:
            return t
        t = r
