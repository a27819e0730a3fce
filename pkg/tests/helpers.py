"""Shared test machinery: random query/expression generators, the reference
homomorphism containment checker, and differential-testing loops."""

from __future__ import annotations

import itertools
import random

from semiq.frontend import desugar_groupby, inline_views
from semiq.oracle import FiniteDb, GenSizes, eval_exp, gen_instances, interp_query
from semiq.schema import Schema, SchemaEnv
from semiq.sqlast import (AndP, BoolLit, Cmp, ColRef, ExprItem, Select,
                          Source, Star, TableRef, UnionAll)
from semiq.translate import denote
from semiq.exprs import (Add, AttrRef, Const, Mul, Not, Pred, Rel, Squash, Sum,
                        TupleVar, VarGen, mk_eq, mk_neq)

# A small standard environment: three binary relations over ints.

def std_env(rel_names=("R", "S", "T")) -> SchemaEnv:
    env = SchemaEnv()
    for name in rel_names:
        sch = Schema(f"s{name}", (("a", "int"), ("b", "int")))
        env.declare_schema(sch)
        env.declare_table(name, f"s{name}")
    return env


# ---------------------------------------------------------------------------
# Random conjunctive queries (ASTs)

def gen_cq(rng: random.Random, rels=("R", "S"), max_atoms=3, max_vars=3,
           out_names=("o1",), allow_const=True) -> Select:
    n_atoms = rng.randint(1, max_atoms)
    sources = []
    for i in range(min(n_atoms, max_vars)):
        sources.append(Source(TableRef(rng.choice(rels)), f"x{i}"))
    aliases = [s.alias for s in sources]
    attrs = ("a", "b")

    def rand_ref():
        return ColRef(rng.choice(aliases), rng.choice(attrs))

    preds = []
    for _ in range(rng.randint(0, 2)):
        lhs = rand_ref()
        if allow_const and rng.random() < 0.25:
            preds.append(Cmp("=", lhs, _lit(rng)))
        else:
            preds.append(Cmp("=", lhs, rand_ref()))
    where = None
    for p in preds:
        where = p if where is None else AndP(where, p)
    items = tuple(ExprItem(rand_ref(), name) for name in out_names)
    return Select(items, tuple(sources), where)


def _lit(rng):
    from semiq.sqlast import Lit
    return Lit(rng.randint(0, 2), "int")


def gen_ucq(rng: random.Random, rels=("R", "S"), branches=None,
            out_names=("o1",)):
    k = branches if branches is not None else rng.randint(1, 3)
    qs = [gen_cq(rng, rels, out_names=out_names) for _ in range(k)]
    out = qs[0]
    for q in qs[1:]:
        out = UnionAll(out, q)
    return out


# ---------------------------------------------------------------------------
# Equivalence-preserving syntactic mutations

def shuffle_sources(rng: random.Random, q: Select) -> Select:
    src = list(q.sources)
    rng.shuffle(src)
    return Select(q.items, tuple(src), q.where, q.group_by, q.pos)


def rename_aliases(rng: random.Random, q: Select) -> Select:
    mapping = {s.alias: f"y{i}_{rng.randint(0, 9)}" for i, s in enumerate(q.sources)}

    def rex(e):
        if isinstance(e, ColRef):
            return ColRef(mapping.get(e.alias, e.alias), e.attr)
        return e

    def rp(p):
        if isinstance(p, Cmp):
            return Cmp(p.op, rex(p.lhs), rex(p.rhs))
        if isinstance(p, AndP):
            return AndP(rp(p.lhs), rp(p.rhs))
        return p

    sources = tuple(Source(s.query, mapping[s.alias]) for s in q.sources)
    items = tuple(ExprItem(rex(it.expr), it.name) for it in q.items)
    where = rp(q.where) if q.where is not None else None
    return Select(items, sources, where)


def shuffle_conjuncts(rng: random.Random, q: Select) -> Select:
    if q.where is None:
        return q
    conj = _conjuncts(q.where)
    rng.shuffle(conj)
    where = conj[0]
    for c in conj[1:]:
        where = AndP(where, c)
    return Select(q.items, q.sources, where, q.group_by, q.pos)


def _conjuncts(p) -> list:
    if isinstance(p, AndP):
        return _conjuncts(p.lhs) + _conjuncts(p.rhs)
    return [p]


def duplicate_conjunct(rng: random.Random, q: Select) -> Select:
    if q.where is None:
        return q
    conj = _conjuncts(q.where)
    where = q.where
    where = AndP(where, rng.choice(conj))
    return Select(q.items, q.sources, where, q.group_by, q.pos)


def swap_eq_sides(rng: random.Random, q: Select) -> Select:
    def rp(p):
        if isinstance(p, Cmp) and p.op == "=" and rng.random() < 0.5:
            return Cmp("=", p.rhs, p.lhs)
        if isinstance(p, AndP):
            return AndP(rp(p.lhs), rp(p.rhs))
        return p
    where = rp(q.where) if q.where is not None else None
    return Select(q.items, q.sources, where, q.group_by, q.pos)


def wrap_subquery(rng: random.Random, q) -> Select:
    return Select((Star(),), (Source(q, "z"),))


CQ_MUTATIONS = [shuffle_sources, rename_aliases, shuffle_conjuncts,
                duplicate_conjunct, swap_eq_sides]


def mutate_cq(rng: random.Random, q: Select, rounds=3):
    for _ in range(rounds):
        q = rng.choice(CQ_MUTATIONS)(rng, q)
    if rng.random() < 0.3:
        q = wrap_subquery(rng, q)
    return q


def mutate_ucq(rng: random.Random, q):
    branches = _branches(q)
    branches = [mutate_cq(rng, b) if isinstance(b, Select) else b
                for b in branches]
    rng.shuffle(branches)
    out = branches[0]
    for b in branches[1:]:
        out = UnionAll(out, b)
    return out


def _branches(q) -> list:
    if isinstance(q, UnionAll):
        return _branches(q.lhs) + _branches(q.rhs)
    return [q]


# ---------------------------------------------------------------------------
# Reference containment checker for conjunctive queries under set semantics.
# Independent of the decision procedures: works on the query ASTs directly.

class _Tableau:
    def __init__(self, q: Select, env: SchemaEnv):
        assert isinstance(q, Select)
        self.atoms = [(s.query.name, s.alias) for s in q.sources]
        self.aliases = [s.alias for s in q.sources]
        self.parent: dict = {}
        self.head: dict[str, object] = {}
        for it in q.items:
            self.head[it.name] = self._term(it.expr)
        for p in _conjuncts(q.where) if q.where is not None else []:
            if isinstance(p, BoolLit):
                continue
            self._union(self._term(p.lhs), self._term(p.rhs))

    def _term(self, e):
        if isinstance(e, ColRef):
            return ("v", e.alias, e.attr)
        return ("c", e.value)

    def _find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _union(self, a, b):
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            if repr(ra) > repr(rb):
                ra, rb = rb, ra
            self.parent[rb] = ra

    def consistent(self) -> bool:
        # two distinct constants merged means the query is unsatisfiable
        reps: dict = {}
        for x in list(self.parent):
            if x[0] == "c":
                r = self._find(x)
                if r in reps and reps[r] != x:
                    return False
                reps[r] = x
        return True

    def same(self, a, b) -> bool:
        return self._find(a) == self._find(b)


def cq_contained(q1: Select, q2: Select, env: SchemaEnv) -> bool:
    """q1 subset-of q2 under set semantics, via homomorphism q2 -> q1."""
    t1, t2 = _Tableau(q1, env), _Tableau(q2, env)
    if not t1.consistent():
        return True  # empty query is contained in anything
    if not t2.consistent():
        return False if t1.consistent() else True
    if set(t1.head) != set(t2.head):
        return False
    a1 = t1.aliases

    def map_term(term, h):
        if term[0] == "c":
            return term
        return ("v", h[term[1]], term[2])

    for combo in itertools.product(a1, repeat=len(t2.aliases)):
        h = dict(zip(t2.aliases, combo))
        ok = True
        for rel, x in t2.atoms:
            if (rel, h[x]) not in t1.atoms:
                ok = False
                break
        if not ok:
            continue
        for (x, px) in list(t2.parent.items()):
            if not t1.same(map_term(x, h), map_term(t2._find(x), h)):
                ok = False
                break
        if not ok:
            continue
        for name, term in t2.head.items():
            if not t1.same(map_term(term, h), t1.head[name]):
                ok = False
                break
        if ok:
            return True
    return False


def cq_set_equivalent(q1: Select, q2: Select, env: SchemaEnv) -> bool:
    return cq_contained(q1, q2, env) and cq_contained(q2, q1, env)


# ---------------------------------------------------------------------------
# Oracle comparison helpers

def queries_agree(q1, q2, env: SchemaEnv, dbs) -> bool:
    for db in dbs:
        if interp_query(q1, db, env) != interp_query(q2, db, env):
            return False
    return True


def find_disagreement(q1, q2, env: SchemaEnv, dbs):
    for db in dbs:
        if interp_query(q1, db, env) != interp_query(q2, db, env):
            return db
    return None


def denote_pair(q1, q2, env: SchemaEnv):
    from semiq.exprs import substitute
    gen = VarGen()
    q1 = inline_views(desugar_groupby(q1), env)
    q2 = inline_views(desugar_groupby(q2), env)
    d1 = denote(q1, env, gen)
    d2 = denote(q2, env, gen)
    body2 = substitute(d2.body, d2.out_var, d1.out_var)
    return gen, d1.out_var, d1.body, body2


# ---------------------------------------------------------------------------
# Random semiring expressions (closed except for one output variable)

def gen_uexp(rng: random.Random, env: SchemaEnv, out_var: TupleVar, depth=3):
    rels = sorted(env.tables)

    # all standard-env schemas share the attribute layout, so any in-scope
    # variable can feed any relation atom
    def build(scope: list[TupleVar], d: int):
        choices = ["rel", "pred", "one"]
        if d > 0:
            choices += ["add", "mul", "mul", "sum", "squash", "not"]
        kind = rng.choice(choices)
        if kind == "rel":
            name = rng.choice(rels)
            candidates = [v for v in scope if v.schema == env.tables[name]]
            if not candidates:
                return _ONE
            return Rel(name, rng.choice(candidates))
        if kind == "pred":
            refs = [AttrRef(rng.choice(scope), rng.choice(("a", "b")))
                    for _ in range(2)]
            if rng.random() < 0.3:
                refs[1] = Const(rng.randint(0, 2), "int")
            atom = mk_eq(*refs) if rng.random() < 0.8 else mk_neq(*refs)
            return Pred(atom)
        if kind == "one":
            return _ONE
        if kind == "add":
            return Add(build(scope, d - 1), build(scope, d - 1))
        if kind == "mul":
            return Mul(build(scope, d - 1), build(scope, d - 1))
        if kind == "squash":
            return Squash(build(scope, d - 1))
        if kind == "not":
            return Not(build(scope, d - 1))
        if kind == "sum":
            name = rng.choice(rels)
            v = TupleVar(rng.randrange(10_000, 1_000_000), env.tables[name], "u")
            return Sum(v, Mul(build(scope + [v], d - 1), Rel(name, v)))
        raise AssertionError(kind)

    return build([out_var], depth)


from semiq.exprs import ONE as _ONE  # noqa: E402


def small_dbs(env: SchemaEnv, n: int, seed: int, sizes: GenSizes | None = None,
              constraints=(), extra_ints=()):
    return list(itertools.islice(
        gen_instances(env, list(constraints), sizes or GenSizes(2, 2, 2), seed,
                      extra_ints=extra_ints), n))


# ---------------------------------------------------------------------------
# Axiom instantiation library: each entry builds a random instance of one
# identity and checks it pointwise under natural-number evaluation.

def _scope_var(rng: random.Random, env: SchemaEnv, n: int) -> TupleVar:
    name = rng.choice(sorted(env.tables))
    return TupleVar(900_000 + n, env.tables[name], "w")


def gen_uexp_scope(rng: random.Random, env: SchemaEnv, scope, depth=2):
    if not scope:
        scope = [_scope_var(rng, env, rng.randrange(50))]
    return gen_uexp(rng, env, scope[0], depth) if len(scope) == 1 else \
        _gen_with_scope(rng, env, list(scope), depth)


def _gen_with_scope(rng, env, scope, depth):
    e = gen_uexp(rng, env, scope[0], depth)
    for v in scope[1:]:
        if rng.random() < 0.5:
            e = Mul(e, Pred(mk_eq(AttrRef(v, "a"), AttrRef(scope[0], "b"))))
    return e


def _rand_scalar(rng, scope):
    if rng.random() < 0.3:
        return Const(rng.randint(0, 1), "int")
    return AttrRef(rng.choice(scope), rng.choice(("a", "b")))


def _ev_eq(db, env_b, lhs, rhs) -> bool:
    return eval_exp(lhs, db, env_b) == eval_exp(rhs, db, env_b)


def _bind(db: FiniteDb, *vs: TupleVar) -> dict:
    env_b = {}
    for v in vs:
        space = db.tuple_space(v.schema)
        env_b[v.vid] = space[(v.vid * 7919) % len(space)]
    return env_b


def axiom_checks(env: SchemaEnv):
    """name -> check(rng, db) returning True/False (None = skip)."""
    from semiq.exprs import ONE, Pred as P, TupleCons, ZERO, mk_tuple_eq, mk_tuple_neq

    def ctx(rng, n_scope=2):
        vs = [_scope_var(rng, env, i) for i in range(n_scope)]
        return vs

    def fresh(rng):
        name = rng.choice(sorted(env.tables))
        return TupleVar(800_000 + rng.randrange(10_000), env.tables[name], "t")

    def c_squash_zero(rng, db):
        return _ev_eq(db, {}, Squash(ZERO), ZERO)

    def c_squash_one_plus(rng, db):
        vs = ctx(rng)
        x = gen_uexp_scope(rng, env, vs)
        return _ev_eq(db, _bind(db, *vs), Squash(Add(_ONE, x)), _ONE)

    def c_squash_lift_add(rng, db):
        vs = ctx(rng)
        x, y = gen_uexp_scope(rng, env, vs), gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Squash(Add(Squash(x), y)), Squash(Add(x, y)))

    def c_squash_mul(rng, db):
        vs = ctx(rng)
        x, y = gen_uexp_scope(rng, env, vs), gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Mul(Squash(x), Squash(y)), Squash(Mul(x, y)))

    def c_squash_square(rng, db):
        vs = ctx(rng)
        x = gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Mul(Squash(x), Squash(x)), Squash(x))

    def c_absorb_squash(rng, db):
        vs = ctx(rng)
        x = gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Mul(x, Squash(x)), x)

    def c_squash_of_idem(rng, db):
        vs = ctx(rng)
        x = gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        v = eval_exp(x, db, b)
        if v * v != v:
            return None  # premise fails at this point
        return _ev_eq(db, b, Squash(x), x)

    def c_not_zero(rng, db):
        return _ev_eq(db, {}, Not(ZERO), _ONE)

    def c_not_mul(rng, db):
        vs = ctx(rng)
        x, y = gen_uexp_scope(rng, env, vs), gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Not(Mul(x, y)), Squash(Add(Not(x), Not(y))))

    def c_not_add(rng, db):
        vs = ctx(rng)
        x, y = gen_uexp_scope(rng, env, vs), gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Not(Add(x, y)), Mul(Not(x), Not(y)))

    def c_not_squash(rng, db):
        vs = ctx(rng)
        x = gen_uexp_scope(rng, env, vs)
        b = _bind(db, *vs)
        return (_ev_eq(db, b, Not(Squash(x)), Not(x)) and
                _ev_eq(db, b, Squash(Not(x)), Not(x)))

    def c_sum_add(rng, db):
        t = fresh(rng)
        f1 = gen_uexp(rng, env, t, 2)
        f2 = gen_uexp(rng, env, t, 2)
        return _ev_eq(db, {}, Sum(t, Add(f1, f2)), Add(Sum(t, f1), Sum(t, f2)))

    def c_sum_swap(rng, db):
        t1, t2 = fresh(rng), fresh(rng)
        f = Mul(gen_uexp(rng, env, t1, 1), gen_uexp(rng, env, t2, 1))
        return _ev_eq(db, {}, Sum(t1, Sum(t2, f)), Sum(t2, Sum(t1, f)))

    def c_sum_hoist(rng, db):
        vs = ctx(rng, 1)
        t = fresh(rng)
        x = gen_uexp_scope(rng, env, vs)
        f = gen_uexp(rng, env, t, 2)
        b = _bind(db, *vs)
        return _ev_eq(db, b, Mul(x, Sum(t, f)), Sum(t, Mul(x, f)))

    def c_squash_sum(rng, db):
        t = fresh(rng)
        f = gen_uexp(rng, env, t, 2)
        return _ev_eq(db, {}, Squash(Sum(t, f)), Squash(Sum(t, Squash(f))))

    def c_pred_squash(rng, db):
        vs = ctx(rng)
        b = _bind(db, *vs)
        atom = mk_eq(_rand_scalar(rng, vs), _rand_scalar(rng, vs))
        return _ev_eq(db, b, P(atom), Squash(P(atom)))

    def c_excluded_middle(rng, db):
        vs = ctx(rng)
        b = _bind(db, *vs)
        l, r = _rand_scalar(rng, vs), _rand_scalar(rng, vs)
        scalar = Add(P(mk_eq(l, r)), P(mk_neq(l, r)))
        if not _ev_eq(db, b, scalar, _ONE):
            return False
        u = w = None
        u, w = vs[0], vs[-1]
        if u.schema != w.schema:
            return True
        tup = Add(P(mk_tuple_eq(u, w)), P(mk_tuple_neq(u, w)))
        return _ev_eq(db, b, tup, _ONE)

    def c_subst_eq(rng, db):
        vs = ctx(rng)
        b = _bind(db, *vs)
        e1 = AttrRef(vs[0], "a")
        e2 = _rand_scalar(rng, vs)
        from semiq.exprs import replace_scalar
        f1 = gen_uexp_scope(rng, env, vs)
        f2 = replace_scalar(f1, e1, e2)
        eq = P(mk_eq(e1, e2))
        return _ev_eq(db, b, Mul(f1, eq), Mul(f2, eq))

    def c_sum_one(rng, db):
        t = fresh(rng)
        vs = ctx(rng, 1)
        cand = vs[0] if vs[0].schema == t.schema else None
        if cand is None:
            dom = db.tuple_space(t.schema)
            rec = TupleCons(tuple((a, Const(v, "int")) for a, v in dom[0]))
            b = {}
            e = rec
        else:
            b = _bind(db, cand)
            e = cand
        from semiq.exprs import mk_tuple_eq as teq
        return _ev_eq(db, b, Sum(t, P(teq(t, e))), _ONE)

    def c_sum_elim(rng, db):
        t = fresh(rng)
        u = TupleVar(810_000 + rng.randrange(1000), t.schema, "u")
        b = _bind(db, u)
        f = gen_uexp(rng, env, t, 2)
        from semiq.exprs import mk_tuple_eq as teq, substitute
        lhs = Sum(t, Mul(P(teq(t, u)), f))
        rhs = substitute(f, t, u)
        return _ev_eq(db, b, lhs, rhs)

    def c_semiring(rng, db):
        vs = ctx(rng)
        b = _bind(db, *vs)
        x, y, z = (gen_uexp_scope(rng, env, vs, 1) for _ in range(3))
        return (_ev_eq(db, b, Add(x, y), Add(y, x)) and
                _ev_eq(db, b, Mul(x, y), Mul(y, x)) and
                _ev_eq(db, b, Add(Add(x, y), z), Add(x, Add(y, z))) and
                _ev_eq(db, b, Mul(Mul(x, y), z), Mul(x, Mul(y, z))) and
                _ev_eq(db, b, Mul(x, Add(y, z)), Add(Mul(x, y), Mul(x, z))) and
                _ev_eq(db, b, Add(x, ZERO), x) and
                _ev_eq(db, b, Mul(x, _ONE), x) and
                _ev_eq(db, b, Mul(x, ZERO), ZERO))

    def c_squash_flatten(rng, db):
        vs = ctx(rng)
        b = _bind(db, *vs)
        a, x, y = (gen_uexp_scope(rng, env, vs, 1) for _ in range(3))
        return _ev_eq(db, b, Squash(Add(Mul(a, Squash(x)), y)),
                      Squash(Add(Mul(a, x), y)))

    return {
        "squash-zero": c_squash_zero,
        "squash-one-plus": c_squash_one_plus,
        "squash-lift-add": c_squash_lift_add,
        "squash-mul": c_squash_mul,
        "squash-square": c_squash_square,
        "absorb-squash": c_absorb_squash,
        "squash-of-idem": c_squash_of_idem,
        "not-zero": c_not_zero,
        "not-mul": c_not_mul,
        "not-add": c_not_add,
        "not-squash": c_not_squash,
        "sum-add": c_sum_add,
        "sum-swap": c_sum_swap,
        "sum-hoist": c_sum_hoist,
        "squash-sum": c_squash_sum,
        "pred-squash": c_pred_squash,
        "excluded-middle": c_excluded_middle,
        "subst-eq": c_subst_eq,
        "sum-one": c_sum_one,
        "sum-elim-eq": c_sum_elim,
        "semiring": c_semiring,
        "squash-flatten": c_squash_flatten,
    }


# Identities the verifier treats as numbered core axioms: the seven squash
# laws, the four summation laws, and the predicate/equality laws.
CORE_AXIOM_NAMES = [
    "squash-zero", "squash-one-plus", "squash-lift-add", "squash-mul",
    "squash-square", "absorb-squash", "squash-of-idem",
    "sum-add", "sum-swap", "sum-hoist", "squash-sum",
    "pred-squash", "excluded-middle", "subst-eq", "sum-one",
]


def run_axiom_check(name: str, env: SchemaEnv, rounds: int, seed: int) -> tuple[int, int]:
    """Returns (checked, failed)."""
    rng = random.Random(seed)
    checks = axiom_checks(env)
    fn = checks[name]
    dbs = small_dbs(env, 8, seed + 1)
    checked = failed = 0
    i = 0
    while checked < rounds:
        db = dbs[i % len(dbs)]
        i += 1
        out = fn(rng, db)
        if out is None:
            continue
        checked += 1
        if not out:
            failed += 1
    return checked, failed
