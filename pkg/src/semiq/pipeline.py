"""End-to-end verification pipeline.

parse -> desugar -> inline -> denote -> normalize -> decide, one verify
statement at a time.  Also classifies each pair into the fragment that
controls whether a failed search is a definitive non-equivalence.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .config import Budget, BudgetError, Limits
from .decide import (Decider, EQUIVALENT, GENERAL, NOT_EQUIVALENT, NOT_PROVED,
                     RESOURCE_EXHAUSTED, UCQ_BAG, UCQ_SET)
from .frontend import build_env, desugar_groupby, inline_views
from .oracle import (FiniteDb, GenSizes, OracleError, gen_instances, interp_query)
from .parser import parse
from .schema import SchemaEnv, SemanticError
from .sqlast import (AggQuery, AliasStar, AndP, App, BoolLit, Cmp, ColRef,
                     Distinct, ExceptQ, Exists, ExprItem, Lit, NotP, OrP,
                     Program, Select, Star, TableRef, UnionAll, VerifyStmt)
from .spnf import to_spnf
from .trace import Trace
from .translate import denote
from .exprs import VarGen, pretty, substitute


@dataclass
class VerifyOutcome:
    name: str
    status: str
    fragment: str
    wall_ms: float = 0.0
    steps: dict = field(default_factory=dict)
    trace: Trace | None = None
    witness: FiniteDb | None = None
    detail: str = ""
    dumps: dict = field(default_factory=dict)

    @property
    def exit_contribution(self) -> int:
        return 0 if self.status == EQUIVALENT else 1


# ---------------------------------------------------------------------------
# Fragment classification

def referenced_tables(q, acc: set[str] | None = None) -> set[str]:
    acc = set() if acc is None else acc
    if isinstance(q, TableRef):
        acc.add(q.name)
    elif isinstance(q, Select):
        for s in q.sources:
            referenced_tables(s.query, acc)
        if q.where is not None:
            _pred_tables(q.where, acc)
        for it in q.items:
            if isinstance(it, ExprItem):
                _expr_tables(it.expr, acc)
    elif isinstance(q, (UnionAll, ExceptQ)):
        referenced_tables(q.lhs, acc)
        referenced_tables(q.rhs, acc)
    elif isinstance(q, Distinct):
        referenced_tables(q.query, acc)
    return acc


def _expr_tables(e, acc: set[str]):
    if isinstance(e, App):
        for a in e.args:
            _expr_tables(a, acc)
    elif isinstance(e, AggQuery):
        referenced_tables(e.query, acc)


def _pred_tables(p, acc: set[str]):
    if isinstance(p, Cmp):
        _expr_tables(p.lhs, acc)
        _expr_tables(p.rhs, acc)
    elif isinstance(p, NotP):
        _pred_tables(p.body, acc)
    elif isinstance(p, (AndP, OrP)):
        _pred_tables(p.lhs, acc)
        _pred_tables(p.rhs, acc)
    elif isinstance(p, Exists):
        referenced_tables(p.query, acc)


def _simple_expr(e) -> bool:
    return isinstance(e, (ColRef, Lit))


def _conj_of_equalities(p) -> bool:
    if p is None or isinstance(p, BoolLit):
        return True
    if isinstance(p, Cmp):
        return p.op == "=" and _simple_expr(p.lhs) and _simple_expr(p.rhs)
    if isinstance(p, AndP):
        return _conj_of_equalities(p.lhs) and _conj_of_equalities(p.rhs)
    return False


def is_cq(q) -> bool:
    if isinstance(q, TableRef):
        return True
    if not isinstance(q, Select) or q.group_by:
        return False
    if not all(isinstance(s.query, TableRef) for s in q.sources):
        return False
    if not _conj_of_equalities(q.where):
        return False
    for it in q.items:
        if isinstance(it, (Star, AliasStar)):
            continue
        if isinstance(it, ExprItem) and _simple_expr(it.expr):
            continue
        return False
    return True


def _union_branches(q) -> list:
    if isinstance(q, UnionAll):
        return _union_branches(q.lhs) + _union_branches(q.rhs)
    return [q]


def is_ucq_bag(q) -> bool:
    return all(is_cq(b) for b in _union_branches(q))


def is_ucq_set(q) -> bool:
    return isinstance(q, Distinct) and is_ucq_bag(q.query)


def classify_fragment(q1, q2, env: SchemaEnv) -> str:
    rels = referenced_tables(q1) | referenced_tables(q2)
    touched = any(k.relation in rels for k in env.keys) or \
        any(fk.source in rels or fk.target in rels for fk in env.fks)
    if touched:
        return GENERAL
    if is_ucq_bag(q1) and is_ucq_bag(q2):
        return UCQ_BAG
    if is_ucq_set(q1) and is_ucq_set(q2):
        return UCQ_SET
    return GENERAL


# ---------------------------------------------------------------------------
# Literal collection (oracle domains must include the queries' constants)

def query_literals(q, acc: dict[str, set] | None = None) -> dict[str, set]:
    acc = {"int": set(), "string": set()} if acc is None else acc

    def expr(e):
        if isinstance(e, Lit) and e.ty in acc:
            acc[e.ty].add(e.value)
        elif isinstance(e, App):
            for a in e.args:
                expr(a)
        elif isinstance(e, AggQuery):
            query_literals(e.query, acc)

    def pred(p):
        if isinstance(p, Cmp):
            expr(p.lhs)
            expr(p.rhs)
        elif isinstance(p, NotP):
            pred(p.body)
        elif isinstance(p, (AndP, OrP)):
            pred(p.lhs)
            pred(p.rhs)
        elif isinstance(p, Exists):
            query_literals(p.query, acc)

    if isinstance(q, Select):
        for s in q.sources:
            query_literals(s.query, acc)
        if q.where is not None:
            pred(q.where)
        for it in q.items:
            if isinstance(it, ExprItem):
                expr(it.expr)
    elif isinstance(q, (UnionAll, ExceptQ)):
        query_literals(q.lhs, acc)
        query_literals(q.rhs, acc)
    elif isinstance(q, Distinct):
        query_literals(q.query, acc)
    return acc


# ---------------------------------------------------------------------------
# One verify statement

def prepare_pair(stmt: VerifyStmt, env: SchemaEnv):
    q1 = inline_views(desugar_groupby(stmt.lhs), env)
    q2 = inline_views(desugar_groupby(stmt.rhs), env)
    return q1, q2


def run_verify(stmt: VerifyStmt, name: str, env: SchemaEnv,
               limits: Limits | None = None, want_trace: bool = True,
               dump_uexp: bool = False, dump_spnf: bool = False,
               refute: bool = False, seed: int = 0) -> VerifyOutcome:
    limits = limits or Limits()
    t0 = time.monotonic()
    trace = Trace(enabled=want_trace)
    gen = VarGen()
    budget = Budget(limits)
    dumps: dict[str, str] = {}
    q1, q2 = prepare_pair(stmt, env)
    fragment = classify_fragment(q1, q2, env)
    d1 = denote(q1, env, gen)
    d2 = denote(q2, env, gen)
    if d1.schema != d2.schema:
        raise SemanticError(
            f"{name}: output schemas differ "
            f"({sorted(d1.schema.attr_names())} vs {sorted(d2.schema.attr_names())})")
    body2 = substitute(d2.body, d2.out_var, d1.out_var)
    names = {d1.out_var.vid: "t"}
    if dump_uexp:
        dumps["uexp1"] = pretty(d1.body, names)
        dumps["uexp2"] = pretty(body2, names)
    try:
        s1 = to_spnf(d1.body, gen, trace, budget)
        s2 = to_spnf(body2, gen, trace, budget)
        if dump_spnf:
            dumps["spnf1"] = pretty(s1.to_exp(), names)
            dumps["spnf2"] = pretty(s2.to_exp(), names)
        decider = Decider(env, gen, trace, budget, limits)
        equal = decider.equivalent(s1, s2)
        if equal:
            status = EQUIVALENT
        elif fragment in (UCQ_BAG, UCQ_SET):
            status = NOT_EQUIVALENT
        else:
            status = NOT_PROVED
        detail = ""
        if decider.canonizer.report.exhausted:
            detail = "chase depth ceiling reached"
    except BudgetError as exc:
        status = RESOURCE_EXHAUSTED
        detail = str(exc)
    wall_ms = (time.monotonic() - t0) * 1000.0
    outcome = VerifyOutcome(name, status, fragment, wall_ms,
                            steps=_step_counts(trace, budget), trace=trace,
                            detail=detail, dumps=dumps)
    if refute and status in (NOT_EQUIVALENT, NOT_PROVED):
        outcome.witness = find_witness(q1, q2, env, seed=seed)
    return outcome


_NORMALIZE_RULES = {
    "distr-mul-add", "sum-add", "sum-hoist", "prod-comm", "squash-mul",
    "pull-not", "mul-one", "mul-zero", "add-zero", "sum-zero", "squash-zero",
    "squash-one", "squash-one-plus", "squash-idem", "squash-lift-add",
    "squash-not", "not-zero", "pred-squash-elim",
}
_CANONIZE_RULES = {
    "eq-trans", "sum-elim-eq", "sum-elim-cover", "key-collapse", "key-idem",
    "fk-expand", "key-squash-stable", "eq-refl",
}


def _step_counts(trace: Trace, budget: Budget) -> dict:
    rules = trace.rule_names()
    return {
        "total": budget.steps,
        "normalize": sum(1 for r in rules if r in _NORMALIZE_RULES),
        "canonize": sum(1 for r in rules if r in _CANONIZE_RULES),
        "search": sum(1 for e in trace.events if e.kind in ("bijection", "permutation")),
    }


def find_witness(q1, q2, env: SchemaEnv, seed: int = 0, tries: int = 200,
                 sizes: GenSizes | None = None) -> FiniteDb | None:
    """Search generated constraint-satisfying instances for a disagreement."""
    lits = query_literals(q1)
    lits = query_literals(q2, lits)
    sizes = sizes or GenSizes()
    try:
        stream = gen_instances(env, env.constraints(), sizes, seed,
                               extra_ints=sorted(lits["int"]),
                               extra_strings=sorted(lits["string"]))
        for db in itertools.islice(stream, tries):
            if interp_query(q1, db, env) != interp_query(q2, db, env):
                return db
    except OracleError:
        return None
    return None


# ---------------------------------------------------------------------------
# Whole programs

def run_program_text(text: str, limits: Limits | None = None, **kw) -> list[VerifyOutcome]:
    program = parse(text)
    env = build_env(program)
    return run_program(program, env, limits, **kw)


def run_program(program: Program, env: SchemaEnv, limits: Limits | None = None,
                **kw) -> list[VerifyOutcome]:
    out = []
    for i, stmt in enumerate(program.verifies(), start=1):
        out.append(run_verify(stmt, f"verify{i}", env, limits, **kw))
    return out
