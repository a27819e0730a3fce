"""Finite-model evaluator: examples, constraint checking, generators."""

from __future__ import annotations

import itertools

import pytest

from semiq import build_env, parse
from semiq.oracle import (FiniteDb, GenSizes, OracleError, check_constraints,
                          enumerate_dbs, eval_exp, gen_instances,
                          make_assignment)
from semiq.schema import KeyConstraint, Schema
from semiq.translate import denote
from semiq.exprs import (AttrRef, Const, Mul, Not, Pred, PredApp, Rel, Squash,
                        Sum, TupleVar, VarGen, mk_eq)

SR = Schema("sr", (("k", "int"), ("a", "int")))


def _db(rows, domains=None, name="R"):
    domains = domains or {"int": (0, 1, 15), "bool": (False, True),
                          "string": ("x",)}
    return FiniteDb(domains, {name: {make_assignment(r): m for r, m in rows}})


def test_eval_filter_scan_by_hand():
    prog = parse("""
        schema sr(k:int, a:int);
        table R(sr);
        verify (SELECT * FROM R t WHERE t.a >= 12) R;
    """)
    env = build_env(prog)
    d = denote(prog.statements[-1].lhs, env, VarGen())
    db = _db([({"k": 1, "a": 15}, 1)])
    hit = make_assignment({"k": 1, "a": 15})
    miss = make_assignment({"k": 0, "a": 0})
    assert eval_exp(d.body, db, {d.out_var.vid: hit}) == 1
    assert eval_exp(d.body, db, {d.out_var.vid: miss}) == 0


def test_eval_relation_atom_on_empty_db():
    t = TupleVar(1, SR)
    db = _db([])
    asg = db.tuple_space(SR)[0]
    assert eval_exp(Rel("R", t), db, {t.vid: asg}) == 0


def test_squash_clamps_total_multiplicity():
    t = TupleVar(1, SR)
    db = _db([({"k": 0, "a": 0}, 3), ({"k": 1, "a": 0}, 4)])
    e = Squash(Sum(t, Rel("R", t)))
    assert eval_exp(Sum(t, Rel("R", t)), db) == 7
    assert eval_exp(e, db) == 1
    assert eval_exp(Not(Sum(t, Rel("R", t))), db) == 0


def test_unbound_variable_rejected():
    t = TupleVar(1, SR)
    with pytest.raises(OracleError):
        eval_exp(Rel("R", t), _db([]))


def test_space_cap_guard():
    wide = Schema("wide", tuple((f"a{i}", "int") for i in range(12)))
    db = FiniteDb({"int": (0, 1, 2)}, {})
    with pytest.raises(OracleError):
        db.tuple_space(wide)


def test_check_constraints_key_duplicate():
    key = KeyConstraint("R", ("k",))
    db = _db([({"k": 1, "a": 0}, 1), ({"k": 1, "a": 1}, 1)])
    assert not check_constraints(db, [key])
    db2 = _db([({"k": 1, "a": 0}, 1), ({"k": 2, "a": 1}, 1)])
    assert check_constraints(db2, [key])
    db3 = _db([({"k": 1, "a": 0}, 2)])
    assert not check_constraints(db3, [key])
    assert check_constraints(_db([]), [key])


def test_check_constraints_matches_key_identity():
    """check passes iff the key identity holds for all tuple pairs."""
    key = KeyConstraint("R", ("k",))
    t1, t2 = TupleVar(1, SR), TupleVar(2, SR)
    lhs = Mul(Mul(Pred(mk_eq(AttrRef(t1, "k"), AttrRef(t2, "k"))),
                  Rel("R", t1)), Rel("R", t2))
    from semiq.exprs import mk_tuple_eq
    rhs = Mul(Pred(mk_tuple_eq(t1, t2)), Rel("R", t1))
    domains = {"int": (0, 1), "bool": (False, True), "string": ("x",)}
    for db in enumerate_dbs_for(SR, domains):
        holds = all(
            eval_exp(lhs, db, {1: a1, 2: a2}) == eval_exp(rhs, db, {1: a1, 2: a2})
            for a1 in db.tuple_space(SR) for a2 in db.tuple_space(SR))
        assert holds == check_constraints(db, [key])


def enumerate_dbs_for(schema, domains, max_tuples=2, max_mult=2):
    probe = FiniteDb(domains, {})
    space = probe.tuple_space(schema)
    for k in range(max_tuples + 1):
        for support in itertools.combinations(space, k):
            for mults in itertools.product(range(1, max_mult + 1), repeat=k):
                yield FiniteDb(domains, {"R": dict(zip(support, mults))})


def test_check_constraints_fk():
    prog = parse("""
        schema sr(k:int, a:int);
        schema ss(j:int, f:int);
        table R(sr);
        table S(ss);
        key R(k);
        foreign key S(f) references R(k);
    """)
    env = build_env(prog)
    fk = env.fks[0]
    key = env.keys[0]
    base = {"int": (0, 1), "bool": (False, True), "string": ("x",)}
    ok = FiniteDb(base, {
        "R": {make_assignment({"k": 0, "a": 1}): 1},
        "S": {make_assignment({"j": 1, "f": 0}): 2},
    })
    assert check_constraints(ok, [key, fk])
    dangling = FiniteDb(base, {
        "R": {},
        "S": {make_assignment({"j": 1, "f": 0}): 1},
    })
    assert not check_constraints(dangling, [key, fk])


def test_gen_instances_deterministic_and_constraint_satisfying():
    prog = parse("""
        schema sr(k:int, a:int);
        schema ss(j:int, f:int);
        table R(sr);
        table S(ss);
        key R(k);
        foreign key S(f) references R(k);
    """)
    env = build_env(prog)
    run1 = [db.dump() for db in itertools.islice(
        gen_instances(env, env.constraints(), GenSizes(), seed=9), 10)]
    run2 = [db.dump() for db in itertools.islice(
        gen_instances(env, env.constraints(), GenSizes(), seed=9), 10)]
    assert run1 == run2
    for db in itertools.islice(gen_instances(env, env.constraints(),
                                             GenSizes(), seed=9), 10):
        assert check_constraints(db, env.constraints())


def test_gen_unsatisfiable_yields_empty_stream():
    # a key plus a foreign key from a wider table forces consistency; with a
    # self-referencing key on an always-duplicated setup we instead check
    # that the generator gives up cleanly when sizes make repair impossible
    prog = parse("""
        schema one(u:int);
        table U(one);
        key U(u);
    """)
    env = build_env(prog)
    dbs = list(itertools.islice(
        gen_instances(env, env.constraints(), GenSizes(domain=1, tuples=3, mult=3),
                      seed=1, count=5), 5))
    # repair enforces the key: every produced db satisfies it
    assert all(check_constraints(db, env.constraints()) for db in dbs)


def test_enumerate_dbs_counts():
    prog = parse("""
        schema one(u:int);
        table U(one);
    """)
    env = build_env(prog)
    dbs = list(enumerate_dbs(env, domain_size=1, max_tuples=1, max_mult=3))
    # unary relation over a single value: empty, or the one tuple at
    # multiplicity 1..3
    assert len(dbs) == 4


def test_uninterpreted_functions_deterministic():
    db = _db([])
    f = PredApp(">=", (Const(5, "int"), Const(3, "int")))
    t = TupleVar(1, SR)
    assert eval_exp(Pred(f), db, {}) == 1  # standard meaning on ints
    g1 = eval_exp(Pred(PredApp("mystery", (Const(1, "int"),))), db, {})
    g2 = eval_exp(Pred(PredApp("mystery", (Const(1, "int"),))), db, {})
    assert g1 == g2
