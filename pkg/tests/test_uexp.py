"""Expression algebra: substitution, alpha-comparison, printing."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from semiq.schema import Schema
from semiq.translate import denote
from semiq.exprs import (AttrRef, Mul, Pred, Rel, SubstError, Sum, TupleVar,
                        VarGen, alpha_equal, mk_eq, mk_record, mk_tuple_eq,
                        pretty, substitute)

from helpers import gen_uexp, std_env


S = Schema("s", (("a", "int"), ("b", "int")))


def _vars(*vids):
    return [TupleVar(v, S) for v in vids]


def test_substitute_free_variable():
    t2, t, u = _vars(2, 10, 11)
    e = Sum(t2, Mul(Pred(mk_tuple_eq(t2, t)), Rel("R", t2)))
    out = substitute(e, t, u)
    assert out == Sum(t2, Mul(Pred(mk_tuple_eq(t2, u)), Rel("R", t2)))


def test_substitute_identity():
    t2, t = _vars(2, 10)
    e = Sum(t2, Mul(Pred(mk_tuple_eq(t2, t)), Rel("R", t2)))
    assert substitute(e, t, t) == e


def test_substitute_record_rewrites_attribute_refs():
    # replacing a variable by a record turns its attribute references into
    # the record's field expressions
    t1, t2, t3 = _vars(1, 2, 3)
    e = Mul(Pred(mk_eq(AttrRef(t1, "a"), AttrRef(t2, "a"))),
            Pred(mk_eq(AttrRef(t1, "b"), AttrRef(t2, "b"))))
    rec = mk_record({"a": AttrRef(t3, "a"), "b": AttrRef(t3, "b")})
    out = substitute(e, t1, rec)
    assert out == Mul(Pred(mk_eq(AttrRef(t3, "a"), AttrRef(t2, "a"))),
                      Pred(mk_eq(AttrRef(t3, "b"), AttrRef(t2, "b"))))


def test_substitute_rejects_record_into_relation_atom():
    t1, t3 = _vars(1, 3)
    rec = mk_record({"a": AttrRef(t3, "a"), "b": AttrRef(t3, "b")})
    with pytest.raises(SubstError):
        substitute(Rel("R", t1), t1, rec)


def test_substitute_schema_mismatch_rejected():
    t = TupleVar(1, S)
    other = TupleVar(2, Schema("w", (("z", "int"),)))
    with pytest.raises(SubstError):
        substitute(Rel("R", t), t, other)


def test_alpha_equal_bound_rename():
    t1, u = _vars(1, 5)
    assert alpha_equal(Sum(t1, Rel("R", t1)), Sum(u, Rel("R", u)))
    assert not alpha_equal(Sum(t1, Rel("R", t1)), Sum(t1, Rel("S", t1)))


def test_alpha_equal_orients_symmetric_atoms():
    t1, t2 = _vars(1, 2)
    e1 = Pred(mk_eq(AttrRef(t1, "a"), AttrRef(t2, "b")))
    e2 = Pred(mk_eq(AttrRef(t2, "b"), AttrRef(t1, "a")))
    assert alpha_equal(e1, e2)


def test_alpha_equal_after_fresh_regeneration():
    # denote the same query twice with different variable supplies
    from conftest import parse_query
    env = std_env()
    q = parse_query("SELECT DISTINCT x.a AS a FROM R x, S y WHERE x.a = y.b")
    d1 = denote(q, env, VarGen(1))
    d2 = denote(q, env, VarGen(101))
    assert alpha_equal(d1.body, d2.body, pairs=[(d1.out_var, d2.out_var)])


def test_alpha_distinguishes_free_variables():
    t1, t2 = _vars(1, 2)
    assert not alpha_equal(Rel("R", t1), Rel("R", t2))
    assert alpha_equal(Rel("R", t1), Rel("R", t2), pairs=[(t1, t2)])


def test_pretty_deterministic_numbering():
    u, w, t = _vars(7, 9, 42)
    e = Sum(u, Sum(w, Mul(Mul(Pred(mk_tuple_eq(u, t)), Rel("R", u)), Rel("R", w))))
    s1 = pretty(e, {t.vid: "t"})
    assert s1 == "sum{t1,t2} [t = t1] * R(t1) * R(t2)"
    # same numbering regardless of original ids
    u2, w2 = _vars(70, 90)
    e2 = Sum(u2, Sum(w2, Mul(Mul(Pred(mk_tuple_eq(u2, t)), Rel("R", u2)), Rel("R", w2))))
    assert pretty(e2, {t.vid: "t"}) == s1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_alpha_equal_reflexive_on_random_expressions(seed):
    rng = random.Random(seed)
    env = std_env()
    out = TupleVar(0, env.tables["R"], "t")
    e = gen_uexp(rng, env, out, depth=3)
    assert alpha_equal(e, e)
