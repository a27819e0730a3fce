"""Sum-product normal form.

A normal expression is a sum of terms; each term is a single summation over
a product of predicate factors, at most one squash factor, at most one
negation factor, and relation atoms.  ``to_spnf`` reaches this shape by
repeatedly applying kernel identities (distribution, summation hoisting,
factor merging); every step is an ``apply_axiom`` call recorded in the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .axioms import AXIOMS, factor_sort_key, flatten_add, flatten_mul, rebuild_add, rebuild_mul
from .config import Budget
from .trace import Trace
from .exprs import (
    Add, AggCall, EqAtom, Func, Mul, NeqAtom, Not, One, Pred, PredApp,
    PredAtom, Rel, Squash, Sum, TupleEqAtom, TupleNeqAtom, TupleVar, Exp,
    VarGen, Zero, ZERO, ONE, canon_key, count_nodes, mk_eq, mk_neq, mk_record,
    mk_tuple_eq, mk_tuple_neq, pretty, substitute,
)


class SpnfError(Exception):
    pass


# ---------------------------------------------------------------------------
# Normal-form data types

@dataclass(frozen=True)
class Term:
    sum_vars: tuple[TupleVar, ...]
    preds: tuple[PredAtom, ...]
    squash: "SpnfExp | None"   # None encodes the omitted factor ||1||
    neg: "SpnfExp | None"      # None encodes the omitted factor not(0)
    atoms: tuple[tuple[str, TupleVar], ...]

    @staticmethod
    def make(sum_vars=(), preds=(), squash=None, neg=None, atoms=()) -> "Term":
        preds = tuple(sorted(preds, key=_atom_key))
        atoms = tuple(sorted(atoms, key=lambda a: (a[0], a[1].vid)))
        return Term(tuple(sum_vars), preds, squash, neg, atoms)

    def is_unit(self) -> bool:
        return not (self.sum_vars or self.preds or self.atoms
                    or self.squash is not None or self.neg is not None)

    def squash_only(self) -> bool:
        return (not self.sum_vars and not self.preds and not self.atoms
                and self.neg is None and self.squash is not None)

    def factors(self) -> list[Exp]:
        fs: list[Exp] = [Pred(p) for p in self.preds]
        if self.squash is not None:
            fs.append(Squash(self.squash.to_exp()))
        if self.neg is not None:
            fs.append(Not(self.neg.to_exp()))
        fs.extend(Rel(r, v) for r, v in self.atoms)
        return fs

    def to_exp(self) -> Exp:
        body = rebuild_mul(self.factors())
        for v in reversed(self.sum_vars):
            body = Sum(v, body)
        return body

    def all_vars(self) -> set[TupleVar]:
        from .exprs import free_vars
        return free_vars(self.to_exp()) | set(self.sum_vars)


@dataclass(frozen=True)
class SpnfExp:
    terms: tuple[Term, ...]

    @staticmethod
    def zero() -> "SpnfExp":
        return SpnfExp(())

    @staticmethod
    def one() -> "SpnfExp":
        return SpnfExp((Term.make(),))

    def to_exp(self) -> Exp:
        if not self.terms:
            return ZERO
        return rebuild_add([t.to_exp() for t in self.terms])

    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        return len(self.terms) == 1 and self.terms[0].is_unit()


def _atom_key(a: PredAtom) -> tuple:
    return canon_key(Pred(a))


# ---------------------------------------------------------------------------
# Binder uniquification (alpha steps; keeps hoisting capture-free)

def uniquify(e: Exp, gen: VarGen, trace: Trace | None = None) -> Exp:
    from .exprs import TupleCons
    seen: set[int] = set()

    def walk(x: Exp) -> Exp:
        if isinstance(x, (Zero, One, Rel)):
            return x
        if isinstance(x, Add):
            return Add(walk(x.lhs), walk(x.rhs))
        if isinstance(x, Mul):
            return Mul(walk(x.lhs), walk(x.rhs))
        if isinstance(x, Squash):
            return Squash(walk(x.body))
        if isinstance(x, Not):
            return Not(walk(x.body))
        if isinstance(x, Sum):
            body, var = x.body, x.var
            if var.vid in seen:
                fresh = gen.fresh(var.schema, var.hint)
                if trace:
                    trace.note("alpha-rename", f"{var}->{fresh}")
                body = substitute(body, var, fresh)
                var = fresh
            seen.add(var.vid)
            return Sum(var, walk(body))
        if isinstance(x, Pred):
            return Pred(walk_atom(x.atom))
        raise TypeError(x)

    def walk_scalar(s):
        if isinstance(s, Func):
            return Func(s.name, tuple(walk_scalar(x) for x in s.args))
        if isinstance(s, AggCall):
            var, body = s.var, s.body
            if var.vid in seen:
                fresh = gen.fresh(var.schema, var.hint)
                body = substitute(body, var, fresh)
                var = fresh
            seen.add(var.vid)
            return AggCall(s.name, var, walk(body))
        return s

    def walk_tuple(t):
        if isinstance(t, TupleCons):
            return mk_record({n: walk_scalar(s) for n, s in t.fields})
        return t

    def walk_atom(a: PredAtom) -> PredAtom:
        if isinstance(a, EqAtom):
            return mk_eq(walk_scalar(a.lhs), walk_scalar(a.rhs))
        if isinstance(a, NeqAtom):
            return mk_neq(walk_scalar(a.lhs), walk_scalar(a.rhs))
        if isinstance(a, PredApp):
            return PredApp(a.name, tuple(walk_scalar(s) for s in a.args))
        if isinstance(a, TupleEqAtom):
            return mk_tuple_eq(walk_tuple(a.lhs), walk_tuple(a.rhs))
        if isinstance(a, TupleNeqAtom):
            return mk_tuple_neq(walk_tuple(a.lhs), walk_tuple(a.rhs))
        raise TypeError(a)

    return walk(e)


# ---------------------------------------------------------------------------
# The normalizer

class Normalizer:
    def __init__(self, gen: VarGen, trace: Trace | None = None,
                 budget: Budget | None = None):
        self.gen = gen
        self.trace = trace or Trace(enabled=False)
        self.budget = budget or Budget()

    def app(self, axiom: str, node: Exp, path: str, **params) -> Exp:
        self.budget.step()
        out = AXIOMS[axiom](node, **params)
        self.trace.rule(axiom, path)
        return out

    def run(self, e: Exp) -> SpnfExp:
        e = uniquify(e, self.gen, self.trace)
        nf = self.nf(e, "")
        self.budget.check_nodes(count_nodes(nf))
        return parse_spnf(nf)

    # -- recursive normalization ------------------------------------------

    def nf(self, e: Exp, path: str) -> Exp:
        self.budget.step()
        if isinstance(e, (Zero, One, Rel)):
            return e
        if isinstance(e, Pred):
            return Pred(self._nf_atom(e.atom, path))
        if isinstance(e, Add):
            l = self.nf(e.lhs, path + "l.")
            r = self.nf(e.rhs, path + "r.")
            cur = Add(l, r)
            if isinstance(l, Zero) or isinstance(r, Zero):
                return self.app("add-zero", cur, path)
            return cur
        if isinstance(e, Sum):
            body = self.nf(e.body, path + "b.")
            return self._post_sum(e.var, body, path)
        if isinstance(e, Mul):
            l = self.nf(e.lhs, path + "l.")
            r = self.nf(e.rhs, path + "r.")
            return self._mul_nf(l, r, path)
        if isinstance(e, Squash):
            body = self.nf(e.body, path + "b.")
            return self._squash_nf(body, path)
        if isinstance(e, Not):
            body = self.nf(e.body, path + "b.")
            return self._not_nf(body, path)
        raise TypeError(e)

    def _nf_atom(self, a: PredAtom, path: str) -> PredAtom:
        def ws(s):
            if isinstance(s, Func):
                return Func(s.name, tuple(ws(x) for x in s.args))
            if isinstance(s, AggCall):
                return AggCall(s.name, s.var, self.nf(s.body, path + "agg."))
            return s
        if isinstance(a, EqAtom):
            return mk_eq(ws(a.lhs), ws(a.rhs))
        if isinstance(a, NeqAtom):
            return mk_neq(ws(a.lhs), ws(a.rhs))
        if isinstance(a, PredApp):
            return PredApp(a.name, tuple(ws(s) for s in a.args))
        return a

    def _post_sum(self, v: TupleVar, body: Exp, path: str) -> Exp:
        if isinstance(body, Zero):
            return self.app("sum-zero", Sum(v, body), path)
        if isinstance(body, Add):
            split = self.app("sum-add", Sum(v, body), path)
            return Add(self._post_sum(v, split.lhs.body, path + "l."),
                       self._post_sum(v, split.rhs.body, path + "r."))
        return Sum(v, body)

    def _mul_nf(self, l: Exp, r: Exp, path: str) -> Exp:
        cur = Mul(l, r)
        if isinstance(l, Zero) or isinstance(r, Zero):
            return self.app("mul-zero", cur, path)
        if isinstance(l, One) or isinstance(r, One):
            out = self.app("mul-one", cur, path)
            return out
        if isinstance(r, Add) or isinstance(l, Add):
            split = self.app("distr-mul-add", cur, path)
            return Add(self._mul_nf(split.lhs.lhs, split.lhs.rhs, path + "l."),
                       self._mul_nf(split.rhs.lhs, split.rhs.rhs, path + "r."))
        if isinstance(l, Sum):
            hoisted = self.app("sum-hoist", cur, path)
            return Sum(hoisted.var, self._mul_nf(hoisted.body.lhs, hoisted.body.rhs,
                                                 path + "b."))
        if isinstance(r, Sum):
            hoisted = self.app("sum-hoist", cur, path)
            return Sum(hoisted.var, self._mul_nf(hoisted.body.lhs, hoisted.body.rhs,
                                                 path + "b."))
        return self._merge_chain(flatten_mul(l) + flatten_mul(r), path)

    def _merge_chain(self, factors: list[Exp], path: str) -> Exp:
        squashes = [f for f in factors if isinstance(f, Squash)]
        if len(squashes) >= 2:
            rest = [f for f in factors if not isinstance(f, Squash)]
            self.trace.rule("squash-mul", path)
            self.budget.step()
            merged_body: Exp = squashes[0].body
            for s in squashes[1:]:
                merged_body = self._mul_nf(merged_body, s.body, path + "sq.")
            merged = self._squash_nf(merged_body, path + "sq.")
            return self._merge_chain(rest + [merged], path)
        nots = [f for f in factors if isinstance(f, Not)]
        if len(nots) >= 2:
            rest = [f for f in factors if not isinstance(f, Not)]
            self.trace.rule("pull-not", path)
            self.budget.step()
            merged = Not(rebuild_add([n.body for n in nots]))
            return self._merge_chain(rest + [merged], path)
        drop: list[Exp] = []
        for f in factors:
            if isinstance(f, Zero):
                return self.app("mul-zero", rebuild_mul(factors), path)
            if isinstance(f, One):
                self.trace.rule("mul-one", path)
                self.budget.step()
                continue
            if isinstance(f, (Add, Sum)):
                # a factor re-normalization re-exposed structure: restart
                return self.nf(rebuild_mul(factors), path)
            drop.append(f)
        factors = drop
        if not factors:
            return ONE
        ordered = sorted(factors, key=factor_sort_key)
        if ordered != factors:
            self.trace.rule("prod-comm", path)
            self.budget.step()
        if len(ordered) == 1:
            return ordered[0]
        return rebuild_mul(ordered)

    def _squash_nf(self, body: Exp, path: str) -> Exp:
        cur = Squash(body)
        if isinstance(body, Zero):
            return self.app("squash-zero", cur, path)
        if isinstance(body, One):
            return self.app("squash-one", cur, path)
        if isinstance(body, Squash):
            return self.app("squash-idem", cur, path)
        if isinstance(body, Not):
            return self.app("squash-not", cur, path)
        if isinstance(body, Pred):
            return self.app("pred-squash-elim", cur, path)
        if isinstance(body, Add):
            terms = flatten_add(body)
            if any(isinstance(t, One) for t in terms):
                return self.app("squash-one-plus", cur, path)
            if any(isinstance(t, Squash) for t in terms):
                lifted = self.app("squash-lift-add", cur, path)
                return self._squash_nf(lifted.body, path)
        return cur

    def _not_nf(self, body: Exp, path: str) -> Exp:
        cur = Not(body)
        if isinstance(body, Zero):
            return self.app("not-zero", cur, path)
        if isinstance(body, Squash):
            stripped = self.app("not-squash", cur, path)
            return self._not_nf(stripped.body, path)
        return cur


def to_spnf(e: Exp, gen: VarGen, trace: Trace | None = None,
            budget: Budget | None = None) -> SpnfExp:
    return Normalizer(gen, trace, budget).run(e)


# ---------------------------------------------------------------------------
# Parsing a normalized tree into the term structure

def parse_spnf(e: Exp) -> SpnfExp:
    if isinstance(e, Zero):
        return SpnfExp.zero()
    terms = []
    for t in flatten_add(e):
        terms.append(_parse_term(t))
    return SpnfExp(tuple(terms))


def _parse_term(e: Exp) -> Term:
    binders: list[TupleVar] = []
    while isinstance(e, Sum):
        binders.append(e.var)
        e = e.body
    preds: list[PredAtom] = []
    squash: SpnfExp | None = None
    neg: SpnfExp | None = None
    atoms: list[tuple[str, TupleVar]] = []
    if not isinstance(e, One):
        for f in flatten_mul(e):
            if isinstance(f, Pred):
                preds.append(f.atom)
            elif isinstance(f, Rel):
                atoms.append((f.name, f.var))
            elif isinstance(f, Squash):
                if squash is not None:
                    raise SpnfError("two squash factors survived normalization")
                squash = parse_spnf(f.body)
            elif isinstance(f, Not):
                if neg is not None:
                    raise SpnfError("two negation factors survived normalization")
                neg = parse_spnf(f.body)
            elif isinstance(f, One):
                continue
            else:
                raise SpnfError(f"unexpected factor {type(f).__name__} in normal form")
    return Term.make(binders, preds, squash, neg, atoms)


# ---------------------------------------------------------------------------
# Shape checking

def check_spnf(e: SpnfExp, outer_vars: frozenset[int] = frozenset()) -> bool:
    """True iff the term invariants hold syntactically."""
    try:
        _check(e, outer_vars)
        return True
    except SpnfError:
        return False


def _check(e: SpnfExp, outer: frozenset[int]) -> None:
    if not isinstance(e, SpnfExp):
        raise SpnfError("not a normal-form expression")
    for t in e.terms:
        vids = [v.vid for v in t.sum_vars]
        if len(set(vids)) != len(vids):
            raise SpnfError("duplicate summation variable")
        scope = outer | set(vids)
        for rel, v in t.atoms:
            if v.vid not in scope:
                raise SpnfError(f"atom {rel}({v}) references out-of-scope variable")
        from .exprs import atom_free_vars
        for p in t.preds:
            for v in atom_free_vars(p):
                if v.vid not in scope:
                    raise SpnfError("predicate references out-of-scope variable")
        if t.squash is not None:
            if t.squash.is_one():
                raise SpnfError("squash slot holding 1 must be omitted")
            _check(t.squash, frozenset(scope))
        if t.neg is not None:
            if t.neg.is_zero():
                raise SpnfError("negation slot holding 0 must be omitted")
            _check(t.neg, frozenset(scope))


# ---------------------------------------------------------------------------
# Term algebra used by canonization (products of normal forms)

def spnf_mul(a: SpnfExp, b: SpnfExp, gen: VarGen, trace: Trace | None = None,
             budget: Budget | None = None) -> SpnfExp:
    """Product of two normal forms, renormalized."""
    return to_spnf(Mul(a.to_exp(), b.to_exp()), gen, trace, budget)


def dissolve_squash(t: Term, gen: VarGen, trace: Trace | None = None,
                    budget: Budget | None = None) -> SpnfExp:
    """The term with its squash slot's content multiplied in as a plain
    factor (inside the binders, since the slot may reference them)."""
    base = replace(t, squash=None)
    factors = base.factors()
    if t.squash is not None:
        factors.append(t.squash.to_exp())
    body = rebuild_mul(factors)
    for v in reversed(t.sum_vars):
        body = Sum(v, body)
    return to_spnf(body, gen, trace, budget)


def term_without_squash(t: Term) -> Term:
    return replace(t, squash=None)


def pretty_spnf(e: SpnfExp, names: dict[int, str] | None = None) -> str:
    return pretty(e.to_exp(), names)
