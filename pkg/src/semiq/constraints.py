"""Canonization of normal-form expressions under integrity constraints.

Four interleaved passes run to a fixpoint on every term, recursively inside
squash and negation slots: transitive closure of equalities, elimination of
summations bound by an equality, the key-constraint collapse, and the
foreign-key expansion.  Terms whose square provably equals themselves are
additionally rewritten into their own squash (the key-guarded stability
rewrite), which lets set-level reasoning see through bag-level structure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import Budget, Limits
from .congruence import Closure, closure_of
from .schema import FkConstraint, KeyConstraint, SchemaEnv
from .spnf import SpnfExp, Term, dissolve_squash, parse_spnf
from .trace import Trace
from .exprs import (
    AggCall, AttrRef, EqAtom, Func, NeqAtom, Pred, PredApp, PredAtom,
    TupleCons, TupleEqAtom, TupleNeqAtom, TupleSlice, TupleVar, VarGen,
    _subst_atom, atom_free_vars, canon_key, mk_eq, mk_record, mk_tuple_eq,
    scalar_free_vars, scalar_sort_key, tuple_free_vars, tuple_sort_key,
)


def _is_reflexive(a: PredAtom) -> bool:
    return (isinstance(a, EqAtom) and a.lhs == a.rhs) or \
           (isinstance(a, TupleEqAtom) and a.lhs == a.rhs)


def subst_term(t: Term, v: TupleVar, repl) -> Term:
    """Substitute a (now unbound) variable throughout a term."""
    preds = []
    for p in t.preds:
        q = _subst_atom(p, v, repl)
        if _is_reflexive(q):
            continue
        preds.append(q)
    atoms = []
    for rel, w in t.atoms:
        if w == v:
            if not isinstance(repl, TupleVar):
                raise ValueError("cannot substitute a non-variable into a relation atom")
            atoms.append((rel, repl))
        else:
            atoms.append((rel, w))
    squash = subst_spnf(t.squash, v, repl) if t.squash is not None else None
    neg = subst_spnf(t.neg, v, repl) if t.neg is not None else None
    return Term.make(tuple(w for w in t.sum_vars if w != v), preds, squash, neg, atoms)


def subst_spnf(e: SpnfExp, v: TupleVar, repl) -> SpnfExp:
    return SpnfExp(tuple(subst_term(t, v, repl) for t in e.terms))


@dataclass
class ChaseReport:
    exhausted: bool = False
    fk_steps: int = 0


class Canonizer:
    def __init__(self, env: SchemaEnv, gen: VarGen, trace: Trace | None = None,
                 budget: Budget | None = None, limits: Limits | None = None,
                 squash_eq=None):
        self.env = env
        self.gen = gen
        self.trace = trace or Trace(enabled=False)
        self.budget = budget or Budget()
        self.limits = limits or Limits()
        self.squash_eq = squash_eq  # callback deciding equivalence of squashed forms
        self.report = ChaseReport()

    # -- public entry -------------------------------------------------------

    def canonize(self, e: SpnfExp, loc: str = "e", squash_ctx: bool = False,
                 wrap: bool = False) -> SpnfExp:
        return SpnfExp(tuple(
            self.canonize_term(t, f"{loc}/t{i}", squash_ctx, wrap)
            for i, t in enumerate(e.terms)))

    def canonize_term(self, t: Term, loc: str, squash_ctx: bool = False,
                      wrap: bool = False) -> Term:
        chase_rounds = 0
        fk_memo: set[tuple[int, int]] = set()
        while True:
            self.budget.step()
            t2, changed = self.saturate(t, loc)
            if changed:
                t = t2
                continue
            closure = closure_of(t.preds)
            t2 = self.try_eliminate(t, closure, loc)
            if t2 is not None:
                t = t2
                continue
            t2 = self.try_key(t, closure, loc)
            if t2 is not None:
                t = t2
                continue
            t2, chase_rounds = self.try_fk(t, closure, loc, squash_ctx,
                                           chase_rounds, fk_memo)
            if t2 is not None:
                t = t2
                continue
            if wrap and not squash_ctx:
                t2 = self.try_wrap(t, closure, loc)
                if t2 is not None:
                    t = t2
                    continue
            break
        t = self._canonize_agg_bodies(t, loc)
        if t.squash is not None and not t.squash.is_one():
            t = replace(t, squash=self.canonize(t.squash, loc + "/sq", True))
        if t.neg is not None and not t.neg.is_zero():
            t = replace(t, neg=self.canonize(t.neg, loc + "/not", False))
        return t

    # -- pass 1: transitive closure of equalities ----------------------------

    def saturate(self, t: Term, loc: str) -> tuple[Term, bool]:
        closure = closure_of(t.preds)
        new_preds: list[PredAtom] = []
        seen: set = set()
        for p in t.preds:
            if isinstance(p, (EqAtom, TupleEqAtom)) or _is_reflexive(p):
                continue
            key = canon_key(Pred(p))
            if key in seen:
                continue
            seen.add(key)
            new_preds.append(p)
        for members in closure.scalar_classes().values():
            ms = sorted(members, key=scalar_sort_key)
            for i in range(len(ms)):
                for j in range(i + 1, len(ms)):
                    if ms[i] == ms[j]:
                        continue
                    new_preds.append(mk_eq(ms[i], ms[j]))
        for members in closure.tuple_classes().values():
            uniq = []
            for m in sorted(members, key=tuple_sort_key):
                if m not in uniq:
                    uniq.append(m)
            for i in range(len(uniq)):
                for j in range(i + 1, len(uniq)):
                    new_preds.append(mk_tuple_eq(uniq[i], uniq[j]))
        out = Term.make(t.sum_vars, new_preds, t.squash, t.neg, t.atoms)
        changed = set(out.preds) != set(t.preds)
        if changed:
            added = len(set(out.preds) - set(t.preds))
            for _ in range(added):
                self.trace.rule("eq-trans", loc)
        return out, changed

    # -- pass 2: summation elimination ---------------------------------------

    def try_eliminate(self, t: Term, closure: Closure, loc: str) -> Term | None:
        slice_bases = _slice_bases(t)
        for v in t.sum_vars:
            repl = self._whole_tuple_candidate(t, closure, v, slice_bases)
            if repl is not None:
                out = subst_term(t, v, repl)
                self.trace.rule("sum-elim-eq", loc)
                return out
            repl = self._coverage_candidate(t, closure, v, slice_bases)
            if repl is not None:
                out = subst_term(t, v, repl)
                self.trace.rule("sum-elim-cover", loc)
                return out
        return None

    def _whole_tuple_candidate(self, t: Term, closure: Closure, v: TupleVar,
                               slice_bases: set[int]):
        rep = closure.tuple_rep(v)
        members = [m for m in closure.tuple_classes().get(rep, []) if m != v]
        in_atoms = any(w == v for _, w in t.atoms)
        candidates = []
        for m in members:
            if v in tuple_free_vars(m):
                continue
            if isinstance(m, TupleVar):
                candidates.append((0 if m not in t.sum_vars else 1, tuple_sort_key(m), m))
            elif isinstance(m, TupleCons):
                if in_atoms or v.vid in slice_bases:
                    continue
                candidates.append((2, tuple_sort_key(m), m))
            elif isinstance(m, TupleSlice):
                if in_atoms or v.vid in slice_bases:
                    continue
                candidates.append((3, tuple_sort_key(m), m))
        if not candidates:
            return None
        return min(candidates)[2]

    def _coverage_candidate(self, t: Term, closure: Closure, v: TupleVar,
                            slice_bases: set[int]):
        sch = v.schema
        if sch.generic or not sch.attrs:
            return None
        # a variable of the same schema agreeing on every attribute
        # determines v outright (and may replace it inside relation atoms)
        others = sorted({w for w in _term_vars(t)
                         if w.vid != v.vid and w.schema == sch},
                        key=lambda w: (w in t.sum_vars, w.vid))
        for w in others:
            if all(closure.scalar_eq(AttrRef(v, a), AttrRef(w, a))
                   for a in sch.attr_names()):
                return w
        if any(w == v for _, w in t.atoms) or v.vid in slice_bases:
            return None
        fields = {}
        for a in sch.attr_names():
            rep = closure.scalar_rep(AttrRef(v, a))
            cands = [s for s in closure.scalar_classes().get(rep, [])
                     if s != AttrRef(v, a) and v not in scalar_free_vars(s)]
            if not cands:
                return None
            fields[a] = min(cands, key=scalar_sort_key)
        return mk_record(fields)

    # -- pass 3: key collapse --------------------------------------------------

    def try_key(self, t: Term, closure: Closure, loc: str) -> Term | None:
        for key in self.env.keys:
            idxs = [i for i, (rel, _) in enumerate(t.atoms) if rel == key.relation]
            for ai in range(len(idxs)):
                for bi in range(ai + 1, len(idxs)):
                    i, j = idxs[ai], idxs[bi]
                    u, w = t.atoms[i][1], t.atoms[j][1]
                    if u == w:
                        atoms = list(t.atoms)
                        del atoms[j]
                        self.trace.rule("key-idem", loc)
                        return Term.make(t.sum_vars, t.preds, t.squash, t.neg, atoms)
                    if all(closure.scalar_eq(AttrRef(u, a), AttrRef(w, a))
                           for a in key.attrs):
                        atoms = list(t.atoms)
                        del atoms[j]
                        preds = list(t.preds) + [mk_tuple_eq(u, w)]
                        self.trace.rule("key-collapse", loc)
                        return Term.make(t.sum_vars, preds, t.squash, t.neg, atoms)
        return None

    # -- pass 4: foreign-key expansion ------------------------------------------

    def try_fk(self, t: Term, closure: Closure, loc: str, squash_ctx: bool,
               chase_rounds: int, fk_memo: set) -> tuple[Term | None, int]:
        names = {rel for rel, _ in t.atoms}
        for fi, fk in enumerate(self.env.fks):
            sources = [var for rel, var in t.atoms if rel == fk.source]
            if not sources:
                continue
            if fk.target not in names:
                # expand every source atom in one batch: which atom gets the
                # new relation must not depend on variable numbering, or
                # isomorphic terms would canonize differently
                if chase_rounds >= self.limits.chase_depth:
                    self._report_exhausted(loc)
                    return None, chase_rounds
                expanded = t
                for var in sources:
                    expanded = self._expand_fk(expanded, fk, var)
                    fk_memo.add((fi, var.vid))
                    self.trace.rule("fk-expand", loc)
                    self.report.fk_steps += 1
                return expanded, chase_rounds + 1
            if not (squash_ctx and self.squash_eq):
                continue
            for var in sources:
                memo_key = (fi, var.vid)
                if memo_key in fk_memo:
                    continue
                if chase_rounds >= self.limits.chase_depth:
                    self._report_exhausted(loc)
                    return None, chase_rounds
                expanded = self._expand_fk(t, fk, var)
                # only informative if it changes the squashed value
                fk_memo.add(memo_key)
                if self.squash_eq(SpnfExp((t,)), SpnfExp((expanded,))):
                    continue
                self.trace.rule("fk-expand", loc)
                self.report.fk_steps += 1
                return expanded, chase_rounds + 1
        return None, chase_rounds

    def _report_exhausted(self, loc: str) -> None:
        if not self.report.exhausted:
            self.report.exhausted = True
            self.trace.note("chase-budget-exhausted", loc)

    def _expand_fk(self, t: Term, fk: FkConstraint, src_var: TupleVar) -> Term:
        tgt_schema = self.env.table_schema(fk.target)
        nv = self.gen.fresh(tgt_schema)
        preds = list(t.preds) + [
            mk_eq(AttrRef(nv, ka), AttrRef(src_var, sa))
            for ka, sa in zip(fk.target_attrs, fk.source_attrs)]
        atoms = list(t.atoms) + [(fk.target, nv)]
        return Term.make(t.sum_vars + (nv,), preds, t.squash, t.neg, atoms)

    # -- pass 5: key-guarded squash stability --------------------------------------

    def squash_stable(self, t: Term, closure: Closure) -> bool:
        """T equals its own squash: every factor is idempotent and every
        duplicated summation collapses via a key-bound relation atom."""
        if t.squash_only() or t.is_unit():
            return False
        by_var: dict[int, list[str]] = {}
        for rel, v in t.atoms:
            by_var.setdefault(v.vid, []).append(rel)
        sum_ids = {v.vid for v in t.sum_vars}
        for vid, rels in by_var.items():
            if vid in sum_ids:
                if len(rels) != 1:
                    return False
            else:
                if any(not self.env.keys_of(r) for r in rels):
                    return False
        determined: set[int] = set()
        pending = [v for v in t.sum_vars]
        for v in pending:
            if v.vid not in by_var:
                return False
        progress = True
        while progress and pending:
            progress = False
            undetermined = {v.vid for v in pending}
            for v in list(pending):
                rel = by_var[v.vid][0]
                for key in self.env.keys_of(rel):
                    if self._key_bound(v, key, closure, undetermined):
                        determined.add(v.vid)
                        pending.remove(v)
                        progress = True
                        break
        return not pending

    def _key_bound(self, v: TupleVar, key: KeyConstraint, closure: Closure,
                   undetermined: set[int]) -> bool:
        blocked = undetermined | {v.vid}
        for a in key.attrs:
            rep = closure.scalar_rep(AttrRef(v, a))
            ok = False
            for s in closure.scalar_classes().get(rep, []):
                if s == AttrRef(v, a):
                    continue
                if not any(w.vid in blocked for w in scalar_free_vars(s)):
                    ok = True
                    break
            if not ok:
                return False
        return True

    def try_wrap(self, t: Term, closure: Closure, loc: str) -> Term | None:
        if not self.squash_stable(t, closure):
            return None
        content = dissolve_squash(t, self.gen, self.trace, self.budget)
        if content.is_one() or content.is_zero():
            return None
        self.trace.rule("key-squash-stable", loc)
        return Term.make((), (), content, None, ())

    # -- aggregate bodies -------------------------------------------------------

    def _canonize_agg_bodies(self, t: Term, loc: str) -> Term:
        if not any(isinstance(s, AggCall) for p in t.preds for s in _atom_aggs(p)):
            return t
        preds = tuple(_map_atom_aggs(p, lambda ag: AggCall(
            ag.name, ag.var,
            self.canonize(parse_spnf(ag.body), loc + "/agg").to_exp()))
            for p in t.preds)
        return Term.make(t.sum_vars, preds, t.squash, t.neg, t.atoms)


def _term_vars(t: Term) -> list[TupleVar]:
    seen: dict[int, TupleVar] = {}

    def scan(term: Term):
        for v in term.sum_vars:
            seen.setdefault(v.vid, v)
        for _, w in term.atoms:
            seen.setdefault(w.vid, w)
        for p in term.preds:
            for w in atom_free_vars(p):
                seen.setdefault(w.vid, w)
        for slot in (term.squash, term.neg):
            if slot is not None:
                for sub in slot.terms:
                    scan(sub)

    scan(t)
    return [seen[k] for k in sorted(seen)]


def _slice_bases(t: Term) -> set[int]:
    out: set[int] = set()

    def scan_atom(p: PredAtom):
        if isinstance(p, (TupleEqAtom, TupleNeqAtom)):
            for side in (p.lhs, p.rhs):
                if isinstance(side, TupleSlice):
                    out.add(side.var.vid)

    def scan_exp(e: SpnfExp):
        for term in e.terms:
            for p in term.preds:
                scan_atom(p)
            if term.squash is not None:
                scan_exp(term.squash)
            if term.neg is not None:
                scan_exp(term.neg)

    scan_exp(SpnfExp((t,)))
    return out


def _atom_aggs(p: PredAtom):
    def rec(s):
        if isinstance(s, AggCall):
            yield s
        elif isinstance(s, Func):
            for a in s.args:
                yield from rec(a)
    if isinstance(p, (EqAtom, NeqAtom)):
        yield from rec(p.lhs)
        yield from rec(p.rhs)
    elif isinstance(p, PredApp):
        for s in p.args:
            yield from rec(s)


def _map_atom_aggs(p: PredAtom, f):
    def rec(s):
        if isinstance(s, AggCall):
            return f(s)
        if isinstance(s, Func):
            return Func(s.name, tuple(rec(a) for a in s.args))
        return s
    if isinstance(p, EqAtom):
        return mk_eq(rec(p.lhs), rec(p.rhs))
    if isinstance(p, NeqAtom):
        from .exprs import mk_neq
        return mk_neq(rec(p.lhs), rec(p.rhs))
    if isinstance(p, PredApp):
        return PredApp(p.name, tuple(rec(s) for s in p.args))
    return p


# -- spec-level convenience wrappers -------------------------------------------

def saturate_equalities(t: Term, env: SchemaEnv | None = None) -> Term:
    c = Canonizer(env or SchemaEnv(), VarGen(10_000))
    out, _ = c.saturate(t, "t")
    return out


def eliminate_sums(t: Term, env: SchemaEnv | None = None) -> Term:
    c = Canonizer(env or SchemaEnv(), VarGen(10_000))
    while True:
        t, _ = c.saturate(t, "t")
        nxt = c.try_eliminate(t, closure_of(t.preds), "t")
        if nxt is None:
            return t
        t = nxt


def apply_key(t: Term, key: KeyConstraint, env: SchemaEnv | None = None) -> Term:
    env = env or SchemaEnv()
    c = Canonizer(env, VarGen(10_000))
    c.env = SchemaEnv(schemas=env.schemas, tables=env.tables, keys=[key],
                      fks=[], views=env.views)
    while True:
        t, _ = c.saturate(t, "t")
        nxt = c.try_key(t, closure_of(t.preds), "t")
        if nxt is None:
            return t
        t = nxt


def apply_fk(e: SpnfExp, fk: FkConstraint, env: SchemaEnv, mode: str = "general",
             gen: VarGen | None = None, squash_eq=None,
             limits: Limits | None = None) -> SpnfExp:
    env2 = SchemaEnv(schemas=env.schemas, tables=env.tables, keys=list(env.keys),
                     fks=[fk], views=env.views)
    c = Canonizer(env2, gen or VarGen(10_000), limits=limits,
                  squash_eq=squash_eq if mode == "squash-context" else None)
    out_terms = []
    for i, t in enumerate(e.terms):
        rounds = 0
        memo: set = set()
        while True:
            t, _ = c.saturate(t, f"t{i}")
            nxt, rounds = c.try_fk(t, closure_of(t.preds), f"t{i}",
                                   mode == "squash-context", rounds, memo)
            if nxt is None:
                break
            t = nxt
        out_terms.append(t)
    return SpnfExp(tuple(out_terms))
