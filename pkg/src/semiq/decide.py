"""Equivalence decision procedures.

``equivalent`` canonizes two normal forms and searches for a permutation
matching their terms pairwise.  ``match_terms`` matches one term pair under
a bijection of summation variables: congruent predicates, equivalent squash
parts (``squash_equal``), equivalent negation parts (recursively), identical
relation atoms.  ``squash_equal`` compares squashed expressions set-style:
dissolve nested squashes, canonize, minimize each term, then require mutual
coverage.  Minimization collapses a summation variable onto another variable
whenever a self-homomorphism justifies it, logging the equational recipe for
each collapse.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import Budget, Limits
from .congruence import Closure, closure_of, congruent_preds, implies_atom
from .constraints import Canonizer, subst_term, _is_reflexive
from .schema import SchemaEnv
from .spnf import SpnfExp, Term, dissolve_squash
from .trace import Trace
from .exprs import TupleVar, VarGen, atom_free_vars, _subst_atom

EQUIVALENT = "EQUIVALENT"
NOT_EQUIVALENT = "NOT_EQUIVALENT"
NOT_PROVED = "NOT_PROVED"
RESOURCE_EXHAUSTED = "RESOURCE_EXHAUSTED"

UCQ_BAG = "ucq-bag"
UCQ_SET = "ucq-set"
GENERAL = "general"


@dataclass
class Verdict:
    status: str
    fragment: str
    trace: Trace | None = None
    steps: int = 0
    detail: str = ""

    @property
    def equivalent(self) -> bool:
        return self.status == EQUIVALENT


class Decider:
    def __init__(self, env: SchemaEnv, gen: VarGen, trace: Trace | None = None,
                 budget: Budget | None = None, limits: Limits | None = None):
        self.env = env
        self.gen = gen
        self.trace = trace or Trace(enabled=False)
        self.budget = budget or Budget(limits)
        self.limits = limits or Limits()
        self._squash_depth = 0
        self.canonizer = Canonizer(env, gen, self.trace, self.budget,
                                   self.limits, squash_eq=self._squash_eq)

    # -- callbacks ---------------------------------------------------------

    def _squash_eq(self, a: SpnfExp, b: SpnfExp) -> bool:
        if self._squash_depth >= 2:
            return True  # stop chasing; always sound
        self._squash_depth += 1
        try:
            return self.squash_equal(a, b)
        finally:
            self._squash_depth -= 1

    # -- expression-level decision ------------------------------------------

    def equivalent(self, e1: SpnfExp, e2: SpnfExp) -> bool:
        self.budget.step()
        c1 = self.canonizer.canonize(e1, "L")
        c2 = self.canonizer.canonize(e2, "R")
        if self._perm_search(c1, c2):
            return True
        if not self.env.keys:
            return False
        # retry with key-guarded squash stability: terms provably equal to
        # their own squash are rewritten into squashed form on both sides
        w1 = self.canonizer.canonize(c1, "L", wrap=True)
        w2 = self.canonizer.canonize(c2, "R", wrap=True)
        if (w1, w2) == (c1, c2):
            return False
        return self._perm_search(w1, w2)

    def _perm_search(self, c1: SpnfExp, c2: SpnfExp) -> bool:
        if len(c1.terms) != len(c2.terms):
            return False
        n = len(c1.terms)
        if n == 0:
            return True
        sig1 = [term_signature(t) for t in c1.terms]
        sig2 = [term_signature(t) for t in c2.terms]
        if sorted(sig1) != sorted(sig2):
            return False
        candidates = [[i for i in range(n) if sig1[i] == sig2[j]] for j in range(n)]
        order = sorted(range(n), key=lambda j: len(candidates[j]))
        assignment: dict[int, int] = {}
        used: set[int] = set()

        def backtrack(k: int) -> bool:
            self.budget.step()
            if k == n:
                return True
            j = order[k]
            for i in candidates[j]:
                if i in used:
                    continue
                if self.match_terms(c1.terms[i], c2.terms[j]):
                    used.add(i)
                    assignment[j] = i
                    if backtrack(k + 1):
                        return True
                    used.discard(i)
                    del assignment[j]
            return False

        if backtrack(0):
            self.trace.permutation([assignment[j] for j in range(n)])
            return True
        return False

    # -- term-level matching ------------------------------------------------

    def match_terms(self, t1: Term, t2: Term) -> bool:
        self.budget.step()
        if len(t1.sum_vars) != len(t2.sum_vars):
            return False
        rels1 = sorted(r for r, _ in t1.atoms)
        rels2 = sorted(r for r, _ in t2.atoms)
        if rels1 != rels2:
            return False
        links1 = _EqualityLinks(t1)
        links2 = _EqualityLinks(t2)
        vsig1 = {v.vid: _var_signature(t1, v) + links1.unary(v)
                 for v in t1.sum_vars}
        vsig2 = {v.vid: _var_signature(t2, v) + links2.unary(v)
                 for v in t2.sum_vars}
        cand = {v2.vid: [v1 for v1 in t1.sum_vars if vsig1[v1.vid] == vsig2[v2.vid]]
                for v2 in t2.sum_vars}
        if any(not c for c in cand.values()):
            return False
        order = sorted(t2.sum_vars, key=lambda v: (len(cand[v.vid]), v.vid))
        mapping: list[tuple[TupleVar, TupleVar]] = []
        used: set[int] = set()

        def backtrack(k: int) -> bool:
            self.budget.step()
            if k == len(order):
                return self._term_check(t1, t2, list(mapping))
            v2 = order[k]
            for v1 in cand[v2.vid]:
                if v1.vid in used:
                    continue
                # attribute-equality links to already-placed variables must
                # agree; every valid bijection preserves them
                if any(links2.binary(v2, w2) != links1.binary(v1, w1)
                       for w2, w1 in mapping):
                    continue
                used.add(v1.vid)
                mapping.append((v2, v1))
                if backtrack(k + 1):
                    return True
                mapping.pop()
                used.discard(v1.vid)
            return False

        return backtrack(0)

    def _term_check(self, t1: Term, t2: Term,
                   mapping: list[tuple[TupleVar, TupleVar]]) -> bool:
        t2p = t2
        for v2, v1 in mapping:
            t2p = subst_term(t2p, v2, v1)
        if sorted((r, v.vid) for r, v in t1.atoms) != \
           sorted((r, v.vid) for r, v in t2p.atoms):
            return False
        if not congruent_preds(t1.preds, t2p.preds):
            return False
        s1, s2 = t1.squash, t2p.squash
        if s1 is not None or s2 is not None:
            if not self.squash_equal(s1 or SpnfExp.one(), s2 or SpnfExp.one()):
                return False
        n1, n2 = t1.neg, t2p.neg
        if n1 is not None or n2 is not None:
            if not self._perm_search(
                    self.canonizer.canonize(n1 or SpnfExp.zero(), "Ln"),
                    self.canonizer.canonize(n2 or SpnfExp.zero(), "Rn")):
                return False
        self.trace.bijection([(str(v2), str(v1)) for v2, v1 in mapping])
        return True

    # -- squashed-expression comparison -------------------------------------

    def squash_equal(self, s1: SpnfExp, s2: SpnfExp) -> bool:
        self.budget.step()
        if s1 == s2:
            return True
        f1 = self.flatten(s1, "Lsq")
        f2 = self.flatten(s2, "Rsq")
        c1 = self.canonizer.canonize(f1, "Lsq", squash_ctx=True)
        c2 = self.canonizer.canonize(f2, "Rsq", squash_ctx=True)
        m1 = [self.minimize(t) for t in c1.terms]
        m2 = [self.minimize(t) for t in c2.terms]
        for t in m1:
            if not any(self.match_terms(t, u) for u in m2):
                return False
        for u in m2:
            if not any(self.match_terms(u, t) for t in m1):
                return False
        return True

    def flatten(self, e: SpnfExp, loc: str) -> SpnfExp:
        """Dissolve squash factors of terms sitting under an outer squash."""
        out: list[Term] = []
        for t in e.terms:
            if t.squash is None:
                out.append(t)
                continue
            flat_slot = self.flatten(t.squash, loc)
            self.trace.rule("squash-flatten", loc)
            merged = dissolve_squash(replace(t, squash=flat_slot), self.gen,
                                     self.trace, self.budget)
            out.extend(self.flatten(merged, loc).terms)
        return SpnfExp(tuple(out))

    # -- term minimization --------------------------------------------------------

    def minimize(self, t: Term, loc: str = "min") -> Term:
        if t.squash is not None:
            raise ValueError("minimize expects a squash-dissolved term")
        deduped = tuple(sorted(set(t.atoms), key=lambda a: (a[0], a[1].vid)))
        if len(deduped) != len(t.atoms):
            # a duplicated factor under the squash collapses to one copy
            self.trace.rule("squash-square", loc)
            t = Term.make(t.sum_vars, t.preds, None, t.neg, deduped)
        changed = True
        while changed:
            changed = False
            closure = closure_of(t.preds)
            neg_vids = _neg_vids(t)
            free = _free_tuple_vars(t)
            for v in t.sum_vars:
                if v.vid in neg_vids:
                    continue
                targets = sorted(
                    [w for w in free if w.schema == v.schema] +
                    [w for w in t.sum_vars
                     if w.vid != v.vid and w.schema == v.schema
                     and w.vid not in neg_vids],
                    key=lambda w: w.vid)
                for target in targets:
                    if self._hom_ok(t, closure, v, target):
                        t = self._collapse(t, v, target, loc)
                        changed = True
                        break
                if changed:
                    break
        return t

    def _hom_ok(self, t: Term, closure: Closure, v: TupleVar,
                target: TupleVar) -> bool:
        self.budget.step()
        atom_set = set(t.atoms)
        for rel, w in t.atoms:
            if w.vid == v.vid and (rel, target) not in atom_set:
                return False
        for p in t.preds:
            if v not in atom_free_vars(p):
                continue
            q = _subst_atom(p, v, target)
            if _is_reflexive(q):
                continue
            if not implies_atom(closure, t.preds, q):
                return False
        return True

    def _collapse(self, t: Term, v: TupleVar, target: TupleVar, loc: str) -> Term:
        self.trace.rule("excluded-middle", loc)
        self.trace.rule("distr-mul-add", loc)
        self.trace.rule("sum-elim-eq", loc)
        nt = subst_term(t, v, target)
        atoms = sorted(set(nt.atoms), key=lambda a: (a[0], a[1].vid))
        if len(atoms) != len(nt.atoms):
            self.trace.rule("squash-square", loc)
        preds = []
        for p in nt.preds:
            if p not in preds:
                preds.append(p)
        self.trace.rule("sum-add", loc)
        self.trace.rule("squash-one-plus", loc)
        return Term.make(nt.sum_vars, preds, None, nt.neg, atoms)


class _EqualityLinks:
    """Attribute-equality structure of one term's closure, keyed so that it
    is invariant under any bijection of summation variables: which attribute
    pairs of two variables share a class, and which grounded terms (over
    free variables and constants only) each attribute equals."""

    def __init__(self, t: Term):
        from .congruence import closure_of
        from .exprs import AttrRef, canon_key, Pred, mk_eq, scalar_free_vars
        closure = closure_of(t.preds)
        sum_ids = {v.vid for v in t.sum_vars}
        self._by_rep: dict[int, list[tuple[int, str]]] = {}
        self._ground: dict[int, list] = {}
        self._attr_rep: dict[tuple[int, str], int] = {}
        attrs_of = {}
        for v in t.sum_vars:
            attrs_of[v.vid] = tuple(sorted(v.schema.attr_names()))
            for a in attrs_of[v.vid]:
                rep = closure.scalar_rep(AttrRef(v, a))
                self._attr_rep[(v.vid, a)] = rep
                self._by_rep.setdefault(rep, []).append((v.vid, a))
        for rep, members in closure.scalar_classes().items():
            grounded = sorted(
                canon_key(Pred(mk_eq(m, m)))
                for m in members
                if not any(w.vid in sum_ids for w in scalar_free_vars(m)))
            if grounded:
                self._ground[rep] = grounded
        self._attrs_of = attrs_of

    def unary(self, v) -> tuple:
        out = []
        for a in self._attrs_of.get(v.vid, ()):
            rep = self._attr_rep[(v.vid, a)]
            out.append((a, tuple(self._ground.get(rep, ()))))
        return tuple(out)

    def binary(self, v, w) -> tuple:
        out = []
        for a in self._attrs_of.get(v.vid, ()):
            rep = self._attr_rep[(v.vid, a)]
            for (wid, b) in self._by_rep.get(rep, ()):
                if wid == w.vid:
                    out.append((a, b))
        return tuple(sorted(out))


def term_signature(t: Term) -> tuple:
    return (len(t.sum_vars),
            tuple(sorted(r for r, _ in t.atoms)),
            t.squash is not None,
            t.neg is not None)


def _var_signature(t: Term, v: TupleVar) -> tuple:
    from .schema import footprint_key
    rels = tuple(sorted(r for r, w in t.atoms if w.vid == v.vid))
    in_squash = t.squash is not None and _exp_mentions(t.squash, v)
    in_neg = t.neg is not None and _exp_mentions(t.neg, v)
    return (footprint_key(v.schema), rels, in_squash, in_neg)


def _exp_mentions(e: SpnfExp, v: TupleVar) -> bool:
    for t in e.terms:
        if any(w.vid == v.vid for _, w in t.atoms):
            return True
        if any(v in atom_free_vars(p) for p in t.preds):
            return True
        if t.squash is not None and _exp_mentions(t.squash, v):
            return True
        if t.neg is not None and _exp_mentions(t.neg, v):
            return True
    return False


def _free_tuple_vars(t: Term) -> list[TupleVar]:
    bound = {v.vid for v in t.sum_vars}
    seen: dict[int, TupleVar] = {}

    def add(v: TupleVar):
        if v.vid not in bound and v.vid not in seen:
            seen[v.vid] = v

    def scan_term(term: Term, extra_bound: set[int]):
        for _, w in term.atoms:
            if w.vid not in extra_bound:
                add(w)
        for p in term.preds:
            for w in atom_free_vars(p):
                if w.vid not in extra_bound:
                    add(w)
        for slot in (term.squash, term.neg):
            if slot is not None:
                for sub in slot.terms:
                    scan_term(sub, extra_bound | {x.vid for x in sub.sum_vars})

    scan_term(t, {v.vid for v in t.sum_vars})
    # variables bound at this level are not free
    return [v for vid, v in sorted(seen.items()) if vid not in bound]


def _neg_vids(t: Term) -> set[int]:
    if t.neg is None:
        return set()
    out: set[int] = set()
    for sub in t.neg.terms:
        for _, w in sub.atoms:
            out.add(w.vid)
        for p in sub.preds:
            for w in atom_free_vars(p):
                out.add(w.vid)
        for slot in (sub.squash, sub.neg):
            if slot is not None:
                out |= _neg_vids(Term.make((), (), None, slot, ()))
    return out
