"""Congruence closure over scalar and tuple terms.

Equality atoms assert merges; closure is taken under function application
(attribute access, slices, uninterpreted functions) and record projection.
Used both to saturate term predicates and to compare predicate lists for
equivalence.
"""

from __future__ import annotations

from .exprs import (
    AggCall, AttrRef, Const, EqAtom, Func, NeqAtom, PredApp, PredAtom,
    TupleCons, TupleEqAtom, TupleNeqAtom, TupleSlice, TupleVar, agg_canon_key,
    footprint_key,
)


class Closure:
    def __init__(self):
        self.parent: list[int] = []
        self.kind: list[str] = []
        self.payload: list[object] = []
        self.children: list[tuple[int, ...]] = []
        self.source: list[object] = []  # original term object per node
        self.intern: dict[tuple, int] = {}
        self.tuple_nodes: list[int] = []
        self.attr_nodes: list[int] = []

    # -- union-find ---------------------------------------------------------

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:  # deterministic representative: smallest id
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    # -- term interning -------------------------------------------------------

    def _node(self, kind: str, payload: object, children: tuple[int, ...],
              source: object) -> int:
        key = (kind, payload, children)
        if key in self.intern:
            return self.intern[key]
        nid = len(self.parent)
        self.parent.append(nid)
        self.kind.append(kind)
        self.payload.append(payload)
        self.children.append(children)
        self.source.append(source)
        self.intern[key] = nid
        if kind in ("tvar", "record", "slice"):
            self.tuple_nodes.append(nid)
        if kind == "attr":
            self.attr_nodes.append(nid)
        return nid

    def add_scalar(self, s) -> int:
        if isinstance(s, Const):
            return self._node("const", (s.ty, repr(s.value)), (), s)
        if isinstance(s, AttrRef):
            base = self.add_tuple(s.var)
            return self._node("attr", s.attr, (base,), s)
        if isinstance(s, Func):
            kids = tuple(self.add_scalar(a) for a in s.args)
            return self._node("func", s.name, kids, s)
        if isinstance(s, AggCall):
            return self._node("agg", agg_canon_key(s), (), s)
        raise TypeError(s)

    def add_tuple(self, t) -> int:
        if isinstance(t, TupleVar):
            return self._node("tvar", t.vid, (), t)
        if isinstance(t, TupleSlice):
            base = self.add_tuple(t.var)
            return self._node("slice", footprint_key(t.part), (base,), t)
        if isinstance(t, TupleCons):
            kids = tuple(self.add_scalar(s) for _, s in t.fields)
            names = tuple(n for n, _ in t.fields)
            return self._node("record", names, kids, t)
        raise TypeError(t)

    def add_atom_terms(self, a: PredAtom) -> None:
        if isinstance(a, (EqAtom, NeqAtom)):
            self.add_scalar(a.lhs)
            self.add_scalar(a.rhs)
        elif isinstance(a, PredApp):
            for s in a.args:
                self.add_scalar(s)
        elif isinstance(a, (TupleEqAtom, TupleNeqAtom)):
            self.add_tuple(a.lhs)
            self.add_tuple(a.rhs)

    # -- assertions and closure ----------------------------------------------

    def assert_eq(self, a: PredAtom) -> None:
        if isinstance(a, EqAtom):
            self.union(self.add_scalar(a.lhs), self.add_scalar(a.rhs))
        elif isinstance(a, TupleEqAtom):
            self.union(self.add_tuple(a.lhs), self.add_tuple(a.rhs))
        else:
            self.add_atom_terms(a)

    def close(self) -> None:
        """Fixpoint of congruence and record projection."""
        changed = True
        while changed:
            changed = False
            sigs: dict[tuple, int] = {}
            for nid in range(len(self.parent)):
                if not self.children[nid] and self.kind[nid] != "tvar":
                    continue
                sig = (self.kind[nid], self.payload[nid],
                       tuple(self.find(c) for c in self.children[nid]))
                if self.kind[nid] == "tvar":
                    continue
                prev = sigs.get(sig)
                if prev is None:
                    sigs[sig] = nid
                elif self.union(prev, nid):
                    changed = True
            # record projection: attr_a(x) == field when class(x) holds a record
            records: dict[int, list[int]] = {}
            for nid in self.tuple_nodes:
                if self.kind[nid] == "record":
                    records.setdefault(self.find(nid), []).append(nid)
            for anode in self.attr_nodes:
                base_rep = self.find(self.children[anode][0])
                for rec in records.get(base_rep, []):
                    names = self.payload[rec]
                    if self.kind[anode] != "attr":
                        continue
                    attr = self.payload[anode]
                    if attr in names:
                        field_node = self.children[rec][names.index(attr)]
                        if self.union(anode, field_node):
                            changed = True

    # -- queries ---------------------------------------------------------------

    def scalar_eq(self, a, b) -> bool:
        ia, ib = self.add_scalar(a), self.add_scalar(b)
        self.close()
        return self.find(ia) == self.find(ib)

    def tuple_eq(self, a, b) -> bool:
        ia, ib = self.add_tuple(a), self.add_tuple(b)
        self.close()
        return self.find(ia) == self.find(ib)

    def scalar_rep(self, s) -> int:
        nid = self.add_scalar(s)
        self.close()
        return self.find(nid)

    def tuple_rep(self, t) -> int:
        nid = self.add_tuple(t)
        self.close()
        return self.find(nid)

    def scalar_classes(self) -> dict[int, list[object]]:
        """rep -> scalar source terms (deduplicated, deterministic order)."""
        out: dict[int, list[object]] = {}
        seen: set[tuple] = set()
        for nid in range(len(self.parent)):
            if self.kind[nid] in ("const", "attr", "func", "agg"):
                key = (self.kind[nid], self.payload[nid], self.children[nid])
                if key in seen:
                    continue
                seen.add(key)
                out.setdefault(self.find(nid), []).append(self.source[nid])
        return out

    def tuple_classes(self) -> dict[int, list[object]]:
        out: dict[int, list[object]] = {}
        for nid in self.tuple_nodes:
            out.setdefault(self.find(nid), []).append(self.source[nid])
        return out

    def atom_signature(self, a: PredAtom) -> tuple:
        """Canonical identity of a non-equality atom modulo the closure."""
        if isinstance(a, NeqAtom):
            reps = sorted((self.scalar_rep(a.lhs), self.scalar_rep(a.rhs)))
            return ("neq", tuple(reps))
        if isinstance(a, PredApp):
            return ("pred", a.name, tuple(self.scalar_rep(s) for s in a.args))
        if isinstance(a, TupleNeqAtom):
            reps = sorted((self.tuple_rep(a.lhs), self.tuple_rep(a.rhs)))
            return ("tneq", tuple(reps))
        if isinstance(a, EqAtom):
            reps = sorted((self.scalar_rep(a.lhs), self.scalar_rep(a.rhs)))
            return ("eq", tuple(reps))
        if isinstance(a, TupleEqAtom):
            reps = sorted((self.tuple_rep(a.lhs), self.tuple_rep(a.rhs)))
            return ("teq", tuple(reps))
        raise TypeError(a)


def closure_of(preds) -> Closure:
    """Closure generated by the equality atoms of a predicate list."""
    c = Closure()
    for p in preds:
        c.add_atom_terms(p)
    for p in preds:
        if isinstance(p, (EqAtom, TupleEqAtom)):
            c.assert_eq(p)
    # expose attribute nodes across members of each tuple class so derived
    # attribute equalities become visible
    c.close()
    _materialize_attrs(c)
    c.close()
    return c


def _materialize_attrs(c: Closure) -> None:
    attrs_by_class: dict[int, set[str]] = {}
    vars_by_class: dict[int, list[TupleVar]] = {}
    for nid in c.attr_nodes:
        base = c.find(c.children[nid][0])
        attrs_by_class.setdefault(base, set()).add(c.payload[nid])
    for nid in c.tuple_nodes:
        if c.kind[nid] == "tvar":
            vars_by_class.setdefault(c.find(nid), []).append(c.source[nid])
    for rep, names in attrs_by_class.items():
        for v in vars_by_class.get(rep, []):
            for a in sorted(names):
                c.add_scalar(AttrRef(v, a))


def is_eq_atom(a: PredAtom) -> bool:
    return isinstance(a, (EqAtom, TupleEqAtom))


def congruent_preds(p1, p2) -> bool:
    """Both predicate lists generate the same closure, and every
    non-equality atom on each side has a congruent counterpart."""
    c1, c2 = closure_of(list(p1) + []), closure_of(list(p2) + [])
    for c in (c1, c2):
        for p in list(p1) + list(p2):
            c.add_atom_terms(p)
        c.close()
    for p in p1:
        if isinstance(p, EqAtom) and not c2.scalar_eq(p.lhs, p.rhs):
            return False
        if isinstance(p, TupleEqAtom) and not c2.tuple_eq(p.lhs, p.rhs):
            return False
    for p in p2:
        if isinstance(p, EqAtom) and not c1.scalar_eq(p.lhs, p.rhs):
            return False
        if isinstance(p, TupleEqAtom) and not c1.tuple_eq(p.lhs, p.rhs):
            return False
    sigs1 = {c1.atom_signature(p) for p in p1 if not is_eq_atom(p)}
    sigs2 = {c1.atom_signature(p) for p in p2 if not is_eq_atom(p)}
    return sigs1 == sigs2


def implies_atom(c: Closure, atoms, candidate: PredAtom) -> bool:
    """Is ``candidate`` implied by the closure plus the given atom list?"""
    if isinstance(candidate, EqAtom):
        return c.scalar_eq(candidate.lhs, candidate.rhs)
    if isinstance(candidate, TupleEqAtom):
        return c.tuple_eq(candidate.lhs, candidate.rhs)
    want = c.atom_signature(candidate)
    return any(c.atom_signature(a) == want for a in atoms if not is_eq_atom(a))
