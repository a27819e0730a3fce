"""Declaration processing and query-level rewrites.

Builds the schema environment from a parsed program, infers output schemas,
desugars GROUP BY into correlated aggregate subqueries, and inlines views
and indexes.  All passes are pure AST-to-AST functions.
"""

from __future__ import annotations

from dataclasses import replace

from .schema import FkConstraint, KeyConstraint, Schema, SchemaEnv, SemanticError
from .sqlast import (
    AggQuery, AliasStar, AndP, App, BoolLit, Cmp, ColRef, Distinct, ExceptQ,
    Exists, ExprItem, FkStmt, IndexStmt, KeyStmt, Lit, NotP, OrP, Program,
    Select, SchemaStmt, Source, Star, TableRef, TableStmt, UnionAll,
    VerifyStmt, ViewStmt,
)

UNKNOWN = "?"


def build_env(program: Program) -> SchemaEnv:
    """Sequentially validate declarations; view bodies are stored desugared."""
    env = SchemaEnv()
    for s in program.statements:
        if isinstance(s, SchemaStmt):
            rest = frozenset([s.name]) if s.generic else frozenset()
            env.declare_schema(Schema(s.name, s.attrs, rest))
        elif isinstance(s, TableStmt):
            env.declare_table(s.name, s.schema_name)
        elif isinstance(s, KeyStmt):
            env.add_key(KeyConstraint(s.table, tuple(s.attrs)))
        elif isinstance(s, FkStmt):
            env.add_fk(FkConstraint(s.source, tuple(s.source_attrs),
                                    s.target, tuple(s.target_attrs)))
        elif isinstance(s, ViewStmt):
            body = desugar_groupby(s.query)
            infer_schema(body, env)
            env.declare_view(s.name, body)
        elif isinstance(s, IndexStmt):
            env.declare_view(s.name, index_view(s, env))
        elif isinstance(s, VerifyStmt):
            infer_schema(desugar_groupby(s.lhs), env)
            infer_schema(desugar_groupby(s.rhs), env)
        else:
            raise SemanticError(f"unknown statement {type(s).__name__}")
    return env


def index_view(s: IndexStmt, env: SchemaEnv) -> Select:
    """An index is the view projecting the indexed attributes from its table."""
    sch = env.table_schema(s.table)
    for a in s.attrs:
        if not sch.has_attr(a):
            raise SemanticError(f"index attribute {s.table}.{a} not in schema",
                                s.pos.line if s.pos else None,
                                s.pos.col if s.pos else None)
    alias = "x"
    items = tuple(ExprItem(ColRef(alias, a), a) for a in s.attrs)
    return Select(items, (Source(TableRef(s.table), alias),))


# ---------------------------------------------------------------------------
# Schema inference

def _unify_types(t1: str, t2: str) -> str | None:
    if t1 == t2:
        return t1
    if t1 == UNKNOWN:
        return t2
    if t2 == UNKNOWN:
        return t1
    return None


def _unify_schemas(s1: Schema, s2: Schema, what: str) -> Schema:
    if set(s1.attr_names()) != set(s2.attr_names()) or s1.rest != s2.rest:
        raise SemanticError(f"schema mismatch in {what}: "
                            f"{sorted(s1.attr_names())} vs {sorted(s2.attr_names())}")
    attrs = []
    for a, t in s1.attrs:
        u = _unify_types(t, s2.attr_type(a))
        if u is None:
            raise SemanticError(f"attribute {a} has conflicting types in {what}")
        attrs.append((a, u))
    return Schema(s1.name, tuple(attrs), s1.rest)


def _expr_type(e, env: SchemaEnv, scopes) -> str:
    if isinstance(e, ColRef):
        sch = _resolve_alias(e.alias, scopes, e.pos)
        if sch.has_attr(e.attr):
            return sch.attr_type(e.attr)
        if sch.generic:
            return UNKNOWN
        raise SemanticError(f"unknown attribute {e.alias}.{e.attr}",
                            e.pos.line if e.pos else None,
                            e.pos.col if e.pos else None)
    if isinstance(e, Lit):
        return e.ty
    if isinstance(e, App):
        for a in e.args:
            _expr_type(a, env, scopes)
        return UNKNOWN
    if isinstance(e, AggQuery):
        infer_schema(e.query, env, scopes)
        return UNKNOWN
    raise SemanticError(f"unknown expression {type(e).__name__}")


def _resolve_alias(alias: str, scopes, pos=None) -> Schema:
    for scope in reversed(scopes):
        if alias in scope:
            return scope[alias]
    raise SemanticError(f"unknown alias {alias}",
                        pos.line if pos else None, pos.col if pos else None)


def _validate_pred(p, env: SchemaEnv, scopes) -> None:
    if isinstance(p, Cmp):
        _expr_type(p.lhs, env, scopes)
        _expr_type(p.rhs, env, scopes)
    elif isinstance(p, NotP):
        _validate_pred(p.body, env, scopes)
    elif isinstance(p, (AndP, OrP)):
        _validate_pred(p.lhs, env, scopes)
        _validate_pred(p.rhs, env, scopes)
    elif isinstance(p, BoolLit):
        pass
    elif isinstance(p, Exists):
        infer_schema(p.query, env, scopes)
    else:
        raise SemanticError(f"unknown predicate {type(p).__name__}")


def source_schemas(q: Select, env: SchemaEnv, scopes) -> dict[str, Schema]:
    local: dict[str, Schema] = {}
    for src in q.sources:
        if src.alias in local:
            raise SemanticError(f"duplicate alias {src.alias} in FROM",
                                src.pos.line if src.pos else None,
                                src.pos.col if src.pos else None)
        local[src.alias] = infer_schema(src.query, env, scopes)
    return local


def infer_schema(q, env: SchemaEnv, scopes=()) -> Schema:
    """Output schema of a query; raises SemanticError on bad references."""
    if isinstance(q, TableRef):
        if q.name in env.views:
            return infer_schema(env.views[q.name], env)
        return env.table_schema(q.name)
    if isinstance(q, Distinct):
        return infer_schema(q.query, env, scopes)
    if isinstance(q, UnionAll):
        return _unify_schemas(infer_schema(q.lhs, env, scopes),
                              infer_schema(q.rhs, env, scopes), "UNION ALL")
    if isinstance(q, ExceptQ):
        return _unify_schemas(infer_schema(q.lhs, env, scopes),
                              infer_schema(q.rhs, env, scopes), "EXCEPT")
    if isinstance(q, Select):
        local = source_schemas(q, env, scopes)
        inner = scopes + (local,)
        if q.where is not None:
            _validate_pred(q.where, env, inner)
        if q.group_by:
            for g in q.group_by:
                sch = _resolve_alias(g.alias, (local,), g.pos)
                if not sch.has_attr(g.attr) and not sch.generic:
                    raise SemanticError(f"unknown attribute {g.alias}.{g.attr}")
            return infer_schema(desugar_groupby(q), env, scopes)
        out = Schema("", ())
        for item in q.items:
            if isinstance(item, Star):
                for alias in local:
                    out = out.concat(local[alias])
            elif isinstance(item, AliasStar):
                out = out.concat(_resolve_alias(item.alias, (local,), item.pos))
            elif isinstance(item, ExprItem):
                ty = _expr_type(item.expr, env, inner)
                out = out.concat(Schema("", ((item.name, ty),)))
            else:
                raise SemanticError("unknown projection item")
        return out
    raise SemanticError(f"unknown query node {type(q).__name__}")


# ---------------------------------------------------------------------------
# GROUP BY desugaring

def _collect_aliases(q, acc: set[str]) -> None:
    if isinstance(q, Select):
        for s in q.sources:
            acc.add(s.alias)
            _collect_aliases(s.query, acc)
    elif isinstance(q, (UnionAll, ExceptQ)):
        _collect_aliases(q.lhs, acc)
        _collect_aliases(q.rhs, acc)
    elif isinstance(q, Distinct):
        _collect_aliases(q.query, acc)


def shorthand_column_names(args) -> list[str]:
    """Output column names for an aggregate-shorthand subquery."""
    names = []
    for i, a in enumerate(args):
        names.append(a.attr if isinstance(a, ColRef) else f"v{i + 1}")
    if len(set(names)) != len(names):
        names = [f"v{i + 1}" for i in range(len(args))]
    return names


def _rename_expr(e, ren: dict[str, str]):
    if isinstance(e, ColRef):
        return ColRef(ren.get(e.alias, e.alias), e.attr, e.pos)
    if isinstance(e, App):
        return App(e.name, tuple(_rename_expr(a, ren) for a in e.args), e.pos)
    if isinstance(e, AggQuery):
        return AggQuery(e.name, _rename_query_free(e.query, ren), e.pos)
    return e


def _rename_pred(p, ren: dict[str, str]):
    if isinstance(p, Cmp):
        return Cmp(p.op, _rename_expr(p.lhs, ren), _rename_expr(p.rhs, ren), p.pos)
    if isinstance(p, NotP):
        return NotP(_rename_pred(p.body, ren))
    if isinstance(p, AndP):
        return AndP(_rename_pred(p.lhs, ren), _rename_pred(p.rhs, ren))
    if isinstance(p, OrP):
        return OrP(_rename_pred(p.lhs, ren), _rename_pred(p.rhs, ren))
    if isinstance(p, Exists):
        return Exists(_rename_query_free(p.query, ren))
    return p


def _rename_query_free(q, ren: dict[str, str]):
    """Rename free alias references (shadowed aliases keep their meaning)."""
    if isinstance(q, Select):
        inner = {k: v for k, v in ren.items()
                 if k not in {s.alias for s in q.sources}}
        sources = tuple(Source(_rename_query_free(s.query, ren), s.alias, s.pos)
                        for s in q.sources)
        items = tuple(ExprItem(_rename_expr(it.expr, inner), it.name, it.pos)
                      if isinstance(it, ExprItem) else it
                      for it in q.items)
        where = _rename_pred(q.where, inner) if q.where is not None else None
        gb = tuple(_rename_expr(g, inner) for g in q.group_by) if q.group_by else None
        return Select(items, sources, where, gb, q.pos)
    if isinstance(q, UnionAll):
        return UnionAll(_rename_query_free(q.lhs, ren), _rename_query_free(q.rhs, ren))
    if isinstance(q, ExceptQ):
        return ExceptQ(_rename_query_free(q.lhs, ren), _rename_query_free(q.rhs, ren))
    if isinstance(q, Distinct):
        return Distinct(_rename_query_free(q.query, ren))
    return q


def _expr_refs_outside(e, grouped: set[tuple[str, str]], local_aliases: set[str]) -> bool:
    """Does e reference a local, non-grouped attribute?"""
    if isinstance(e, ColRef):
        return e.alias in local_aliases and (e.alias, e.attr) not in grouped
    if isinstance(e, App):
        return any(_expr_refs_outside(a, grouped, local_aliases) for a in e.args)
    if isinstance(e, AggQuery):
        return False  # explicit aggregate already encapsulates its scan
    return False


def desugar_groupby(q):
    """Rewrite grouped queries into correlated aggregate subqueries.

    One output row per group: the outer scan over fresh aliases is
    deduplicated with DISTINCT, each aggregate becomes an aggregate over the
    subquery of its group's rows.  Idempotent on GROUP-BY-free input.
    """
    counter = [0]
    used: set[str] = set()
    _collect_aliases(q, used)

    def fresh_alias() -> str:
        while True:
            counter[0] += 1
            cand = f"g{counter[0]}"
            if cand not in used:
                used.add(cand)
                return cand

    def walk(node):
        if isinstance(node, Select):
            sources = tuple(Source(walk(s.query), s.alias, s.pos) for s in node.sources)
            node = replace(node, sources=sources)
            items = tuple(_walk_item(it) for it in node.items)
            node = replace(node, items=items)
            if node.where is not None:
                node = replace(node, where=_walk_pred(node.where))
            if node.group_by:
                return _desugar_one(node)
            return node
        if isinstance(node, UnionAll):
            return UnionAll(walk(node.lhs), walk(node.rhs))
        if isinstance(node, ExceptQ):
            return ExceptQ(walk(node.lhs), walk(node.rhs))
        if isinstance(node, Distinct):
            return Distinct(walk(node.query))
        return node

    def _walk_item(it):
        if isinstance(it, ExprItem):
            return ExprItem(_walk_expr(it.expr), it.name, it.pos)
        return it

    def _walk_expr(e):
        if isinstance(e, App):
            return App(e.name, tuple(_walk_expr(a) for a in e.args), e.pos)
        if isinstance(e, AggQuery):
            return AggQuery(e.name, walk(e.query), e.pos)
        return e

    def _walk_pred(p):
        if isinstance(p, Cmp):
            return Cmp(p.op, _walk_expr(p.lhs), _walk_expr(p.rhs), p.pos)
        if isinstance(p, NotP):
            return NotP(_walk_pred(p.body))
        if isinstance(p, AndP):
            return AndP(_walk_pred(p.lhs), _walk_pred(p.rhs))
        if isinstance(p, OrP):
            return OrP(_walk_pred(p.lhs), _walk_pred(p.rhs))
        if isinstance(p, Exists):
            return Exists(walk(p.query))
        return p

    def _desugar_one(node: Select):
        grouped = {(g.alias, g.attr) for g in node.group_by}
        local_aliases = {s.alias for s in node.sources}
        for alias, _attr in grouped:
            if alias not in local_aliases:
                raise SemanticError(f"GROUP BY references unknown alias {alias}")
        ren = {s.alias: fresh_alias() for s in node.sources}
        outer_sources = tuple(Source(s.query, ren[s.alias], s.pos) for s in node.sources)
        corr = None
        for g in node.group_by:
            c = Cmp("=", ColRef(g.alias, g.attr), ColRef(ren[g.alias], g.attr))
            corr = c if corr is None else AndP(corr, c)

        def inner_query(args) -> Select:
            names = shorthand_column_names(args)
            items = tuple(ExprItem(a, n) for a, n in zip(args, names))
            where = node.where
            if where is None:
                where = corr
            elif corr is not None:
                where = AndP(where, corr)
            return Select(items, node.sources, where)

        out_items = []
        for it in node.items:
            if not isinstance(it, ExprItem):
                raise SemanticError("grouped query must project named expressions")
            e = it.expr
            if isinstance(e, App) and _expr_refs_outside(e, grouped, local_aliases):
                out_items.append(ExprItem(AggQuery(e.name, inner_query(list(e.args))),
                                          it.name, it.pos))
            elif _expr_refs_outside(e, grouped, local_aliases):
                raise SemanticError(
                    f"projection {it.name} references a non-grouped attribute")
            else:
                out_items.append(ExprItem(_rename_expr(e, ren), it.name, it.pos))
        outer_where = _rename_pred(node.where, ren) if node.where is not None else None
        return Distinct(Select(tuple(out_items), outer_sources, outer_where))

    return walk(q)


# ---------------------------------------------------------------------------
# View and index inlining

def inline_views(q, env: SchemaEnv, _stack: tuple[str, ...] = ()):
    """Replace each view/index occurrence by its defining query, transitively."""
    if isinstance(q, TableRef):
        if q.name in env.views:
            if q.name in _stack:
                raise SemanticError(f"cyclic view definition involving {q.name}")
            return inline_views(env.views[q.name], env, _stack + (q.name,))
        return q
    if isinstance(q, Select):
        sources = tuple(Source(inline_views(s.query, env, _stack), s.alias, s.pos)
                        for s in q.sources)
        where = _inline_pred(q.where, env, _stack) if q.where is not None else None
        items = tuple(ExprItem(_inline_expr(it.expr, env, _stack), it.name, it.pos)
                      if isinstance(it, ExprItem) else it
                      for it in q.items)
        return replace(q, sources=sources, where=where, items=items)
    if isinstance(q, UnionAll):
        return UnionAll(inline_views(q.lhs, env, _stack), inline_views(q.rhs, env, _stack))
    if isinstance(q, ExceptQ):
        return ExceptQ(inline_views(q.lhs, env, _stack), inline_views(q.rhs, env, _stack))
    if isinstance(q, Distinct):
        return Distinct(inline_views(q.query, env, _stack))
    raise SemanticError(f"unknown query node {type(q).__name__}")


def _inline_expr(e, env, stack):
    if isinstance(e, App):
        return App(e.name, tuple(_inline_expr(a, env, stack) for a in e.args), e.pos)
    if isinstance(e, AggQuery):
        return AggQuery(e.name, inline_views(e.query, env, stack), e.pos)
    return e


def _inline_pred(p, env, stack):
    if isinstance(p, Cmp):
        return Cmp(p.op, _inline_expr(p.lhs, env, stack),
                   _inline_expr(p.rhs, env, stack), p.pos)
    if isinstance(p, NotP):
        return NotP(_inline_pred(p.body, env, stack))
    if isinstance(p, AndP):
        return AndP(_inline_pred(p.lhs, env, stack), _inline_pred(p.rhs, env, stack))
    if isinstance(p, OrP):
        return OrP(_inline_pred(p.lhs, env, stack), _inline_pred(p.rhs, env, stack))
    if isinstance(p, Exists):
        return Exists(inline_views(p.query, env, stack))
    return p
