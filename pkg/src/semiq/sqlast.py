"""AST for the declaration/query input language."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# -- scalar expressions -------------------------------------------------------

@dataclass(frozen=True)
class ColRef:
    alias: str
    attr: str
    pos: Pos | None = None


@dataclass(frozen=True)
class Lit:
    value: object
    ty: str  # int | bool | string
    pos: Pos | None = None


@dataclass(frozen=True)
class App:
    """Uninterpreted function or operator application."""
    name: str
    args: tuple["Expr", ...]
    pos: Pos | None = None


@dataclass(frozen=True)
class AggQuery:
    """Aggregate applied to a subquery's bag."""
    name: str
    query: "Query"
    pos: Pos | None = None


Expr = object  # ColRef | Lit | App | AggQuery


# -- predicates ---------------------------------------------------------------

@dataclass(frozen=True)
class Cmp:
    op: str  # = <> < <= > >=
    lhs: Expr
    rhs: Expr
    pos: Pos | None = None


@dataclass(frozen=True)
class NotP:
    body: "Predicate"


@dataclass(frozen=True)
class AndP:
    lhs: "Predicate"
    rhs: "Predicate"


@dataclass(frozen=True)
class OrP:
    lhs: "Predicate"
    rhs: "Predicate"


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Exists:
    query: "Query"


Predicate = object


# -- projections ----------------------------------------------------------------

@dataclass(frozen=True)
class Star:
    pos: Pos | None = None


@dataclass(frozen=True)
class AliasStar:
    alias: str
    pos: Pos | None = None


@dataclass(frozen=True)
class ExprItem:
    expr: Expr
    name: str
    pos: Pos | None = None


ProjItem = object


# -- queries ----------------------------------------------------------------------

@dataclass(frozen=True)
class TableRef:
    name: str
    pos: Pos | None = None


@dataclass(frozen=True)
class Source:
    query: "Query"
    alias: str
    pos: Pos | None = None


@dataclass(frozen=True)
class Select:
    items: tuple[ProjItem, ...]
    sources: tuple[Source, ...]
    where: Predicate | None = None
    group_by: tuple[ColRef, ...] | None = None
    pos: Pos | None = None


@dataclass(frozen=True)
class UnionAll:
    lhs: "Query"
    rhs: "Query"


@dataclass(frozen=True)
class ExceptQ:
    lhs: "Query"
    rhs: "Query"


@dataclass(frozen=True)
class Distinct:
    query: "Query"


Query = object  # TableRef | Select | UnionAll | ExceptQ | Distinct


# -- statements -------------------------------------------------------------------

@dataclass(frozen=True)
class SchemaStmt:
    name: str
    attrs: tuple[tuple[str, str], ...]
    generic: bool
    pos: Pos | None = None


@dataclass(frozen=True)
class TableStmt:
    name: str
    schema_name: str
    pos: Pos | None = None


@dataclass(frozen=True)
class KeyStmt:
    table: str
    attrs: tuple[str, ...]
    pos: Pos | None = None


@dataclass(frozen=True)
class FkStmt:
    source: str
    source_attrs: tuple[str, ...]
    target: str
    target_attrs: tuple[str, ...]
    pos: Pos | None = None


@dataclass(frozen=True)
class ViewStmt:
    name: str
    query: Query
    pos: Pos | None = None


@dataclass(frozen=True)
class IndexStmt:
    name: str
    table: str
    attrs: tuple[str, ...]
    pos: Pos | None = None


@dataclass(frozen=True)
class VerifyStmt:
    lhs: Query
    rhs: Query
    pos: Pos | None = None


Statement = object


@dataclass
class Program:
    statements: list = field(default_factory=list)

    def verifies(self) -> list[VerifyStmt]:
        return [s for s in self.statements if isinstance(s, VerifyStmt)]


# -- printing (round-trip support) ---------------------------------------------

def print_expr(e: Expr) -> str:
    if isinstance(e, ColRef):
        return f"{e.alias}.{e.attr}"
    if isinstance(e, Lit):
        if e.ty == "string":
            return f"'{e.value}'"
        if e.ty == "bool":
            return "TRUE" if e.value else "FALSE"
        return str(e.value)
    if isinstance(e, App):
        if len(e.args) == 2 and not e.name[0].isalpha():
            return f"({print_expr(e.args[0])} {e.name} {print_expr(e.args[1])})"
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, AggQuery):
        return f"{e.name}({print_query(e.query)})"
    raise TypeError(e)


def print_pred(p: Predicate) -> str:
    if isinstance(p, Cmp):
        return f"{print_expr(p.lhs)} {p.op} {print_expr(p.rhs)}"
    if isinstance(p, NotP):
        if isinstance(p.body, Exists):
            return f"NOT EXISTS ({print_query(p.body.query)})"
        return f"NOT ({print_pred(p.body)})"
    if isinstance(p, AndP):
        return f"({print_pred(p.lhs)} AND {print_pred(p.rhs)})"
    if isinstance(p, OrP):
        return f"({print_pred(p.lhs)} OR {print_pred(p.rhs)})"
    if isinstance(p, BoolLit):
        return "TRUE" if p.value else "FALSE"
    if isinstance(p, Exists):
        return f"EXISTS ({print_query(p.query)})"
    raise TypeError(p)


def print_item(it: ProjItem) -> str:
    if isinstance(it, Star):
        return "*"
    if isinstance(it, AliasStar):
        return f"{it.alias}.*"
    if isinstance(it, ExprItem):
        return f"{print_expr(it.expr)} AS {it.name}"
    raise TypeError(it)


def print_query(q: Query) -> str:
    if isinstance(q, TableRef):
        return q.name
    if isinstance(q, Select):
        items = ", ".join(print_item(i) for i in q.items)

        def src(s: Source) -> str:
            if isinstance(s.query, TableRef):
                return s.query.name if s.query.name == s.alias else \
                    f"{s.query.name} {s.alias}"
            return f"({print_query(s.query)}) {s.alias}"

        srcs = ", ".join(src(s) for s in q.sources)
        out = f"SELECT {items} FROM {srcs}"
        if q.where is not None:
            out += f" WHERE {print_pred(q.where)}"
        if q.group_by:
            out += " GROUP BY " + ", ".join(print_expr(g) for g in q.group_by)
        return out
    if isinstance(q, UnionAll):
        return f"({print_query(q.lhs)}) UNION ALL ({print_query(q.rhs)})"
    if isinstance(q, ExceptQ):
        return f"({print_query(q.lhs)}) EXCEPT ({print_query(q.rhs)})"
    if isinstance(q, Distinct):
        inner = q.query
        if isinstance(inner, Select):
            return "SELECT DISTINCT " + print_query(inner)[len("SELECT "):]
        return f"DISTINCT ({print_query(inner)})"
    raise TypeError(q)


def print_statement(s: Statement) -> str:
    if isinstance(s, SchemaStmt):
        parts = [f"{a}:{t}" for a, t in s.attrs] + (["??"] if s.generic else [])
        return f"schema {s.name}({', '.join(parts)});"
    if isinstance(s, TableStmt):
        return f"table {s.name}({s.schema_name});"
    if isinstance(s, KeyStmt):
        return f"key {s.table}({', '.join(s.attrs)});"
    if isinstance(s, FkStmt):
        return (f"foreign key {s.source}({', '.join(s.source_attrs)}) "
                f"references {s.target}({', '.join(s.target_attrs)});")
    if isinstance(s, ViewStmt):
        return f"view {s.name} {print_query(s.query)};"
    if isinstance(s, IndexStmt):
        return f"index {s.name} on {s.table}({', '.join(s.attrs)});"
    if isinstance(s, VerifyStmt):
        return f"verify ({print_query(s.lhs)}) ({print_query(s.rhs)});"
    raise TypeError(s)


def print_program(p: Program) -> str:
    return "\n".join(print_statement(s) for s in p.statements) + "\n"
