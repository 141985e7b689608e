"""Parse-tree node types produced by the recursive-descent parser."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# ------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Num:
    lexeme: str
    width: int | None
    value: int | None
    is_real: bool = False


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Str:
    text: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class Concat:
    parts: tuple["Expr", ...]


@dataclass(frozen=True)
class Repl:
    count: "Expr"
    parts: tuple["Expr", ...]


@dataclass(frozen=True)
class Select:
    base: "Expr"
    kind: str  # "bit" | "part" | "plus" | "minus"
    a: "Expr"
    b: "Expr | None" = None


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, Ident, Str, Unary, Binary, Ternary, Concat, Repl, Select, Call]


# ------------------------------------------------------------ declarations


@dataclass(frozen=True)
class Range:
    msb: Expr
    lsb: Expr


@dataclass(frozen=True)
class DeclName:
    name: str
    unpacked: tuple[Range, ...] = ()
    init: Expr | None = None


@dataclass(frozen=True)
class NetDecl:
    kind: str  # wire/reg/integer/...
    signed: bool
    range: Range | None
    names: tuple[DeclName, ...]


@dataclass(frozen=True)
class PortDecl:
    direction: str  # input/output/inout
    net_kind: str | None
    signed: bool
    range: Range | None
    names: tuple[str, ...]


@dataclass(frozen=True)
class ParamDecl:
    local: bool
    items: tuple[tuple[str, Expr], ...]


# -------------------------------------------------------------- statements


@dataclass(frozen=True)
class Block:
    label: str | None
    stmts: tuple["Stmt", ...]


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then: "Stmt | None"
    other: "Stmt | None"


@dataclass(frozen=True)
class CaseItem:
    labels: tuple[Expr, ...]  # empty = default
    body: "Stmt | None"


@dataclass(frozen=True)
class CaseStmt:
    kind: str  # case/casex/casez
    subject: Expr
    items: tuple[CaseItem, ...]


@dataclass(frozen=True)
class ProcAssign:
    lhs: Expr
    rhs: Expr
    nonblocking: bool


@dataclass(frozen=True)
class LoopStmt:
    kind: str  # for/while/repeat/forever/wait
    body: "Stmt | None"


@dataclass(frozen=True)
class TaskEnable:
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class NullStmt:
    pass


@dataclass(frozen=True)
class OpaqueStmt:
    kind: str


Stmt = Union[
    Block, IfStmt, CaseStmt, ProcAssign, LoopStmt, TaskEnable, NullStmt, OpaqueStmt
]


# ------------------------------------------------------------ module items


@dataclass(frozen=True)
class ContinuousAssign:
    assignments: tuple[tuple[Expr, Expr], ...]  # (lhs, rhs) pairs


@dataclass(frozen=True)
class AlwaysBlock:
    body: Stmt | None


@dataclass(frozen=True)
class InitialBlock:
    body: Stmt | None


@dataclass(frozen=True)
class Instance:
    module: str
    name: str | None


@dataclass(frozen=True)
class OpaqueRegion:
    kind: str  # function/task/generate/...


Item = Union[
    NetDecl, PortDecl, ParamDecl, ContinuousAssign, AlwaysBlock, InitialBlock,
    Instance, OpaqueRegion,
]


@dataclass(frozen=True)
class Module:
    name: str
    line: int
    header_params: tuple[tuple[str, Expr], ...] = ()
    ansi_ports: tuple[PortDecl, ...] | None = None  # None = non-ANSI header
    header_names: tuple[str, ...] = ()
    items: tuple[Item, ...] = ()


@dataclass(frozen=True)
class SourceUnit:
    modules: tuple[Module, ...] = ()
