"""Recursive-descent parser and syntax gate for a Verilog-2001 subset.

The gate's job is rejecting obviously broken generated code, not full
language validation. Supported in detail: module declarations (ANSI and
non-ANSI port styles), parameter/net/reg declarations, continuous assigns,
always/initial blocks with if/else/case/loops, module and gate
instantiations, and ordinary expressions. Plausible-but-unmodeled constructs
(generate, function, task, specify, primitive, fork) are skipped as balanced
opaque regions so they never cause false rejections. ``check_syntax`` never
raises: malformed input produces an invalid report with positioned
diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..errors import InvalidSourceError, LexicalError
from . import nodes as N
from .lexer import (
    COMMENT,
    EOF,
    IDENT,
    KEYWORD,
    NUMBER,
    OPERATOR,
    STRING,
    Token,
    parse_number_literal,
    tokenize,
)

VALID = "valid"
INVALID = "invalid"

_MAX_DEPTH = 100

_NET_KINDS = frozenset(
    "wire tri wand wor supply0 supply1 tri0 tri1 triand trior trireg".split()
)
_SIMPLE_DECL_KINDS = frozenset("integer real realtime time genvar event".split())
_GATE_KINDS = frozenset(
    """
    and nand or nor xor xnor buf not bufif0 bufif1 notif0 notif1 pmos nmos
    cmos rcmos rnmos rpmos tran tranif0 tranif1 rtran rtranif0 rtranif1
    pullup pulldown
    """.split()
)
_OPAQUE_REGIONS = {
    "function": "endfunction",
    "task": "endtask",
    "generate": "endgenerate",
    "specify": "endspecify",
    "primitive": "endprimitive",
    "table": "endtable",
    "fork": "join",
}
_UNARY_OPS = frozenset("! ~ + - & | ^ ~& ~| ~^ ^~".split())
_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4, "^~": 4, "~^": 4,
    "&": 5,
    "==": 6, "!=": 6, "===": 6, "!==": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8, "<<<": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
    "**": 11,
}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int
    column: int

    def format(self, path: str = "<source>") -> str:
        return f"{path}:{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class SyntaxReport:
    status: str
    diagnostics: tuple[Diagnostic, ...]
    module_count: int

    @property
    def ok(self) -> bool:
        return self.status == VALID


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # input/output/inout
    width: int
    msb: int = 0
    lsb: int = 0


@dataclass(frozen=True)
class ModuleInterface:
    name: str
    ports: tuple[Port, ...]


class _Bail(Exception):
    """Internal: abandon the current item and resynchronize."""


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = [t for t in tokens if t.kind != COMMENT]
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        for t in tokens:
            if t.directive in ("define", "include"):
                self.diagnostics.append(
                    Diagnostic(
                        "warning",
                        f"compiler directive `{t.directive} is recognized but not "
                        "preprocessed",
                        t.line,
                        t.column,
                    )
                )

    # ------------------------------------------------------------ plumbing

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[i]

    def at_eof(self) -> bool:
        return self.peek().kind == EOF

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        if self.pos < len(self.toks) - 1:
            self.pos += 1
        return tok

    def at(self, lexeme: str) -> bool:
        return self.peek().lexeme == lexeme and self.peek().kind != STRING

    def at_kw(self, *names: str) -> bool:
        t = self.peek()
        return t.kind == KEYWORD and t.lexeme in names

    def accept(self, lexeme: str) -> bool:
        if self.at(lexeme):
            self.advance()
            return True
        return False

    def error(self, message: str, tok: Token | None = None) -> None:
        tok = tok or self.peek()
        self.diagnostics.append(Diagnostic("error", message, tok.line, tok.column))

    def warning(self, message: str, tok: Token | None = None) -> None:
        tok = tok or self.peek()
        self.diagnostics.append(Diagnostic("warning", message, tok.line, tok.column))

    def expect(self, lexeme: str, what: str = "") -> Token:
        if self.at(lexeme):
            return self.advance()
        t = self.peek()
        shown = t.lexeme if t.kind != EOF else "end of file"
        self.error(f"expected {what or lexeme!r}, found {shown!r}", t)
        raise _Bail()

    def expect_ident(self, what: str) -> str:
        t = self.peek()
        if t.kind == IDENT:
            self.advance()
            return t.lexeme
        shown = t.lexeme if t.kind != EOF else "end of file"
        self.error(f"expected {what}, found {shown!r}", t)
        raise _Bail()

    def _skip_to(self, *stops: str) -> None:
        """Skip tokens until one of ``stops`` (consuming a ';' stop)."""
        depth = 0
        while not self.at_eof():
            t = self.peek()
            if depth == 0 and t.lexeme in stops:
                if t.lexeme == ";":
                    self.advance()
                return
            if t.lexeme in "([{":
                depth += 1
            elif t.lexeme in ")]}":
                depth = max(0, depth - 1)
            self.advance()

    # ----------------------------------------------------------- top level

    def parse_source(self) -> N.SourceUnit:
        modules: list[N.Module] = []
        while not self.at_eof():
            if self.at_kw("module", "macromodule"):
                modules.append(self.parse_module())
            else:
                self.error("expected 'module' declaration")
                while not self.at_eof() and not self.at_kw("module", "macromodule"):
                    self.advance()
        if not modules and not any(d.severity == "error" for d in self.diagnostics):
            eof = self.toks[-1]
            self.error("no module declaration found", eof)
        return N.SourceUnit(modules=tuple(modules))

    def parse_module(self) -> N.Module:
        kw = self.advance()  # module / macromodule
        try:
            name = self.expect_ident("module name")
        except _Bail:
            self._skip_to(";")
            name = "<anonymous>"
        header_params: tuple[tuple[str, N.Expr], ...] = ()
        ansi_ports: tuple[N.PortDecl, ...] | None = None
        header_names: tuple[str, ...] = ()
        try:
            if self.at("#"):
                header_params = self.parse_param_header()
            if self.at("("):
                ansi_ports, header_names = self.parse_port_header()
            self.expect(";", "';' after module header")
        except _Bail:
            self._skip_to(";")
        items: list[N.Item] = []
        while True:
            if self.at_kw("endmodule"):
                self.advance()
                break
            if self.at_eof():
                self.error("missing 'endmodule'", self.peek())
                break
            if self.at_kw("module", "macromodule"):
                self.error("missing 'endmodule' before nested module declaration")
                break
            start = self.pos
            try:
                item = self.parse_item()
                if item is not None:
                    items.append(item)
            except _Bail:
                self._skip_to(";", "endmodule")
            if self.pos == start:  # guarantee progress
                self.advance()
        self._check_port_names(ansi_ports, header_names, kw)
        return N.Module(
            name=name,
            line=kw.line,
            header_params=header_params,
            ansi_ports=ansi_ports,
            header_names=header_names,
            items=tuple(items),
        )

    def _check_port_names(self, ansi_ports, header_names, tok) -> None:
        names: list[str] = list(header_names)
        if ansi_ports:
            for decl in ansi_ports:
                names.extend(decl.names)
        seen = set()
        for n in names:
            if n in seen:
                self.error(f"duplicate port name {n!r}", tok)
            seen.add(n)

    def parse_param_header(self) -> tuple[tuple[str, N.Expr], ...]:
        self.expect("#")
        self.expect("(", "'(' after '#'")
        items: list[tuple[str, N.Expr]] = []
        if not self.at(")"):
            while True:
                self.accept("parameter")
                if self.at("["):
                    self.parse_range()
                name = self.expect_ident("parameter name")
                self.expect("=", "'=' in parameter assignment")
                items.append((name, self.parse_expr()))
                if not self.accept(","):
                    break
        self.expect(")", "')' closing parameter list")
        return tuple(items)

    def parse_port_header(self):
        self.expect("(")
        if self.accept(")"):
            return (), ()
        if self.at_kw("input", "output", "inout"):
            decls: list[N.PortDecl] = []
            direction = None
            net_kind = None
            signed = False
            rng = None
            group: list[str] = []
            while True:
                if self.at_kw("input", "output", "inout"):
                    if group:
                        decls.append(N.PortDecl(direction, net_kind, signed, rng, tuple(group)))
                        group = []
                    direction = self.advance().lexeme
                    net_kind = None
                    if self.at_kw("wire", "reg", "tri"):
                        net_kind = self.advance().lexeme
                    signed = bool(self.accept("signed"))
                    rng = self.parse_range() if self.at("[") else None
                group.append(self.expect_ident("port name"))
                if self.accept(","):
                    continue
                break
            decls.append(N.PortDecl(direction, net_kind, signed, rng, tuple(group)))
            self.expect(")", "')' closing port list")
            return tuple(decls), ()
        names = [self.expect_ident("port name")]
        while self.accept(","):
            names.append(self.expect_ident("port name"))
        self.expect(")", "')' closing port list")
        return None, tuple(names)

    # --------------------------------------------------------- module items

    def parse_item(self) -> N.Item | None:
        t = self.peek()
        if t.lexeme == ";":
            self.advance()
            return None
        if t.kind == KEYWORD:
            kw = t.lexeme
            if kw in ("input", "output", "inout"):
                return self.parse_port_decl()
            if kw in _NET_KINDS or kw == "reg":
                return self.parse_net_decl()
            if kw in _SIMPLE_DECL_KINDS:
                return self.parse_simple_decl()
            if kw in ("parameter", "localparam"):
                return self.parse_param_decl()
            if kw in ("defparam", "specparam"):
                self.advance()
                self._skip_to(";")
                return None
            if kw == "assign":
                return self.parse_continuous_assign()
            if kw == "always":
                self.advance()
                return N.AlwaysBlock(body=self.parse_statement(0))
            if kw == "initial":
                self.advance()
                return N.InitialBlock(body=self.parse_statement(0))
            if kw in _OPAQUE_REGIONS:
                return self.parse_opaque_region(kw)
            if kw in _GATE_KINDS:
                return self.parse_gate_instance()
            self.error(f"unexpected keyword {kw!r} in module body", t)
            raise _Bail()
        if t.kind == IDENT:
            return self.parse_instance()
        self.error(f"unexpected token {t.lexeme!r} in module body", t)
        raise _Bail()

    def parse_range(self) -> N.Range:
        self.expect("[")
        msb = self.parse_expr()
        self.expect(":", "':' in range")
        lsb = self.parse_expr()
        self.expect("]", "']' closing range")
        return N.Range(msb=msb, lsb=lsb)

    def parse_port_decl(self) -> N.PortDecl:
        direction = self.advance().lexeme
        net_kind = None
        if self.at_kw("wire", "reg", "tri"):
            net_kind = self.advance().lexeme
        signed = bool(self.accept("signed"))
        rng = self.parse_range() if self.at("[") else None
        names = [self.expect_ident("port name")]
        while self.accept(","):
            names.append(self.expect_ident("port name"))
        self.expect(";", "';' after port declaration")
        return N.PortDecl(direction, net_kind, signed, rng, tuple(names))

    def _parse_decl_names(self) -> tuple[N.DeclName, ...]:
        names: list[N.DeclName] = []
        while True:
            name = self.expect_ident("declared name")
            unpacked: list[N.Range] = []
            while self.at("["):
                unpacked.append(self.parse_range())
            init = None
            if self.accept("="):
                init = self.parse_expr()
            names.append(N.DeclName(name, tuple(unpacked), init))
            if not self.accept(","):
                break
        self.expect(";", "';' after declaration")
        return tuple(names)

    def parse_net_decl(self) -> N.NetDecl:
        kind = self.advance().lexeme
        signed = bool(self.accept("signed"))
        rng = self.parse_range() if self.at("[") else None
        return N.NetDecl(kind, signed, rng, self._parse_decl_names())

    def parse_simple_decl(self) -> N.NetDecl:
        kind = self.advance().lexeme
        return N.NetDecl(kind, True, None, self._parse_decl_names())

    def parse_param_decl(self) -> N.ParamDecl:
        local = self.advance().lexeme == "localparam"
        self.accept("signed")
        if self.at("["):
            self.parse_range()
        items: list[tuple[str, N.Expr]] = []
        while True:
            name = self.expect_ident("parameter name")
            self.expect("=", "'=' in parameter assignment")
            items.append((name, self.parse_expr()))
            if not self.accept(","):
                break
        self.expect(";", "';' after parameter declaration")
        return N.ParamDecl(local=local, items=tuple(items))

    def parse_continuous_assign(self) -> N.ContinuousAssign:
        self.advance()  # assign
        if self.at("#"):
            self.advance()
            self.parse_delay_value()
        if self.at("("):  # drive strength, accepted and ignored
            self._skip_balanced_parens()
        assignments: list[tuple[N.Expr, N.Expr]] = []
        while True:
            lhs = self.parse_lvalue(0)
            self.expect("=", "'=' in continuous assignment")
            rhs = self.parse_expr()
            assignments.append((lhs, rhs))
            if not self.accept(","):
                break
        self.expect(";", "';' after assign")
        return N.ContinuousAssign(assignments=tuple(assignments))

    def _skip_balanced_parens(self) -> None:
        self.expect("(")
        depth = 1
        while depth and not self.at_eof():
            t = self.advance()
            if t.lexeme == "(":
                depth += 1
            elif t.lexeme == ")":
                depth -= 1
        if depth:
            self.error("unbalanced '(' before end of file")
            raise _Bail()

    def parse_opaque_region(self, kind: str) -> N.OpaqueRegion:
        closer = _OPAQUE_REGIONS[kind]
        open_tok = self.advance()
        depth = 1
        while depth:
            if self.at_eof():
                self.error(f"unterminated '{kind}' region (missing '{closer}')", open_tok)
                raise _Bail()
            t = self.advance()
            if t.kind == KEYWORD:
                if t.lexeme == kind:
                    depth += 1
                elif t.lexeme == closer:
                    depth -= 1
        return N.OpaqueRegion(kind=kind)

    def parse_gate_instance(self) -> N.Instance:
        kind = self.advance().lexeme
        if self.at("#"):
            self.advance()
            self.parse_delay_value()
        while True:
            name = None
            if self.peek().kind == IDENT:
                name = self.advance().lexeme
            self.expect("(", "'(' in gate instantiation")
            if not self.at(")"):
                self.parse_expr()
                while self.accept(","):
                    self.parse_expr()
            self.expect(")", "')' closing gate instantiation")
            if not self.accept(","):
                break
        self.expect(";", "';' after gate instantiation")
        return N.Instance(module=kind, name=name)

    def parse_instance(self) -> N.Instance:
        module = self.advance().lexeme
        if self.at("#"):
            self.advance()
            if self.at("("):
                self.parse_connections()
            else:
                self.parse_delay_value()
        name = None
        while True:
            inst = self.expect_ident("instance name")
            name = name or inst
            if self.at("["):
                self.parse_range()
            self.expect("(", "'(' in instantiation")
            self.parse_connection_body()
            if not self.accept(","):
                break
        self.expect(";", "';' after instantiation")
        return N.Instance(module=module, name=name)

    def parse_connections(self) -> None:
        self.expect("(")
        self.parse_connection_body()

    def parse_connection_body(self) -> None:
        """Ordered or named connection list, already past the '('."""
        if self.accept(")"):
            return
        while True:
            if self.at("."):
                self.advance()
                self.expect_ident("port name after '.'")
                self.expect("(", "'(' in named connection")
                if not self.at(")"):
                    self.parse_expr()
                self.expect(")", "')' closing named connection")
            elif self.at(",") or self.at(")"):
                pass  # empty positional slot
            else:
                self.parse_expr()
            if self.accept(","):
                continue
            break
        self.expect(")", "')' closing connection list")

    def parse_delay_value(self) -> None:
        t = self.peek()
        if t.kind in (NUMBER, IDENT):
            self.advance()
        elif self.at("("):
            self._skip_balanced_parens()
        else:
            self.error("expected delay value after '#'", t)
            raise _Bail()

    # ------------------------------------------------------------ statements

    def parse_statement(self, depth: int) -> N.Stmt | None:
        if depth > _MAX_DEPTH:
            self.error("statement nesting too deep")
            raise _Bail()
        t = self.peek()
        if t.lexeme == "@":
            self.advance()
            self.parse_event_control()
            return self.parse_statement(depth + 1)
        if t.lexeme == "#":
            self.advance()
            self.parse_delay_value()
            return self.parse_statement(depth + 1)
        if t.lexeme == ";":
            self.advance()
            return N.NullStmt()
        if t.kind == KEYWORD:
            kw = t.lexeme
            if kw == "begin":
                return self.parse_block(depth)
            if kw == "if":
                return self.parse_if(depth)
            if kw in ("case", "casex", "casez"):
                return self.parse_case(depth)
            if kw == "for":
                self.advance()
                self.expect("(", "'(' after 'for'")
                self.parse_loop_assign()
                self.expect(";", "';' in for header")
                self.parse_expr()
                self.expect(";", "';' in for header")
                self.parse_loop_assign()
                self.expect(")", "')' closing for header")
                return N.LoopStmt("for", self.parse_statement(depth + 1))
            if kw in ("while", "repeat", "wait"):
                self.advance()
                self.expect("(", f"'(' after '{kw}'")
                self.parse_expr()
                self.expect(")", f"')' after '{kw}' condition")
                return N.LoopStmt(kw, self.parse_statement(depth + 1))
            if kw == "forever":
                self.advance()
                return N.LoopStmt("forever", self.parse_statement(depth + 1))
            if kw == "fork":
                return self.parse_opaque_statement("fork")
            if kw == "disable":
                self.advance()
                self.expect_ident("block or task name")
                self.expect(";", "';' after disable")
                return N.NullStmt()
            if kw in ("force", "release", "deassign", "assign"):
                self.advance()
                self._skip_to(";")
                return N.NullStmt()
            self.error(f"unexpected keyword {kw!r} in statement", t)
            raise _Bail()
        if t.lexeme == "->":
            self.advance()
            self.expect_ident("event name")
            self.expect(";", "';' after event trigger")
            return N.NullStmt()
        if t.kind == IDENT or t.lexeme == "{":
            return self.parse_assign_or_call(depth)
        self.error(f"expected statement, found {t.lexeme!r}", t)
        raise _Bail()

    def parse_opaque_statement(self, kind: str) -> N.OpaqueStmt:
        closer = _OPAQUE_REGIONS[kind]
        open_tok = self.advance()
        depth = 1
        while depth:
            if self.at_eof():
                self.error(f"unterminated '{kind}' (missing '{closer}')", open_tok)
                raise _Bail()
            t = self.advance()
            if t.kind == KEYWORD:
                if t.lexeme == kind:
                    depth += 1
                elif t.lexeme == closer:
                    depth -= 1
        return N.OpaqueStmt(kind=kind)

    def parse_block(self, depth: int) -> N.Block:
        self.advance()  # begin
        label = None
        if self.accept(":"):
            label = self.expect_ident("block label")
        stmts: list[N.Stmt] = []
        while not self.at_kw("end"):
            if self.at_eof():
                self.error("missing 'end' to close 'begin' block")
                raise _Bail()
            start = self.pos
            stmt = self.parse_statement(depth + 1)
            if stmt is not None:
                stmts.append(stmt)
            if self.pos == start:
                self.advance()
        self.advance()  # end
        return N.Block(label=label, stmts=tuple(stmts))

    def parse_if(self, depth: int) -> N.IfStmt:
        self.advance()  # if
        self.expect("(", "'(' after 'if'")
        cond = self.parse_expr()
        self.expect(")", "')' after if condition")
        then = self.parse_statement(depth + 1)
        other = None
        if self.at_kw("else"):
            self.advance()
            other = self.parse_statement(depth + 1)
        return N.IfStmt(cond=cond, then=then, other=other)

    def parse_case(self, depth: int) -> N.CaseStmt:
        kind = self.advance().lexeme
        self.expect("(", f"'(' after '{kind}'")
        subject = self.parse_expr()
        self.expect(")", f"')' after {kind} subject")
        items: list[N.CaseItem] = []
        while not self.at_kw("endcase"):
            if self.at_eof():
                self.error(f"missing 'endcase' to close '{kind}'")
                raise _Bail()
            if self.at_kw("default"):
                self.advance()
                self.accept(":")
                items.append(N.CaseItem(labels=(), body=self.parse_statement(depth + 1)))
                continue
            labels = [self.parse_expr()]
            while self.accept(","):
                labels.append(self.parse_expr())
            self.expect(":", "':' after case label")
            items.append(
                N.CaseItem(labels=tuple(labels), body=self.parse_statement(depth + 1))
            )
        self.advance()  # endcase
        return N.CaseStmt(kind=kind, subject=subject, items=tuple(items))

    def parse_loop_assign(self) -> None:
        self.parse_lvalue(0)
        self.expect("=", "'=' in loop assignment")
        self.parse_expr()

    def parse_assign_or_call(self, depth: int) -> N.Stmt:
        t = self.peek()
        if t.kind == IDENT and self.peek(1).lexeme == "(" and not t.lexeme.startswith("{"):
            name = self.advance().lexeme
            self.advance()  # (
            args: list[N.Expr] = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.accept(","):
                    args.append(self.parse_expr())
            self.expect(")", "')' closing call")
            self.expect(";", "';' after call")
            return N.TaskEnable(name=name, args=tuple(args))
        if t.kind == IDENT and self.peek(1).lexeme == ";":
            name = self.advance().lexeme
            self.advance()  # ;
            return N.TaskEnable(name=name, args=())
        lhs = self.parse_lvalue(0)
        nonblocking = False
        if self.accept("="):
            pass
        elif self.accept("<="):
            nonblocking = True
        else:
            self.error("expected '=' or '<=' in assignment")
            raise _Bail()
        if self.at("#"):
            self.advance()
            self.parse_delay_value()
        elif self.at("@"):
            self.advance()
            self.parse_event_control()
        rhs = self.parse_expr()
        self.expect(";", "';' after assignment")
        return N.ProcAssign(lhs=lhs, rhs=rhs, nonblocking=nonblocking)

    def parse_event_control(self) -> None:
        if self.accept("*"):
            return
        t = self.peek()
        if t.kind == IDENT:
            self.advance()
            return
        self.expect("(", "event control after '@'")
        if self.accept("*"):
            self.expect(")", "')' after '@(*)'")
            return
        if self.at(")"):
            self.error("empty event control list")
            raise _Bail()
        while True:
            if self.at_kw("posedge", "negedge"):
                self.advance()
            self.parse_expr()
            if self.accept(","):
                continue
            if self.at_kw("or"):
                self.advance()
                continue
            break
        self.expect(")", "')' closing event control")

    # ----------------------------------------------------------- expressions

    def parse_lvalue(self, depth: int) -> N.Expr:
        if depth > _MAX_DEPTH:
            self.error("lvalue nesting too deep")
            raise _Bail()
        if self.at("{"):
            self.advance()
            parts = [self.parse_lvalue(depth + 1)]
            while self.accept(","):
                parts.append(self.parse_lvalue(depth + 1))
            self.expect("}", "'}' closing concatenation")
            return N.Concat(parts=tuple(parts))
        name = self.expect_ident("assignment target")
        while self.at("."):
            self.advance()
            name += "." + self.expect_ident("hierarchical name")
        expr: N.Expr = N.Ident(name=name)
        return self.parse_selects(expr)

    def parse_selects(self, expr: N.Expr) -> N.Expr:
        while self.at("["):
            self.advance()
            a = self.parse_expr()
            if self.accept(":"):
                b = self.parse_expr()
                expr = N.Select(base=expr, kind="part", a=a, b=b)
            elif self.accept("+:"):
                expr = N.Select(base=expr, kind="plus", a=a, b=self.parse_expr())
            elif self.accept("-:"):
                expr = N.Select(base=expr, kind="minus", a=a, b=self.parse_expr())
            else:
                expr = N.Select(base=expr, kind="bit", a=a)
            self.expect("]", "']' closing select")
        return expr

    def parse_expr(self, depth: int = 0) -> N.Expr:
        if depth > _MAX_DEPTH:
            self.error("expression nesting too deep")
            raise _Bail()
        expr = self.parse_binary(1, depth)
        if self.at("?"):
            self.advance()
            then = self.parse_expr(depth + 1)
            self.expect(":", "':' in conditional expression")
            other = self.parse_expr(depth + 1)
            return N.Ternary(cond=expr, then=then, other=other)
        return expr

    def parse_binary(self, min_prec: int, depth: int) -> N.Expr:
        if depth > _MAX_DEPTH:
            self.error("expression nesting too deep")
            raise _Bail()
        left = self.parse_unary(depth)
        while True:
            t = self.peek()
            prec = _BINARY_PREC.get(t.lexeme) if t.kind == OPERATOR else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.parse_binary(prec + 1, depth + 1)
            left = N.Binary(op=t.lexeme, left=left, right=right)

    def parse_unary(self, depth: int) -> N.Expr:
        if depth > _MAX_DEPTH:
            self.error("expression nesting too deep")
            raise _Bail()
        t = self.peek()
        if t.kind == OPERATOR and t.lexeme in _UNARY_OPS:
            self.advance()
            return N.Unary(op=t.lexeme, operand=self.parse_unary(depth + 1))
        return self.parse_primary(depth)

    def parse_primary(self, depth: int) -> N.Expr:
        if depth > _MAX_DEPTH:
            self.error("expression nesting too deep")
            raise _Bail()
        t = self.peek()
        if t.kind == NUMBER:
            self.advance()
            width, value, is_real = parse_number_literal(t.lexeme)
            return N.Num(lexeme=t.lexeme, width=width, value=value, is_real=is_real)
        if t.kind == STRING:
            self.advance()
            return N.Str(text=t.lexeme)
        if t.kind == IDENT:
            self.advance()
            name = t.lexeme
            while self.at("."):
                self.advance()
                name += "." + self.expect_ident("hierarchical name")
            if self.at("("):
                self.advance()
                args: list[N.Expr] = []
                if not self.at(")"):
                    args.append(self.parse_expr(depth + 1))
                    while self.accept(","):
                        args.append(self.parse_expr(depth + 1))
                self.expect(")", "')' closing call")
                return N.Call(name=name, args=tuple(args))
            return self.parse_selects(N.Ident(name=name))
        if t.lexeme == "(":
            self.advance()
            expr = self.parse_expr(depth + 1)
            self.expect(")", "')' closing parenthesized expression")
            return self.parse_selects(expr)
        if t.lexeme == "{":
            self.advance()
            first = self.parse_expr(depth + 1)
            if self.at("{"):
                self.advance()
                parts = [self.parse_expr(depth + 1)]
                while self.accept(","):
                    parts.append(self.parse_expr(depth + 1))
                self.expect("}", "'}' closing replication body")
                self.expect("}", "'}' closing replication")
                return N.Repl(count=first, parts=tuple(parts))
            parts = [first]
            while self.accept(","):
                parts.append(self.parse_expr(depth + 1))
            self.expect("}", "'}' closing concatenation")
            return N.Concat(parts=tuple(parts))
        shown = t.lexeme if t.kind != EOF else "end of file"
        self.error(f"expected expression, found {shown!r}", t)
        raise _Bail()


# ----------------------------------------------------------------- fronting


@lru_cache(maxsize=256)
def _parse_cached(source: str) -> tuple[N.SourceUnit, SyntaxReport]:
    try:
        tokens = tokenize(source)
    except LexicalError as exc:
        diag = Diagnostic("error", str(exc).split(": ", 1)[-1], exc.line, exc.column)
        return N.SourceUnit(), SyntaxReport(INVALID, (diag,), 0)
    parser = _Parser(tokens)
    unit = parser.parse_source()
    diags = tuple(parser.diagnostics)
    status = INVALID if any(d.severity == "error" for d in diags) else VALID
    return unit, SyntaxReport(status, diags, len(unit.modules))


def parse_source(source: str) -> tuple[N.SourceUnit, SyntaxReport]:
    """Parse and report; never raises on malformed input."""
    return _parse_cached(source)


def check_syntax(source: str) -> SyntaxReport:
    """The syntax gate: valid iff the source parses under the subset grammar."""
    return _parse_cached(source)[1]


# ----------------------------------------------------- interface extraction


def const_int(expr: N.Expr, params: dict[str, int]) -> int | None:
    """Fold a constant expression; None when it cannot be resolved."""
    if isinstance(expr, N.Num):
        return None if expr.is_real else expr.value
    if isinstance(expr, N.Ident):
        return params.get(expr.name)
    if isinstance(expr, N.Unary):
        v = const_int(expr.operand, params)
        if v is None:
            return None
        if expr.op == "-":
            return -v
        if expr.op == "+":
            return v
        if expr.op == "!":
            return int(v == 0)
        return None
    if isinstance(expr, N.Binary):
        a = const_int(expr.left, params)
        b = const_int(expr.right, params)
        if a is None or b is None:
            return None
        op = expr.op
        try:
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return a // b if b else None
            if op == "%":
                return a % b if b else None
            if op == "**":
                return a ** b if -64 <= b <= 64 else None
            if op == "<<":
                return a << b if 0 <= b <= 1024 else None
            if op == ">>":
                return a >> b if b >= 0 else None
        except (OverflowError, ValueError):
            return None
        return None
    if isinstance(expr, N.Ternary):
        c = const_int(expr.cond, params)
        if c is None:
            return None
        return const_int(expr.then if c else expr.other, params)
    return None


def resolve_params(module: N.Module) -> dict[str, int]:
    params: dict[str, int] = {}
    pending = list(module.header_params)
    for item in module.items:
        if isinstance(item, N.ParamDecl):
            pending.extend(item.items)
    for name, expr in pending:
        value = const_int(expr, params)
        if value is not None:
            params[name] = value
    return params


def _range_bounds(rng: N.Range | None, params: dict[str, int]) -> tuple[int, int]:
    if rng is None:
        return 0, 0
    msb = const_int(rng.msb, params)
    lsb = const_int(rng.lsb, params)
    if msb is None or lsb is None:
        return 0, 0  # unresolved width falls back to a single bit
    return msb, lsb


def extract_module_interface(source: str) -> list[ModuleInterface]:
    """One interface per module, ports in declaration order.

    Requires the source to pass the syntax gate; otherwise raises
    InvalidSourceError carrying the report.
    """
    unit, report = parse_source(source)
    if not report.ok:
        raise InvalidSourceError(report)
    interfaces: list[ModuleInterface] = []
    for module in unit.modules:
        params = resolve_params(module)
        ports: list[Port] = []
        if module.ansi_ports is not None:
            for decl in module.ansi_ports:
                msb, lsb = _range_bounds(decl.range, params)
                for name in decl.names:
                    ports.append(
                        Port(name, decl.direction, abs(msb - lsb) + 1, msb, lsb)
                    )
        else:
            body: dict[str, N.PortDecl] = {}
            for item in module.items:
                if isinstance(item, N.PortDecl):
                    for name in item.names:
                        body.setdefault(name, item)
            for name in module.header_names:
                decl = body.get(name)
                if decl is None:
                    ports.append(Port(name, "input", 1))
                    continue
                msb, lsb = _range_bounds(decl.range, params)
                ports.append(Port(name, decl.direction, abs(msb - lsb) + 1, msb, lsb))
        interfaces.append(ModuleInterface(name=module.name, ports=tuple(ports)))
    return interfaces
