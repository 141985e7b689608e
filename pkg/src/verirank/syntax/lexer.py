"""Tokenizer for the Verilog-2001 subset understood by the syntax gate.

Tokens carry the whitespace that preceded them, so concatenating
``leading_ws + lexeme`` over the whole stream reproduces the input exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import LexicalError

# token kinds
IDENT = "identifier"
KEYWORD = "keyword"
NUMBER = "number"
OPERATOR = "operator"
PUNCT = "punctuation"
STRING = "string"
COMMENT = "comment"
EOF = "eof"

KEYWORDS = frozenset(
    """
    always and assign automatic begin buf bufif0 bufif1 case casex casez cell
    cmos config deassign default defparam design disable edge else end endcase
    endconfig endfunction endgenerate endmodule endprimitive endspecify
    endtable endtask event for force forever fork function generate genvar
    highz0 highz1 if ifnone incdir initial inout input instance integer join
    large liblist library localparam macromodule medium module nand negedge
    nmos nor noshowcancelled not notif0 notif1 or output parameter pmos
    posedge primitive pull0 pull1 pulldown pullup pulsestyle_ondetect
    pulsestyle_onevent rcmos real realtime reg release repeat rnmos rpmos
    rtran rtranif0 rtranif1 scalared showcancelled signed small specify
    specparam strong0 strong1 supply0 supply1 table task time tran tranif0
    tranif1 tri tri0 tri1 triand trior trireg unsigned use vectored wait wand
    weak0 weak1 while wire wor xnor xor
    """.split()
)

# Directives that consume the rest of their line (no preprocessing is done).
_LINE_DIRECTIVES = frozenset(
    """
    define undef include timescale ifdef ifndef elsif else endif
    default_nettype resetall celldefine endcelldefine unconnected_drive
    nounconnected_drive line pragma begin_keywords end_keywords protect
    endprotect
    """.split()
)

_BASE_DIGITS = {
    "b": "01xz?_",
    "o": "01234567xz?_",
    "d": "0123456789xz?_",
    "h": "0123456789abcdefxz?_",
}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    line: int
    column: int
    leading_ws: str = ""
    directive: str | None = None  # set on line-directive comment tokens


_WS = re.compile(r"[ \t\r\n\f]+")

_MASTER = re.compile(
    r"""
     (?P<lcomment>//[^\n]*)
    |(?P<bcomment>/\*.*?\*/)
    |(?P<badbcomment>/\*)
    |(?P<directive>`[a-zA-Z_][a-zA-Z0-9_$]*)
    |(?P<string>"(?:\\.|[^"\\\n])*")
    |(?P<badstring>")
    |(?P<sized>(?:[0-9][0-9_]*)?[ \t]*'[ \t]*[sS]?[a-zA-Z][0-9a-fA-FxzXZ?_]*)
    |(?P<badtick>')
    |(?P<real>[0-9][0-9_]*\.[0-9][0-9_]*(?:[eE][+-]?[0-9]+)?|[0-9][0-9_]*[eE][+-]?[0-9]+)
    |(?P<number>[0-9][0-9_]*)
    |(?P<sysident>\$[a-zA-Z_$][a-zA-Z0-9_$]*)
    |(?P<escident>\\[^ \t\r\n\f]+)
    |(?P<ident>[a-zA-Z_][a-zA-Z0-9_$]*)
    |(?P<op>\+:|-:|<<<|>>>|===|!==|\*\*|<<|>>|<=|>=|==|!=|&&|\|\||~&|~\||~\^|\^~|->|[+\-*/%<>!~&|^=?:])
    |(?P<punct>[()\[\]{};,.#@])
    """,
    re.VERBOSE | re.DOTALL,
)


def _advance(text: str, line: int, col: int) -> tuple[int, int]:
    nl = text.count("\n")
    if nl:
        return line + nl, len(text) - text.rfind("\n")
    return line, col + len(text)


def _validate_sized(lexeme: str, line: int, col: int) -> None:
    body = lexeme.split("'", 1)[1].replace(" ", "").replace("\t", "")
    if body and body[0] in "sS":
        body = body[1:]
    if not body:
        raise LexicalError("malformed sized literal: missing base", line, col)
    base, digits = body[0].lower(), body[1:].replace("_", "")
    if base not in _BASE_DIGITS:
        raise LexicalError(f"malformed sized literal: unknown base '{base}", line, col)
    if not digits:
        raise LexicalError("malformed sized literal: missing digits", line, col)
    allowed = _BASE_DIGITS[base]
    for ch in digits.lower():
        if ch not in allowed:
            raise LexicalError(
                f"malformed sized literal: digit {ch!r} invalid for base '{base}",
                line,
                col,
            )


def _directive_extent(source: str, start: int, name: str) -> int:
    """Return the end offset of a line directive starting at ``start``."""
    end = source.find("\n", start)
    if end == -1:
        return len(source)
    if name == "define":
        # macro bodies may continue over backslash-terminated lines
        while source[:end].rstrip("\r").endswith("\\"):
            nxt = source.find("\n", end + 1)
            if nxt == -1:
                return len(source)
            end = nxt
    return end


def tokenize(source: str) -> list[Token]:
    """Produce the full token stream for ``source``, ending in an eof token.

    Comments (and skipped compiler directives) are kept as tokens so the
    stream is lossless. Raises LexicalError on unterminated strings or block
    comments and on malformed sized literals.
    """
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(source)
    lead = ""
    while pos < n:
        ws = _WS.match(source, pos)
        if ws:
            lead = ws.group()
            line, col = _advance(lead, line, col)
            pos = ws.end()
            if pos >= n:
                break
        else:
            lead = ""
        m = _MASTER.match(source, pos)
        if m is None:
            raise LexicalError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        directive = None
        if kind == "badbcomment":
            raise LexicalError("unterminated block comment", line, col)
        if kind == "badstring":
            raise LexicalError("unterminated string literal", line, col)
        if kind == "badtick":
            raise LexicalError("malformed sized literal", line, col)
        if kind in ("sized", "real", "number"):
            if kind == "sized":
                _validate_sized(text, line, col)
            nxt = source[m.end()] if m.end() < n else ""
            if nxt.isalnum() or nxt == "_":  # 2'hXG, 1w, ...
                raise LexicalError(
                    f"malformed literal: {text + nxt!r}...", line, col
                )
            tok_kind = NUMBER
        elif kind == "string":
            tok_kind = STRING
        elif kind in ("lcomment", "bcomment"):
            tok_kind = COMMENT
        elif kind == "directive":
            name = text[1:]
            if name in _LINE_DIRECTIVES:
                end = _directive_extent(source, m.end(), name)
                text = source[m.start():end]
                tok_kind = COMMENT
                directive = name
            else:
                tok_kind = IDENT  # macro use, e.g. `WIDTH in an expression
        elif kind == "ident":
            tok_kind = KEYWORD if text in KEYWORDS else IDENT
        elif kind in ("sysident", "escident"):
            tok_kind = IDENT
        elif kind == "op":
            tok_kind = OPERATOR
        else:
            tok_kind = PUNCT
        tokens.append(Token(tok_kind, text, line, col, lead, directive))
        line, col = _advance(text, line, col)
        pos += len(text)
        lead = ""
    tokens.append(Token(EOF, "", line, col, lead))
    return tokens


def detokenize(tokens: list[Token]) -> str:
    return "".join(t.leading_ws + t.lexeme for t in tokens)


def parse_number_literal(lexeme: str) -> tuple[int | None, int | None, bool]:
    """Decode a number token into (width, value, is_real).

    value is None when the literal contains x/z/? digits. Sized values are
    truncated to their declared width, matching simulator behavior.
    """
    if "'" not in lexeme:
        text = lexeme.replace("_", "")
        if "." in text or "e" in text or "E" in text:
            return None, None, True
        return None, int(text), False
    size_part, body = lexeme.split("'", 1)
    size_part = size_part.strip()
    width = int(size_part.replace("_", "")) if size_part else None
    body = body.replace(" ", "").replace("\t", "")
    if body[0] in "sS":
        body = body[1:]
    base = body[0].lower()
    digits = body[1:].replace("_", "").lower()
    if any(ch in "xz?" for ch in digits):
        return width, None, False
    radix = {"b": 2, "o": 8, "d": 10, "h": 16}[base]
    value = int(digits, radix)
    if width is not None:
        value &= (1 << width) - 1
    return width, value, False
