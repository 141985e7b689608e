"""Verilog lexing, parsing, the syntax gate, and interface extraction."""

from .lexer import (
    COMMENT,
    EOF,
    IDENT,
    KEYWORD,
    NUMBER,
    OPERATOR,
    PUNCT,
    STRING,
    Token,
    detokenize,
    parse_number_literal,
    tokenize,
)
from .parser import (
    INVALID,
    VALID,
    Diagnostic,
    ModuleInterface,
    Port,
    SyntaxReport,
    check_syntax,
    extract_module_interface,
    parse_source,
)

__all__ = [
    "COMMENT", "EOF", "IDENT", "KEYWORD", "NUMBER", "OPERATOR", "PUNCT",
    "STRING", "Token", "detokenize", "parse_number_literal", "tokenize",
    "INVALID", "VALID", "Diagnostic", "ModuleInterface", "Port",
    "SyntaxReport", "check_syntax", "extract_module_interface", "parse_source",
]
