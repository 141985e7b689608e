"""Hermetic evaluator for purely combinational single-module Verilog.

Supports wire/assign netlists over the usual expression operators (bitwise,
logical, arithmetic + - * / %, comparisons, shifts, concatenation,
replication, bit/part selects, ?: muxes). Evaluation walks assignments in
topological order; a dependency cycle is an error. Values are unsigned
bit-vectors; an unbound net reads as X, and X propagates through every
operator. Sequential logic (always blocks), instantiation, and memories are
out of scope and rejected loudly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    CombinationalCycleError,
    InvalidSourceError,
    StimulusError,
    UnsupportedConstructError,
)
from .syntax import nodes as N
from .syntax.parser import const_int, parse_source, resolve_params

X = None  # unknown value
_UNSIZED_WIDTH = 32
_MAX_REPL = 4096


@dataclass(frozen=True)
class StimulusTable:
    """Row-per-vector test: input bindings and the outputs they must produce."""

    inputs: tuple[dict[str, int], ...]
    expected: tuple[dict[str, int], ...]

    def __post_init__(self):
        if len(self.inputs) != len(self.expected):
            raise StimulusError(
                f"{len(self.inputs)} input rows but {len(self.expected)} expected rows"
            )
        if not self.inputs:
            raise StimulusError("stimulus table has no rows")

    @classmethod
    def from_json(cls, text: str) -> "StimulusTable":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StimulusError(f"stimulus is not valid JSON: {exc.msg}") from exc
        if not isinstance(data, dict) or "inputs" not in data or "expected" not in data:
            raise StimulusError("stimulus must be an object with 'inputs' and 'expected'")
        return cls(
            inputs=tuple(_parse_row(r, "inputs") for r in data["inputs"]),
            expected=tuple(_parse_row(r, "expected") for r in data["expected"]),
        )

    def to_json(self) -> str:
        return json.dumps({"inputs": list(self.inputs), "expected": list(self.expected)})


def _parse_row(row, section: str) -> dict[str, int]:
    if not isinstance(row, dict):
        raise StimulusError(f"{section} rows must be objects")
    out: dict[str, int] = {}
    for name, value in row.items():
        if isinstance(value, bool):
            out[name] = int(value)
        elif isinstance(value, int):
            if value < 0:
                raise StimulusError(f"{section}.{name}: negative value {value}")
            out[name] = value
        elif isinstance(value, str) and value and set(value) <= {"0", "1"}:
            out[name] = int(value, 2)
        else:
            raise StimulusError(
                f"{section}.{name}: expected a nonnegative integer or binary string, "
                f"got {value!r}"
            )
    return out


@dataclass(frozen=True)
class _Signal:
    name: str
    width: int
    msb: int
    lsb: int


def _mask(width: int) -> int:
    return (1 << width) - 1


class _Netlist:
    def __init__(self, source: str):
        unit, report = parse_source(source)
        if not report.ok:
            raise InvalidSourceError(report)
        if len(unit.modules) != 1:
            raise UnsupportedConstructError(
                f"expected exactly one module, found {len(unit.modules)}"
            )
        self.module = unit.modules[0]
        self.params = resolve_params(self.module)
        self.signals: dict[str, _Signal] = {}
        self.inputs: list[_Signal] = []
        self.outputs: list[_Signal] = []
        self._collect_signals()
        # drive groups: one per assign target; concat targets share a group
        self.groups: list[tuple[tuple[str, ...], N.Expr]] = []
        self.driver_of: dict[str, int] = {}
        self._collect_assigns()
        self.order = self._toposort()
        self._width_cache: dict[int, int] = {}

    # ------------------------------------------------------------- building

    def _bounds(self, rng: N.Range | None) -> tuple[int, int]:
        if rng is None:
            return 0, 0
        msb = const_int(rng.msb, self.params)
        lsb = const_int(rng.lsb, self.params)
        if msb is None or lsb is None:
            raise UnsupportedConstructError("unresolvable range bounds")
        return msb, lsb

    def _add_signal(self, name: str, rng: N.Range | None) -> _Signal:
        msb, lsb = self._bounds(rng)
        sig = _Signal(name, abs(msb - lsb) + 1, msb, lsb)
        if name in self.signals:
            raise UnsupportedConstructError(f"signal {name!r} declared twice")
        self.signals[name] = sig
        return sig

    def _collect_signals(self) -> None:
        mod = self.module
        port_dirs: dict[str, str] = {}
        if mod.ansi_ports is not None:
            for decl in mod.ansi_ports:
                if decl.net_kind == "reg":
                    raise UnsupportedConstructError(
                        "reg ports imply sequential logic, which the mini backend "
                        "does not model"
                    )
                for name in decl.names:
                    sig = self._add_signal(name, decl.range)
                    port_dirs[name] = decl.direction
        for item in mod.items:
            if isinstance(item, N.PortDecl):
                if item.net_kind == "reg":
                    raise UnsupportedConstructError("reg ports are not combinational")
                for name in item.names:
                    sig = self._add_signal(name, item.range)
                    port_dirs[name] = item.direction
            elif isinstance(item, N.NetDecl):
                if item.kind != "wire":
                    raise UnsupportedConstructError(
                        f"'{item.kind}' declarations are not supported by the mini "
                        "backend"
                    )
                for decl in item.names:
                    if decl.unpacked:
                        raise UnsupportedConstructError(
                            f"memory {decl.name!r} is not combinational"
                        )
                    if decl.name not in self.signals:
                        self._add_signal(decl.name, item.range)
            elif isinstance(item, (N.AlwaysBlock, N.InitialBlock)):
                raise UnsupportedConstructError(
                    "always/initial blocks are not supported by the mini backend"
                )
            elif isinstance(item, N.Instance):
                raise UnsupportedConstructError(
                    f"instantiation of {item.module!r} is not supported by the mini "
                    "backend"
                )
            elif isinstance(item, N.OpaqueRegion):
                raise UnsupportedConstructError(
                    f"'{item.kind}' regions are not supported by the mini backend"
                )
        for name in mod.header_names:
            if name not in port_dirs:
                raise UnsupportedConstructError(f"port {name!r} has no declaration")
        for name, direction in port_dirs.items():
            if direction == "input":
                self.inputs.append(self.signals[name])
            elif direction == "output":
                self.outputs.append(self.signals[name])
            else:
                raise UnsupportedConstructError("inout ports are not combinational")

    def _lhs_targets(self, lhs: N.Expr) -> tuple[str, ...]:
        if isinstance(lhs, N.Ident):
            if lhs.name not in self.signals:
                # implicit 1-bit net, standard Verilog behavior
                self.signals[lhs.name] = _Signal(lhs.name, 1, 0, 0)
            return (lhs.name,)
        if isinstance(lhs, N.Concat):
            names: list[str] = []
            for part in lhs.parts:
                names.extend(self._lhs_targets(part))
            return tuple(names)
        raise UnsupportedConstructError(
            "assignment targets must be plain nets or concatenations of nets"
        )

    def _collect_assigns(self) -> None:
        for item in self.module.items:
            if not isinstance(item, N.ContinuousAssign):
                continue
            for lhs, rhs in item.assignments:
                targets = self._lhs_targets(lhs)
                gid = len(self.groups)
                self.groups.append((targets, rhs))
                for name in targets:
                    if name in self.driver_of:
                        raise UnsupportedConstructError(
                            f"signal {name!r} has multiple drivers"
                        )
                    self.driver_of[name] = gid

    def _deps_of(self, expr: N.Expr, acc: set[str]) -> None:
        if isinstance(expr, N.Ident):
            if expr.name in self.signals and expr.name not in self.params:
                acc.add(expr.name)
        elif isinstance(expr, N.Unary):
            self._deps_of(expr.operand, acc)
        elif isinstance(expr, N.Binary):
            self._deps_of(expr.left, acc)
            self._deps_of(expr.right, acc)
        elif isinstance(expr, N.Ternary):
            self._deps_of(expr.cond, acc)
            self._deps_of(expr.then, acc)
            self._deps_of(expr.other, acc)
        elif isinstance(expr, (N.Concat, N.Repl)):
            for part in expr.parts:
                self._deps_of(part, acc)
            if isinstance(expr, N.Repl):
                self._deps_of(expr.count, acc)
        elif isinstance(expr, N.Select):
            self._deps_of(expr.base, acc)
            self._deps_of(expr.a, acc)
            if expr.b is not None:
                self._deps_of(expr.b, acc)
        elif isinstance(expr, N.Call):
            raise UnsupportedConstructError(
                f"function call {expr.name!r} is not supported by the mini backend"
            )

    def _toposort(self) -> list[int]:
        edges: dict[int, set[int]] = {gid: set() for gid in range(len(self.groups))}
        indeg = {gid: 0 for gid in range(len(self.groups))}
        for gid, (_, rhs) in enumerate(self.groups):
            deps: set[str] = set()
            self._deps_of(rhs, deps)
            for dep in deps:
                src = self.driver_of.get(dep)
                if src is not None and src != gid:
                    if gid not in edges[src]:
                        edges[src].add(gid)
                        indeg[gid] += 1
        ready = [gid for gid, d in indeg.items() if d == 0]
        order: list[int] = []
        while ready:
            gid = ready.pop()
            order.append(gid)
            for nxt in edges[gid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(self.groups):
            stuck = sorted(
                name
                for gid, d in indeg.items()
                if d > 0
                for name in self.groups[gid][0]
            )
            raise CombinationalCycleError(stuck)
        return order

    # ---------------------------------------------------------------- widths

    def _sd_width(self, expr: N.Expr) -> int:
        key = id(expr)
        cached = self._width_cache.get(key)
        if cached is not None:
            return cached
        width = self._sd_width_inner(expr)
        self._width_cache[key] = width
        return width

    def _sd_width_inner(self, expr: N.Expr) -> int:
        if isinstance(expr, N.Num):
            if expr.is_real:
                raise UnsupportedConstructError("real literals are not supported")
            return expr.width if expr.width else _UNSIZED_WIDTH
        if isinstance(expr, N.Ident):
            if expr.name in self.params:
                return _UNSIZED_WIDTH
            sig = self.signals.get(expr.name)
            return sig.width if sig else 1
        if isinstance(expr, N.Unary):
            if expr.op in ("!", "&", "|", "^", "~&", "~|", "~^", "^~"):
                return 1
            return self._sd_width(expr.operand)
        if isinstance(expr, N.Binary):
            op = expr.op
            if op in ("&&", "||") or op in ("==", "!=", "===", "!==", "<", "<=", ">", ">="):
                return 1
            if op in ("<<", ">>", "<<<", ">>>", "**"):
                return self._sd_width(expr.left)
            return max(self._sd_width(expr.left), self._sd_width(expr.right))
        if isinstance(expr, N.Ternary):
            return max(self._sd_width(expr.then), self._sd_width(expr.other))
        if isinstance(expr, N.Concat):
            return sum(self._sd_width(p) for p in expr.parts)
        if isinstance(expr, N.Repl):
            count = const_int(expr.count, self.params)
            if count is None or count < 0:
                raise UnsupportedConstructError("replication count must be constant")
            if count > _MAX_REPL:
                raise UnsupportedConstructError("replication count too large")
            return count * sum(self._sd_width(p) for p in expr.parts)
        if isinstance(expr, N.Select):
            if expr.kind == "bit":
                return 1
            if expr.kind == "part":
                a = const_int(expr.a, self.params)
                b = const_int(expr.b, self.params)
                if a is None or b is None:
                    raise UnsupportedConstructError("part select bounds must be constant")
                return abs(a - b) + 1
            w = const_int(expr.b, self.params)
            if w is None or w < 1:
                raise UnsupportedConstructError("indexed select width must be constant")
            return w
        if isinstance(expr, N.Str):
            raise UnsupportedConstructError("string operands are not supported")
        raise UnsupportedConstructError(f"unsupported expression {type(expr).__name__}")

    # ------------------------------------------------------------ evaluation

    def _bitpos(self, sig: _Signal, index: int) -> int | None:
        if sig.msb >= sig.lsb:
            pos = index - sig.lsb
        else:
            pos = sig.lsb - index
        return pos if 0 <= pos < sig.width else None

    def _eval(self, expr: N.Expr, w: int, env: dict[str, int | None]):
        if isinstance(expr, N.Num):
            return X if expr.value is None else expr.value & _mask(w)
        if isinstance(expr, N.Ident):
            if expr.name in self.params:
                return self.params[expr.name] & _mask(w)
            return env.get(expr.name, X)
        if isinstance(expr, N.Unary):
            return self._eval_unary(expr, w, env)
        if isinstance(expr, N.Binary):
            return self._eval_binary(expr, w, env)
        if isinstance(expr, N.Ternary):
            cond = self._eval(expr.cond, self._sd_width(expr.cond), env)
            if cond is X:
                return X
            branch = expr.then if cond else expr.other
            return self._eval(branch, w, env)
        if isinstance(expr, N.Concat):
            return self._eval_concat(expr.parts, env)
        if isinstance(expr, N.Repl):
            count = const_int(expr.count, self.params) or 0
            body = self._eval_concat(expr.parts, env)
            if body is X:
                return X
            body_w = sum(self._sd_width(p) for p in expr.parts)
            value = 0
            for _ in range(count):
                value = (value << body_w) | body
            return value
        if isinstance(expr, N.Select):
            return self._eval_select(expr, env)
        raise UnsupportedConstructError(f"unsupported expression {type(expr).__name__}")

    def _eval_concat(self, parts: Sequence[N.Expr], env):
        value = 0
        for part in parts:
            pw = self._sd_width(part)
            pv = self._eval(part, pw, env)
            if pv is X:
                return X
            value = (value << pw) | (pv & _mask(pw))
        return value

    def _eval_select(self, expr: N.Select, env):
        if not isinstance(expr.base, N.Ident) or expr.base.name not in self.signals:
            raise UnsupportedConstructError("selects are supported on nets only")
        sig = self.signals[expr.base.name]
        base = env.get(sig.name, X)
        if base is X:
            return X
        if expr.kind == "bit":
            idx = self._eval(expr.a, self._sd_width(expr.a), env)
            if idx is X:
                return X
            pos = self._bitpos(sig, idx)
            return X if pos is None else (base >> pos) & 1
        a = const_int(expr.a, self.params)
        b = const_int(expr.b, self.params)
        if a is None or b is None:
            raise UnsupportedConstructError("select bounds must be constant")
        if expr.kind == "part":
            i1, i2 = a, b
        elif expr.kind == "plus":  # covers indices a .. a+b-1
            i1, i2 = a, a + b - 1
        else:  # minus: covers indices a-b+1 .. a
            i1, i2 = a, a - b + 1
        p1 = self._bitpos(sig, i1)
        p2 = self._bitpos(sig, i2)
        if p1 is None or p2 is None:
            return X
        lo, hi = min(p1, p2), max(p1, p2)
        return (base >> lo) & _mask(hi - lo + 1)

    def _eval_unary(self, expr: N.Unary, w: int, env):
        op = expr.op
        if op in ("&", "|", "^", "~&", "~|", "~^", "^~"):
            ow = self._sd_width(expr.operand)
            v = self._eval(expr.operand, ow, env)
            if v is X:
                return X
            if op in ("&", "~&"):
                bit = int(v == _mask(ow))
            elif op in ("|", "~|"):
                bit = int(v != 0)
            else:
                bit = bin(v).count("1") & 1
            if op.startswith("~") or op == "^~":
                bit ^= 1
            return bit
        v = self._eval(expr.operand, w, env)
        if op == "!":
            return X if v is X else int(v == 0)
        if v is X:
            return X
        if op == "~":
            return (~v) & _mask(w)
        if op == "-":
            return (-v) & _mask(w)
        return v  # unary +

    def _eval_binary(self, expr: N.Binary, w: int, env):
        op = expr.op
        if op in ("&&", "||"):
            a = self._eval(expr.left, self._sd_width(expr.left), env)
            b = self._eval(expr.right, self._sd_width(expr.right), env)
            ta = None if a is X else bool(a)
            tb = None if b is X else bool(b)
            if op == "&&":
                if ta is False or tb is False:
                    return 0
                return X if None in (ta, tb) else 1
            if ta is True or tb is True:
                return 1
            return X if None in (ta, tb) else 0
        if op in ("==", "!=", "===", "!==", "<", "<=", ">", ">="):
            cw = max(self._sd_width(expr.left), self._sd_width(expr.right))
            a = self._eval(expr.left, cw, env)
            b = self._eval(expr.right, cw, env)
            if op in ("===", "!=="):
                eq = int(a == b)  # X === X holds under the all-or-nothing model
                return eq if op == "===" else eq ^ 1
            if a is X or b is X:
                return X
            return int({
                "==": a == b, "!=": a != b,
                "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
            }[op])
        if op in ("<<", ">>", "<<<", ">>>"):
            a = self._eval(expr.left, w, env)
            sh = self._eval(expr.right, self._sd_width(expr.right), env)
            if a is X or sh is X:
                return X
            if op in ("<<", "<<<"):
                return 0 if sh >= w else (a << sh) & _mask(w)
            return 0 if sh >= w else a >> sh  # unsigned, so >>> is logical
        a = self._eval(expr.left, w, env)
        b = self._eval(expr.right, w, env)
        if a is X or b is X:
            return X
        if op == "+":
            return (a + b) & _mask(w)
        if op == "-":
            return (a - b) & _mask(w)
        if op == "*":
            return (a * b) & _mask(w)
        if op == "/":
            return X if b == 0 else (a // b) & _mask(w)
        if op == "%":
            return X if b == 0 else (a % b) & _mask(w)
        if op == "&":
            return a & b
        if op == "|":
            return a | b
        if op == "^":
            return a ^ b
        if op in ("^~", "~^"):
            return (~(a ^ b)) & _mask(w)
        if op == "**":
            return pow(a, b, 1 << w) if b >= 0 else X
        raise UnsupportedConstructError(f"unsupported operator {op!r}")

    def evaluate_row(self, bindings: Mapping[str, int]) -> dict[str, int | None]:
        env: dict[str, int | None] = {}
        for sig in self.inputs:
            if sig.name not in bindings:
                raise StimulusError(f"row does not bind input port {sig.name!r}")
            value = bindings[sig.name]
            if value > _mask(sig.width):
                raise StimulusError(
                    f"value {value} does not fit input {sig.name!r} "
                    f"({sig.width} bits)"
                )
            env[sig.name] = value
        for extra in bindings:
            if extra not in {s.name for s in self.inputs}:
                raise StimulusError(f"row binds unknown input {extra!r}")
        for gid in self.order:
            targets, rhs = self.groups[gid]
            total = sum(self.signals[t].width for t in targets)
            w = max(total, self._sd_width(rhs))
            value = self._eval(rhs, w, env)
            consumed = 0
            for name in targets:
                sw = self.signals[name].width
                if value is X:
                    env[name] = X
                else:
                    shift = total - consumed - sw
                    env[name] = (value >> shift) & _mask(sw)
                consumed += sw
        return {sig.name: env.get(sig.name, X) for sig in self.outputs}


def evaluate_combinational(
    source: str, stimuli: StimulusTable
) -> list[dict[str, int | None]]:
    """Evaluate every stimulus row; returns one output binding per row."""
    net = _Netlist(source)
    return [net.evaluate_row(row) for row in stimuli.inputs]


def run_stimulus(source: str, stimuli: StimulusTable) -> tuple[bool, str]:
    """Evaluate and compare against expectations; (all_passed, detail)."""
    outputs = evaluate_combinational(source, stimuli)
    failures: list[str] = []
    for i, (got, want) in enumerate(zip(outputs, stimuli.expected)):
        for name, expected in want.items():
            if name not in got:
                failures.append(f"row {i}: no output port {name!r}")
                continue
            actual = got[name]
            if actual is X:
                failures.append(f"row {i}: {name} expected {expected}, got X")
            elif actual != expected:
                failures.append(f"row {i}: {name} expected {expected}, got {actual}")
    if failures:
        return False, "; ".join(failures[:8])
    return True, f"{len(outputs)} rows matched"
