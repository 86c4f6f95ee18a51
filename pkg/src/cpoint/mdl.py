"""MDL: the portfolio model-description language.

A program is a sequence of statements over an asset universe: set
definitions (boolean associative vectors), associative-vector and scalar
assignments, constraint declarations and print directives.  The first
statement must define the universe `all`; constraints compile to the
equality/inequality blocks of a QpModel, with `>=` rows sign-flipped at
emission and `for[...]` patterns expanded one row per member.  Assets
declared in the `short` set have expected return and correlation signs
flipped before the covariance is assembled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .moments import MomentSet, covariance_from_corr, validate_correlation
from .options import OptionSpec
from .qp import QpModel

RESERVED = ("abs", "exp", "for", "ln", "max", "min", "maxe", "mine", "print", "sign", "sum")
MAX_NAME_LEN = 15


class MdlError(Exception):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f" (line {line}" + (f", col {col})" if col is not None else ")") if line else ""
        super().__init__(message + where)


class LexError(MdlError):
    pass


class ParseError(MdlError):
    pass


class UnknownName(MdlError):
    pass


class UniverseViolation(MdlError):
    pass


class DivisionByZero(MdlError):
    pass


class MissingNormalConstraint(MdlError):
    pass


# --- lexer -------------------------------------------------------------------

@dataclass
class Token:
    kind: str   # NAME KEYWORD NUMBER OP EOF
    value: str | float
    line: int
    col: int


_TWO_CHAR_OPS = ("==", "<=", ">=", "~=")
_ONE_CHAR_OPS = "=<>~&|\\+-*/^(){}[],;:@$"


def tokenize(source: str) -> list[Token]:
    """Tokens with positions; '#' comments to end of line.

    Numeric literals follow the strict fixed/floating rule: a decimal
    point requires a digit on both sides, so '.15' and '10.' are lexical
    errors; exponents use E with an optional sign.
    """
    tokens: list[Token] = []
    line, col = 1, 1
    i, end = 0, len(source)

    def prev_is_value() -> bool:
        if not tokens:
            return False
        t = tokens[-1]
        return t.kind in ("NAME", "NUMBER", "KEYWORD") or (
            t.kind == "OP" and t.value in (")", "]", "}"))

    while i < end:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < end and source[i] != "\n":
                i += 1
            continue
        start_col = col
        # a sign binds to the digits that follow it (no space between)
        # wherever a binary operator cannot stand
        if ch in "+-" and i + 1 < end and source[i + 1].isdigit() and not prev_is_value():
            sign = -1.0 if ch == "-" else 1.0
            i += 1
            col += 1
            ch = source[i]
        else:
            sign = None
        if ch.isalpha():
            j = i
            while j < end and (source[j].isalnum() or source[j] in "_."):
                j += 1
            word = source[i:j]
            if len(word) > MAX_NAME_LEN:
                raise LexError(f"name {word!r} exceeds {MAX_NAME_LEN} characters", line, start_col)
            kind = "KEYWORD" if word in RESERVED else "NAME"
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < end and source[j].isdigit():
                j += 1
            if j < end and source[j] == ".":
                j += 1
                if j >= end or not source[j].isdigit():
                    raise LexError("digit required after the decimal point", line, start_col)
                while j < end and source[j].isdigit():
                    j += 1
            if j < end and source[j] in "eE":
                k = j + 1
                if k < end and source[k] in "+-":
                    k += 1
                if k < end and source[k].isdigit():
                    j = k
                    while j < end and source[j].isdigit():
                        j += 1
            value = float(source[i:j])
            tokens.append(Token("NUMBER", value if sign is None else sign * value,
                                line, start_col))
            col += j - i
            i = j
            continue
        if ch == ".":
            raise LexError("number must not start with a bare point (write 0.15, not .15)",
                           line, start_col)
        two = source[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("OP", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("OP", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise LexError(f"unexpected character {ch!r} (ASCII {ord(ch)})", line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# --- AST ---------------------------------------------------------------------

@dataclass
class Num:
    value: float


@dataclass
class Name:
    ident: str
    line: int = 0


@dataclass
class LiteralEntry:
    value: float | str | None  # None -> membership entry; str -> ident@ident
    name: str


@dataclass
class Literal:
    entries: list[LiteralEntry]
    line: int = 0


@dataclass
class UnOp:
    op: str
    operand: object


@dataclass
class BinOp:
    op: str
    left: object
    right: object
    line: int = 0


@dataclass
class Call:
    fn: str
    args: list
    line: int = 0


@dataclass
class Assign:
    name: str
    domain: object | None
    expr: object
    line: int = 0


@dataclass
class Constraint:
    name: str
    pattern: str              # 'sum' | 'foreach' | 'single'
    subject: object           # set expression, or asset name for 'single'
    relation: str             # '==' | '<=' | '>='
    rhs: object
    line: int = 0


@dataclass
class Print:
    expr: object
    line: int = 0


@dataclass
class MdlProgram:
    statements: list


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect_op(self, op: str) -> Token:
        t = self.next()
        if t.kind != "OP" or t.value != op:
            raise ParseError(f"expected {op!r}, found {t.value!r}", t.line, t.col)
        return t

    def expect_name(self) -> Token:
        t = self.next()
        if t.kind == "KEYWORD":
            raise LexError(f"reserved word {t.value!r} cannot be used as a name",
                           t.line, t.col)
        if t.kind != "NAME":
            raise ParseError(f"expected a name, found {t.value!r}", t.line, t.col)
        return t

    def at_op(self, op: str) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.value == op

    def parse_program(self) -> MdlProgram:
        statements = []
        while self.peek().kind != "EOF":
            statements.append(self.parse_statement())
        if not statements:
            raise ParseError("empty program", 1, 1)
        return MdlProgram(statements)

    def parse_statement(self):
        t = self.peek()
        if t.kind == "KEYWORD" and t.value == "print":
            self.next()
            expr = self.parse_expr()
            self.expect_op(";")
            return Print(expr, t.line)
        if t.kind == "OP" and t.value == "$":
            return self.parse_anonymous_single()
        name_tok = self.expect_name()
        nxt = self.peek()
        if nxt.kind == "OP" and nxt.value == ":":
            self.next()
            return self.parse_constraint_body(name_tok)
        domain = None
        if nxt.kind == "OP" and nxt.value == "[":
            self.next()
            domain = self.parse_expr()
            self.expect_op("]")
        self.expect_op("=")
        expr = self.parse_expr()
        self.expect_op(";")
        return Assign(name_tok.value, domain, expr, name_tok.line)

    def parse_anonymous_single(self):
        t = self.peek()
        raise ParseError("constraints need a name before ':'", t.line, t.col)

    def parse_constraint_body(self, name_tok: Token):
        t = self.peek()
        if t.kind == "KEYWORD" and t.value in ("sum", "for"):
            self.next()
            self.expect_op("[")
            subject = self.parse_expr()
            self.expect_op("]")
            self.expect_op("$")
            pattern = "sum" if t.value == "sum" else "foreach"
        elif t.kind == "OP" and t.value == "$":
            self.next()
            self.expect_op("[")
            subject = Name(self.expect_name().value, t.line)
            self.expect_op("]")
            pattern = "single"
        else:
            raise ParseError(f"expected sum[...], for[...] or $[...], found {t.value!r}",
                             t.line, t.col)
        rel = self.next()
        if rel.kind != "OP" or rel.value not in ("==", "<=", ">="):
            if rel.kind == "OP" and rel.value == "=":
                raise ParseError("constraints use '==', assignment uses '='",
                                 rel.line, rel.col)
            raise ParseError(f"expected ==, <= or >=, found {rel.value!r}", rel.line, rel.col)
        rhs = self.parse_expr()
        self.expect_op(";")
        return Constraint(name_tok.value, pattern, subject, rel.value, rhs, name_tok.line)

    # precedence: comparisons < union/difference < intersection < complement,
    # then additive < multiplicative < power < unary for arithmetic
    def parse_expr(self):
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.parse_union()
        t = self.peek()
        if t.kind == "OP" and t.value in ("==", "<=", ">=", "<", ">", "~="):
            self.next()
            right = self.parse_union()
            return BinOp(t.value, left, right, t.line)
        return left

    def parse_union(self):
        node = self.parse_intersection()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.value in ("|", "\\"):
                self.next()
                node = BinOp(t.value, node, self.parse_intersection(), t.line)
            else:
                return node

    def parse_intersection(self):
        node = self.parse_additive()
        while self.at_op("&"):
            t = self.next()
            node = BinOp("&", node, self.parse_additive(), t.line)
        return node

    def parse_additive(self):
        node = self.parse_multiplicative()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.value in ("+", "-"):
                self.next()
                node = BinOp(t.value, node, self.parse_multiplicative(), t.line)
            else:
                return node

    def parse_multiplicative(self):
        node = self.parse_power()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.value in ("*", "/"):
                self.next()
                node = BinOp(t.value, node, self.parse_power(), t.line)
            else:
                return node

    def parse_power(self):
        node = self.parse_unary()
        if self.at_op("^"):
            t = self.next()
            return BinOp("^", node, self.parse_power(), t.line)
        return node

    def parse_unary(self):
        t = self.peek()
        if t.kind == "OP" and t.value == "~":
            self.next()
            return UnOp("~", self.parse_unary())
        if t.kind == "OP" and t.value == "-":
            self.next()
            return UnOp("-", self.parse_unary())
        if t.kind == "OP" and t.value == "+":
            self.next()
            return self.parse_unary()
        return self.parse_atom()

    def parse_atom(self):
        t = self.next()
        if t.kind == "NUMBER":
            return Num(t.value)
        if t.kind == "NAME":
            return Name(t.value, t.line)
        if t.kind == "KEYWORD" and t.value in ("ln", "exp", "abs", "sign", "maxe", "mine",
                                               "sum", "max", "min"):
            self.expect_op("(")
            args = [self.parse_expr()]
            while self.at_op(","):
                self.next()
                args.append(self.parse_expr())
            self.expect_op(")")
            return Call(t.value, args, t.line)
        if t.kind == "OP" and t.value == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if t.kind == "OP" and t.value == "{":
            return self.parse_literal(t)
        raise ParseError(f"unexpected {t.value!r}", t.line, t.col)

    def parse_literal(self, opening: Token):
        entries: list[LiteralEntry] = []
        if self.at_op("}"):
            self.next()
            return Literal(entries, opening.line)
        while True:
            entries.append(self.parse_literal_entry())
            t = self.next()
            if t.kind == "OP" and t.value == "}":
                break
            if not (t.kind == "OP" and t.value == ","):
                raise ParseError(f"expected ',' or '}}' in literal, found {t.value!r}",
                                 t.line, t.col)
        return Literal(entries, opening.line)

    def parse_literal_entry(self) -> LiteralEntry:
        t = self.next()
        sign = 1.0
        if t.kind == "OP" and t.value in ("-", "+"):
            sign = -1.0 if t.value == "-" else 1.0
            t = self.next()
        if t.kind == "NUMBER":
            self.expect_op("@")
            name = self.expect_name()
            return LiteralEntry(sign * t.value, name.value)
        if t.kind == "NAME":
            if self.at_op("@"):
                self.next()
                target = self.expect_name()
                return LiteralEntry(t.value, target.value)  # ident@ident (deriv files)
            return LiteralEntry(None, t.value)
        raise ParseError(f"expected number@NAME or NAME in literal, found {t.value!r}",
                         t.line, t.col)


def parse(tokens: list[Token]) -> MdlProgram:
    return _Parser(tokens).parse_program()


def parse_source(source: str) -> MdlProgram:
    return parse(tokenize(source))


# --- rendering (canonical text) ----------------------------------------------

def _render_expr(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, UnOp):
        return f"{node.op}({_render_expr(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_render_expr(node.left)} {node.op} {_render_expr(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(_render_expr(a) for a in node.args)})"
    if isinstance(node, Literal):
        parts = []
        for e in node.entries:
            if e.value is None:
                parts.append(e.name)
            elif isinstance(e.value, str):
                parts.append(f"{e.value}@{e.name}")
            else:
                parts.append(f"{e.value!r}@{e.name}")
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot render {node!r}")


def render(program: MdlProgram) -> str:
    """Canonical text whose parse is structurally identical."""
    out = []
    for st in program.statements:
        if isinstance(st, Assign):
            dom = f"[{_render_expr(st.domain)}]" if st.domain is not None else ""
            out.append(f"{st.name}{dom} = {_render_expr(st.expr)};")
        elif isinstance(st, Constraint):
            if st.pattern == "single":
                body = f"$[{_render_expr(st.subject)}]"
            else:
                kw = "sum" if st.pattern == "sum" else "for"
                body = f"{kw}[{_render_expr(st.subject)}] $"
            out.append(f"{st.name}: {body} {st.relation} {_render_expr(st.rhs)};")
        elif isinstance(st, Print):
            out.append(f"print {_render_expr(st.expr)};")
        else:
            raise TypeError(f"cannot render statement {st!r}")
    return "\n".join(out) + "\n"


# --- evaluation --------------------------------------------------------------

@dataclass
class SetValue:
    mask: np.ndarray

    def to_vector(self) -> np.ndarray:
        return self.mask.astype(float)


@dataclass
class ConstraintRow:
    name: str
    kind: str          # 'eq' | 'le'  (ge rows are flipped on emission)
    coeffs: np.ndarray
    rhs: float
    line: int


@dataclass
class Evaluation:
    universe: list[str]
    bindings: dict
    rows_eq: list[ConstraintRow]
    rows_le: list[ConstraintRow]
    print_log: list[str]
    short_mask: np.ndarray

    def value_of(self, name: str):
        return self.bindings[name]


def _fmt_value(value) -> str:
    # debug log renders numbers in scientific notation, 6 significant digits
    if isinstance(value, SetValue):
        return "{" + ", ".join(f"{int(v)}" for v in value.mask) + "}"
    if isinstance(value, np.ndarray):
        return "{" + ", ".join(f"{v:.5E}" for v in value) + "}"
    return f"{value:.5E}"


class _Evaluator:
    def __init__(self, program: MdlProgram, moments: MomentSet):
        self.program = program
        self.moments = moments
        self.universe: list[str] = []
        self.index: dict[str, int] = {}
        self.bindings: dict = {}
        self.rows_eq: list[ConstraintRow] = []
        self.rows_le: list[ConstraintRow] = []
        self.print_log: list[str] = []
        self.seen_inequality = False

    @property
    def n(self) -> int:
        return len(self.universe)

    def run(self) -> Evaluation:
        statements = self.program.statements
        first = statements[0]
        if not (isinstance(first, Assign) and first.name == "all" and first.domain is None
                and isinstance(first.expr, Literal)):
            st_line = getattr(first, "line", 1)
            raise MdlError("the first statement must define the universe: all = {...};",
                           st_line)
        names = []
        for e in first.expr.entries:
            if e.value is not None:
                raise MdlError("the universe lists plain asset names", first.line)
            if e.name in names:
                raise MdlError(f"asset {e.name} listed twice in the universe", first.line)
            if e.name not in self.moments.names:
                raise UnknownName(f"asset {e.name} has no moment data", first.line)
            names.append(e.name)
        self.universe = names
        self.index = {nm: i for i, nm in enumerate(names)}
        active = self.moments.restrict(names)
        self.bindings["all"] = SetValue(np.ones(self.n, dtype=bool))
        self.bindings["er"] = active.er.copy()
        self.bindings["std"] = active.std.copy()
        self._active_correl = active.correl

        for st in statements[1:]:
            if isinstance(st, Assign):
                self.do_assign(st)
            elif isinstance(st, Constraint):
                self.do_constraint(st)
            elif isinstance(st, Print):
                value = self.eval(st.expr)
                label = st.expr.ident if isinstance(st.expr, Name) else "expr"
                self.print_log.append(f"{label} = {_fmt_value(value)}")
            else:
                raise MdlError(f"unsupported statement {st!r}")

        short = self.bindings.get("short")
        short_mask = short.mask.copy() if isinstance(short, SetValue) else np.zeros(self.n, bool)
        return Evaluation(self.universe, self.bindings, self.rows_eq, self.rows_le,
                          self.print_log, short_mask)

    # -- statements

    def _kind_of(self, value) -> str:
        if isinstance(value, SetValue):
            return "set"
        if isinstance(value, np.ndarray):
            return "vector"
        return "scalar"

    def do_assign(self, st: Assign):
        if st.name == "all":
            raise MdlError("the universe cannot be redefined", st.line)
        if st.name in RESERVED:
            raise LexError(f"reserved word {st.name!r} cannot be used as a name", st.line)
        value = self.eval(st.expr)
        old = self.bindings.get(st.name)
        if old is not None:
            old_kind, new_kind = self._kind_of(old), self._kind_of(value)
            if old_kind != new_kind and not (old_kind == "vector" and new_kind == "scalar"
                                             and st.domain is not None):
                raise MdlError(
                    f"{st.name!r} already names a {old_kind}; "
                    f"one name cannot hold two kinds of object", st.line)
        if st.domain is None:
            self.bindings[st.name] = value
            return
        domain = self.eval_domain(st.domain, st.line)
        if isinstance(st.expr, Literal):
            self.check_literal_domain(st.expr, domain, st.line)
        if isinstance(value, SetValue):
            base = old.mask.copy() if isinstance(old, SetValue) else np.zeros(self.n, bool)
            base[domain] = value.mask[domain]
            self.bindings[st.name] = SetValue(base)
            return
        vec = self.as_vector(value, st.line)
        base = old.copy() if isinstance(old, np.ndarray) else np.zeros(self.n)
        base[domain] = vec[domain]
        self.bindings[st.name] = base

    def check_literal_domain(self, lit: Literal, domain: np.ndarray, line: int):
        for e in lit.entries:
            if e.name in self.index and not domain[self.index[e.name]]:
                raise UniverseViolation(
                    f"asset {e.name} lies outside the assignment domain", line)

    def do_constraint(self, st: Constraint):
        if st.relation == "==":
            if self.seen_inequality:
                raise MdlError(
                    f"equality constraint {st.name!r} after an inequality; "
                    "equalities must come first", st.line)
        else:
            self.seen_inequality = True
        rhs_value = self.eval(st.rhs)

        if st.pattern == "single":
            asset = st.subject.ident
            if asset not in self.index:
                raise UnknownName(f"asset {asset} not in the universe", st.line)
            coeffs = np.zeros(self.n)
            coeffs[self.index[asset]] = 1.0
            rhs = self.rhs_at(rhs_value, self.index[asset], st.line)
            self.push_row(st, coeffs, rhs)
            return

        mask = self.eval_domain(st.subject, st.line)
        if st.pattern == "sum":
            if isinstance(rhs_value, np.ndarray) or isinstance(rhs_value, SetValue):
                raise MdlError(f"sum constraint {st.name!r} needs a scalar bound", st.line)
            self.push_row(st, mask.astype(float), float(rhs_value))
            return
        # foreach: one row per member, in universe order
        for i in np.flatnonzero(mask):
            coeffs = np.zeros(self.n)
            coeffs[i] = 1.0
            rhs = self.rhs_at(rhs_value, int(i), st.line)
            self.push_row(st, coeffs, rhs, suffix=self.universe[int(i)])

    def rhs_at(self, rhs_value, index: int, line: int) -> float:
        if isinstance(rhs_value, SetValue):
            return float(rhs_value.mask[index])
        if isinstance(rhs_value, np.ndarray):
            return float(rhs_value[index])
        return float(rhs_value)

    def push_row(self, st: Constraint, coeffs: np.ndarray, rhs: float, suffix: str = ""):
        name = f"{st.name}@{suffix}" if suffix else st.name
        if st.relation == "==":
            self.rows_eq.append(ConstraintRow(name, "eq", coeffs, rhs, st.line))
        elif st.relation == "<=":
            self.rows_le.append(ConstraintRow(name, "le", coeffs, rhs, st.line))
        else:  # '>=' flips to '<=' at emission
            self.rows_le.append(ConstraintRow(name, "le", -coeffs, -rhs, st.line))

    # -- expressions

    def eval_domain(self, expr, line: int) -> np.ndarray:
        value = self.eval(expr)
        if isinstance(value, SetValue):
            return value.mask
        raise MdlError("expected a set expression here", line)

    def as_vector(self, value, line: int) -> np.ndarray:
        if isinstance(value, SetValue):
            return value.to_vector()
        if isinstance(value, np.ndarray):
            return value
        return np.full(self.n, float(value))

    def eval(self, node):
        if isinstance(node, Num):
            return float(node.value)
        if isinstance(node, Name):
            if node.ident in self.bindings:
                return self.bindings[node.ident]
            if node.ident in self.index:
                mask = np.zeros(self.n, dtype=bool)
                mask[self.index[node.ident]] = True
                return SetValue(mask)
            raise UnknownName(f"unknown name {node.ident!r}", node.line)
        if isinstance(node, Literal):
            return self.eval_literal(node)
        if isinstance(node, UnOp):
            return self.eval_unop(node)
        if isinstance(node, BinOp):
            return self.eval_binop(node)
        if isinstance(node, Call):
            return self.eval_call(node)
        raise MdlError(f"cannot evaluate {node!r}")

    def eval_literal(self, node: Literal):
        values = np.zeros(self.n)
        mask = np.zeros(self.n, dtype=bool)
        is_set = True
        for e in node.entries:
            if isinstance(e.value, str):
                raise MdlError("name@name entries only belong in derivative files",
                               node.line)
            if e.name not in self.index:
                raise UnknownName(f"asset {e.name} not in the universe", node.line)
            i = self.index[e.name]
            if e.value is None:
                mask[i] = True
                values[i] = 1.0
            else:
                is_set = False
                mask[i] = True
                values[i] = e.value
        if is_set:
            return SetValue(mask)
        return values

    def eval_unop(self, node: UnOp):
        value = self.eval(node.operand)
        if node.op == "~":
            if not isinstance(value, SetValue):
                raise MdlError("complement applies to sets")
            return SetValue(~value.mask)
        if isinstance(value, SetValue):
            raise MdlError("arithmetic minus does not apply to sets")
        return -value

    def eval_binop(self, node: BinOp):
        op = node.op
        left = self.eval(node.left)
        right = self.eval(node.right)
        if op in ("&", "|", "\\"):
            if not isinstance(left, SetValue) or not isinstance(right, SetValue):
                raise MdlError(f"{op} applies to sets", node.line)
            a, b = left.mask, right.mask
            if op == "&":
                return SetValue(a & b)
            if op == "|":
                return SetValue(a | b)
            return SetValue(a & ~b)
        if op in ("==", "<=", ">=", "<", ">", "~="):
            lv = self.as_vector(left, node.line)
            rv = self.as_vector(right, node.line)
            table = {
                "==": lv == rv, "~=": lv != rv,
                "<=": lv <= rv, ">=": lv >= rv,
                "<": lv < rv, ">": lv > rv,
            }
            return SetValue(table[op])
        lv = left.to_vector() if isinstance(left, SetValue) else left
        rv = right.to_vector() if isinstance(right, SetValue) else right
        scalar = not isinstance(lv, np.ndarray) and not isinstance(rv, np.ndarray)
        if op == "+":
            return lv + rv
        if op == "-":
            return lv - rv
        if op == "*":
            return lv * rv
        if op == "/":
            if np.any(np.asarray(rv) == 0.0):
                raise DivisionByZero("division by zero", node.line)
            return lv / rv
        if op == "^":
            base = np.asarray(lv, dtype=float)
            expo = np.asarray(rv, dtype=float)
            if np.any((base < 0) & (expo != np.round(expo))):
                raise MdlError("negative base needs an integer exponent", node.line)
            out = np.power(base, expo)
            return float(out) if scalar else out
        raise MdlError(f"unsupported operator {op}", node.line)

    def eval_call(self, node: Call):
        fns = {"ln": np.log, "exp": np.exp, "abs": np.abs, "sign": np.sign}
        if node.fn in fns:
            if len(node.args) != 1:
                raise MdlError(f"{node.fn}() takes one argument", node.line)
            value = self.eval(node.args[0])
            vec = value.to_vector() if isinstance(value, SetValue) else value
            out = fns[node.fn](vec)
            return float(out) if np.isscalar(vec) or not isinstance(vec, np.ndarray) else out
        if node.fn in ("max", "min"):
            if len(node.args) != 2:
                raise MdlError(f"{node.fn}() is pairwise: two arguments", node.line)
            a = self.as_any(self.eval(node.args[0]))
            b = self.as_any(self.eval(node.args[1]))
            out = np.maximum(a, b) if node.fn == "max" else np.minimum(a, b)
            return out if isinstance(out, np.ndarray) else float(out)
        if node.fn in ("maxe", "mine", "sum"):
            if len(node.args) != 1:
                raise MdlError(f"{node.fn}() takes one argument", node.line)
            value = self.eval(node.args[0])
            vec = self.as_vector(value, node.line)
            if node.fn == "maxe":
                return float(vec.max())
            if node.fn == "mine":
                return float(vec.min())
            return float(vec.sum())
        raise MdlError(f"unknown function {node.fn}", node.line)

    def as_any(self, value):
        return value.to_vector() if isinstance(value, SetValue) else value


def evaluate(program: MdlProgram, moments: MomentSet) -> Evaluation:
    """Run the program over the moment data: bindings, rows, print log."""
    return _Evaluator(program, moments).run()


def compile_model(program: MdlProgram, moments: MomentSet) -> tuple[QpModel, Evaluation]:
    """MDL program + moments -> parametric QP blocks.

    Q is the covariance rebuilt from the (possibly MDL-modified) std and
    the active-universe correlation; p is the modified expected-return
    vector.  Short-declared assets get er and correlation sign flips
    before assembly.  A normalization row (equality, sum over the whole
    universe) must be present.
    """
    ev = evaluate(program, moments)
    n = len(ev.universe)
    normal_ok = any(
        row.kind == "eq" and np.allclose(row.coeffs, 1.0) for row in ev.rows_eq
    )
    if not normal_ok:
        raise MissingNormalConstraint(
            "no equality constraint sums the whole universe (normal: sum[all] $ == total;)"
        )

    er = np.asarray(ev.bindings["er"], dtype=float).copy()
    std = np.asarray(ev.bindings["std"], dtype=float).copy()
    active = moments.restrict(ev.universe)
    corr = active.correl.copy()

    flip = np.where(ev.short_mask, -1.0, 1.0)
    er = er * flip
    corr = corr * np.outer(flip, flip)
    np.fill_diagonal(corr, 1.0)

    ms_q = MomentSet(ev.universe, er, std, corr)
    q = covariance_from_corr(ms_q)

    te_mat = np.array([r.coeffs for r in ev.rows_eq]).reshape(len(ev.rows_eq), n)
    te = np.array([r.rhs for r in ev.rows_eq])
    tl_mat = np.array([r.coeffs for r in ev.rows_le]).reshape(len(ev.rows_le), n)
    tl = np.array([r.rhs for r in ev.rows_le])
    model = QpModel(q, er, te_mat, te, tl_mat, tl, list(ev.universe))
    return model, ev


# --- derivative declarations ---------------------------------------------------

def parse_deriv(source: str) -> list[OptionSpec]:
    """DERIV block: put/call name@underlying sets plus exdays/O/S/K vectors."""
    program = parse_source(source)
    kinds: dict[str, str] = {}
    under: dict[str, str] = {}
    fields: dict[str, dict[str, float]] = {"exdays": {}, "O": {}, "S": {}, "K": {}}
    for st in program.statements:
        if not isinstance(st, Assign) or not isinstance(st.expr, Literal):
            raise MdlError("derivative files contain only literal assignments",
                           getattr(st, "line", None))
        if st.name in ("put", "call"):
            for e in st.expr.entries:
                if not isinstance(e.value, str):
                    raise MdlError(f"{st.name} entries read OPTION@UNDERLYING", st.line)
                kinds[e.value] = st.name
                under[e.value] = e.name
        elif st.name in fields:
            for e in st.expr.entries:
                if not isinstance(e.value, float):
                    raise MdlError(f"{st.name} entries read value@OPTION", st.line)
                fields[st.name][e.name] = e.value
        else:
            raise MdlError(f"unexpected entry {st.name!r} in a derivative file", st.line)
    specs = []
    for name, kind in kinds.items():
        missing = [f for f in ("exdays", "O", "S", "K") if name not in fields[f]]
        if missing:
            raise MdlError(f"option {name} lacks {', '.join(missing)}")
        specs.append(OptionSpec(
            kind, name, under[name],
            strike=fields["K"][name], premium=fields["O"][name],
            spot=fields["S"][name], exdays=int(fields["exdays"][name]),
        ))
    return specs


__all__ = [
    "MdlError", "LexError", "ParseError", "UnknownName", "UniverseViolation",
    "DivisionByZero", "MissingNormalConstraint",
    "Token", "tokenize", "parse", "parse_source", "render",
    "MdlProgram", "Assign", "Constraint", "Print", "Literal", "Name", "Num",
    "SetValue", "ConstraintRow", "Evaluation", "evaluate", "compile_model",
    "parse_deriv", "validate_correlation",
]
