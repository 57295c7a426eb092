"""Concrete syntax: lexer, recursive-descent parser and pretty-printer.

Grammar, loosest binding first::

    expr  ::= 'if' expr 'then' expr 'else' expr
            | 'for' '(' gen {',' gen} ')' ['where' expr 'yield' expr | 'yield' expr | expr]
            | wexpr
    gen   ::= IDENT '<-' expr
    wexpr ::= wexpr 'where' or | or
    or    ::= or '||' and | and          and ::= and '&&' not | not
    not   ::= '!' not | cmp              cmp ::= union [cmpop union]
    union ::= union '++' add | add       add ::= add ('+'|'-') mul | mul
    mul   ::= mul ('*'|'/') app | app    app ::= 'some' app | post
    post  ::= post '.' LABEL | atom
    atom  ::= literal | IDENT | 'null' | 'none' | '[' ']' | '[' expr ']'
            | '{' [LABEL '=' expr {',' LABEL '=' expr}] '}' | '(' expr ')'
            | 'table' IDENT | 'empty' '(' expr ')' | 'isnull' '(' expr ')'
            | 'case' expr 'of' '{' 'none' '->' expr '|' 'some' IDENT '->' expr '}'

``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .ast import (
    Base,
    BaseTy,
    Case,
    Comp,
    Const,
    EmptySet,
    If,
    IsEmpty,
    IsNull,
    Mode,
    NoneLit,
    NullLit,
    Option,
    Prim,
    Project,
    Record,
    RecordCons,
    SetTy,
    Singleton,
    SomeLit,
    TableRef,
    Term,
    Ty,
    Union,
    Value,
    Var,
    VConst,
    VNone,
    VNull,
    VRecord,
    VSet,
    VSome,
    Where,
)

KEYWORDS = frozenset(
    "if then else for where yield case of none some null table true false empty isnull".split()
)


@dataclass(frozen=True)
class SourceSpan:
    start: tuple[int, int]
    end: tuple[int, int]
    file: str | None = None

    def __str__(self):
        where = f"{self.file}:" if self.file else ""
        return f"{where}{self.start[0]}:{self.start[1]}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected: str = ""):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message
        self.expected = expected


@dataclass(frozen=True)
class Token:
    kind: str  # INT FLOAT STRING IDENT KW SYM EOF
    text: str
    span: SourceSpan


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<FLOAT>\d+(?:\.\d+(?:[eE][+-]?\d+)?|[eE][+-]?\d+))
  | (?P<INT>\d+)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<SYM><-|->|\+\+|&&|\|\||<>|<=|>=|[=<>+\-*/!()\[\]{},.|:?])
    """,
    re.VERBOSE,
)


def _position(src: str, offset: int) -> tuple[int, int]:
    line = src.count("\n", 0, offset) + 1
    col = offset - (src.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize(src: str, file: str | None = None) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            span = SourceSpan(_position(src, pos), _position(src, pos + 1), file)
            raise ParseError(span, f"unexpected character {src[pos]!r}", "a token")
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if kind == "IDENT" and text in KEYWORDS:
                kind = "KW"
            span = SourceSpan(_position(src, pos), _position(src, m.end()), file)
            tokens.append(Token(kind, text, span))
        pos = m.end()
    end = _position(src, len(src))
    tokens.append(Token("EOF", "", SourceSpan(end, end, file)))
    return tokens


_CMP_OPS = ("=", "<>", "<", "<=", ">", ">=")


class Parser:
    def __init__(self, src: str, file: str | None = None):
        self.tokens = tokenize(src, file)
        self.i = 0

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("KW", "SYM") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, expected: str) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        return ParseError(t.span, f"expected {expected}, found {found}", expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        return self.advance()

    def ident(self) -> str:
        if self.tok.kind != "IDENT":
            raise self.error("an identifier")
        return self.advance().text

    def label(self) -> str:
        if self.tok.kind not in ("IDENT", "KW"):
            raise self.error("a field label")
        return self.advance().text

    def finish(self) -> None:
        if self.tok.kind != "EOF":
            raise self.error("end of input")

    # -- terms -----------------------------------------------------------

    def expr(self) -> Term:
        if self.at("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            return If(c, a, self.expr())
        if self.at("for"):
            return self.for_expr()
        left = self.or_expr()
        while self.at("where"):
            self.advance()
            left = Where(left, self.or_expr())
        return left

    def for_expr(self) -> Term:
        self.expect("for")
        self.expect("(")
        gens = [self.generator()]
        while self.at(","):
            self.advance()
            gens.append(self.generator())
        self.expect(")")
        if self.at("where"):
            self.advance()
            cond = self.expr()
            self.expect("yield")
            body: Term = Where(Singleton(self.expr()), cond)
        elif self.at("yield"):
            self.advance()
            body = Singleton(self.expr())
        else:
            body = self.expr()
        for var, source in reversed(gens):
            body = Comp(body, var, source)
        return body

    def generator(self) -> tuple[str, Term]:
        var = self.ident()
        self.expect("<-")
        return var, self.expr()

    def or_expr(self) -> Term:
        left = self.and_expr()
        while self.at("||"):
            self.advance()
            left = Prim("||", (left, self.and_expr()))
        return left

    def and_expr(self) -> Term:
        left = self.not_expr()
        while self.at("&&"):
            self.advance()
            left = Prim("&&", (left, self.not_expr()))
        return left

    def not_expr(self) -> Term:
        if self.at("!"):
            self.advance()
            return Prim("!", (self.not_expr(),))
        return self.cmp_expr()

    def cmp_expr(self) -> Term:
        left = self.union_expr()
        if self.at(*_CMP_OPS):
            op = self.advance().text
            left = Prim(op, (left, self.union_expr()))
            if self.at(*_CMP_OPS):
                raise ParseError(self.tok.span, "comparison operators do not associate; add parentheses", "an operand")
        return left

    def union_expr(self) -> Term:
        left = self.add_expr()
        while self.at("++"):
            self.advance()
            left = Union(left, self.add_expr())
        return left

    def add_expr(self) -> Term:
        left = self.mul_expr()
        while self.at("+", "-"):
            op = self.advance().text
            left = Prim(op, (left, self.mul_expr()))
        return left

    def mul_expr(self) -> Term:
        left = self.app_expr()
        while self.at("*", "/"):
            op = self.advance().text
            left = Prim(op, (left, self.app_expr()))
        return left

    def app_expr(self) -> Term:
        if self.at("some"):
            self.advance()
            return SomeLit(self.app_expr())
        return self.postfix_expr()

    def postfix_expr(self) -> Term:
        m = self.atom()
        while self.at("."):
            self.advance()
            m = Project(m, self.label())
        return m

    def atom(self) -> Term:
        t = self.tok
        if t.kind in ("INT", "FLOAT"):
            self.advance()
            return _number(t.text)
        if t.kind == "STRING":
            self.advance()
            return Const(json.loads(t.text), BaseTy.STRING)
        if t.kind == "IDENT":
            self.advance()
            return Var(t.text)
        if self.at("-") and self.peek().kind in ("INT", "FLOAT"):
            self.advance()
            c = _number(self.advance().text)
            return Const(-c.value, c.ty)
        if self.at("true", "false"):
            self.advance()
            return Const(t.text == "true", BaseTy.BOOL)
        if self.at("null"):
            self.advance()
            return NullLit()
        if self.at("none"):
            self.advance()
            return NoneLit()
        if self.at("("):
            self.advance()
            m = self.expr()
            self.expect(")")
            return m
        if self.at("["):
            self.advance()
            if self.at("]"):
                self.advance()
                return EmptySet()
            m = self.expr()
            self.expect("]")
            return Singleton(m)
        if self.at("{"):
            return self.record()
        if self.at("table"):
            self.advance()
            return TableRef(self.ident())
        if self.at("empty", "isnull"):
            kw = self.advance().text
            self.expect("(")
            m = self.expr()
            self.expect(")")
            return IsEmpty(m) if kw == "empty" else IsNull(m)
        if self.at("case"):
            return self.case_expr()
        raise self.error("an expression")

    def record(self) -> Term:
        self.expect("{")
        fields = []
        if not self.at("}"):
            while True:
                label_tok = self.tok
                label = self.label()
                if label in (l for l, _ in fields):
                    raise ParseError(label_tok.span, f"duplicate field {label}", "a new label")
                self.expect("=")
                fields.append((label, self.expr()))
                if not self.at(","):
                    break
                self.advance()
        self.expect("}")
        return RecordCons(tuple(fields))

    def case_expr(self) -> Term:
        self.expect("case")
        scrut = self.expr()
        self.expect("of")
        self.expect("{")
        self.expect("none")
        self.expect("->")
        none_branch = self.expr()
        self.expect("|")
        self.expect("some")
        var = self.ident()
        self.expect("->")
        some_branch = self.expr()
        self.expect("}")
        return Case(scrut, none_branch, var, some_branch)

    # -- types -----------------------------------------------------------

    def type_(self) -> Ty:
        t = self.type_atom()
        while self.at("?"):
            self.advance()
            t = Option(t)
        return t

    def type_atom(self) -> Ty:
        if self.tok.kind == "IDENT" and self.tok.text in {b.value for b in BaseTy}:
            return Base(BaseTy(self.advance().text))
        if self.at("["):
            self.advance()
            t = self.type_()
            self.expect("]")
            return SetTy(t)
        if self.at("("):
            self.advance()
            t = self.type_()
            self.expect(")")
            return t
        if self.at("{"):
            self.advance()
            fields = []
            if not self.at("}"):
                while True:
                    label = self.label()
                    self.expect(":")
                    fields.append((label, self.type_()))
                    if not self.at(","):
                        break
                    self.advance()
            self.expect("}")
            try:
                return Record(tuple(fields))
            except ValueError as e:
                raise ParseError(self.tok.span, str(e), "distinct labels") from None
        raise self.error("a type")

    # -- literals (handler defaults) -------------------------------------

    def literal(self) -> Const:
        m = self.atom()
        if not isinstance(m, Const):
            raise self.error("a literal")
        return m


def _number(text: str) -> Const:
    if re.fullmatch(r"\d+", text):
        return Const(int(text), BaseTy.INT)
    return Const(float(text), BaseTy.FLOAT)


def parse_term(src: str, file: str | None = None) -> Term:
    p = Parser(src, file)
    m = p.expr()
    p.finish()
    return m


def parse_type(src: str) -> Ty:
    p = Parser(src)
    t = p.type_()
    p.finish()
    return t


_MODE_NAMES = {
    "nrc": Mode.NRC,
    "opt": Mode.NRC_OPT,
    "nrc_opt": Mode.NRC_OPT,
    "null": Mode.NRC_NULL,
    "nrc_null": Mode.NRC_NULL,
}


def parse_mode(text: str) -> Mode:
    try:
        return _MODE_NAMES[text.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown mode {text!r}; expected one of nrc, opt, null") from None


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

# Precedence levels; a subterm printed in a slot demanding a higher level
# than its own gets parentheses.
P_OPEN, P_WHERE, P_OR, P_AND, P_NOT, P_CMP, P_UNION, P_ADD, P_MUL, P_APP, P_POST, P_ATOM = range(12)

_BINARY_LEVEL = {"||": P_OR, "&&": P_AND, "+": P_ADD, "-": P_ADD, "*": P_MUL, "/": P_MUL}
for _op in _CMP_OPS:
    _BINARY_LEVEL[_op] = P_CMP


def format_literal(value, ty: BaseTy) -> str:
    if ty is BaseTy.BOOL:
        return "true" if value else "false"
    if ty is BaseTy.INT:
        return str(value)
    if ty is BaseTy.STRING:
        return json.dumps(value)
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"float {text} has no literal syntax")
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def _level(m: Term) -> int:
    match m:
        case If() | Comp():
            return P_OPEN
        case Where():
            return P_WHERE
        case Prim("!", _):
            return P_NOT
        case Prim(op, _):
            return _BINARY_LEVEL[op]
        case Union():
            return P_UNION
        case SomeLit():
            return P_APP
        case Project():
            return P_POST
    return P_ATOM


def pretty(m: Term) -> str:
    return _pp(m, P_OPEN)


def _pp(m: Term, need: int) -> str:
    text = _pp_node(m)
    return f"({text})" if _level(m) < need else text


def _pp_node(m: Term) -> str:
    match m:
        case Var(x):
            return x
        case Const(value, ty):
            return format_literal(value, ty)
        case Prim("!", (a,)):
            return "!" + _pp(a, P_NOT)
        case Prim(op, (a, b)):
            lvl = _BINARY_LEVEL[op]
            if lvl == P_CMP:
                return f"{_pp(a, P_UNION)} {op} {_pp(b, P_UNION)}"
            return f"{_pp(a, lvl)} {op} {_pp(b, lvl + 1)}"
        case Prim(op, args):
            raise ValueError(f"primitive {op} with {len(args)} arguments has no syntax")
        case RecordCons(fields):
            return "{" + ", ".join(f"{l} = {_pp(t, P_OPEN)}" for l, t in fields) + "}"
        case Project(t, label):
            return f"{_pp(t, P_POST)}.{label}"
        case EmptySet():
            return "[]"
        case Singleton(t):
            return f"[{_pp(t, P_OPEN)}]"
        case Union(a, b):
            return f"{_pp(a, P_UNION)} ++ {_pp(b, P_ADD)}"
        case Comp():
            return _pp_comp(m)
        case Where(body, cond):
            return f"{_pp(body, P_WHERE)} where {_pp(cond, P_OR)}"
        case IsEmpty(t):
            return f"empty({_pp(t, P_OPEN)})"
        case If(c, a, b):
            return f"if {_pp(c, P_OPEN)} then {_pp(a, P_OPEN)} else {_pp(b, P_OPEN)}"
        case NoneLit():
            return "none"
        case SomeLit(t):
            return "some " + _pp(t, P_APP)
        case Case(s, n, x, sm):
            return f"case {_pp(s, P_OPEN)} of {{ none -> {_pp(n, P_OPEN)} | some {x} -> {_pp(sm, P_OPEN)} }}"
        case NullLit():
            return "null"
        case IsNull(t):
            return f"isnull({_pp(t, P_OPEN)})"
        case TableRef(name):
            return f"table {name}"
    raise ValueError(f"cannot print {m!r}")


def _pp_comp(m: Comp) -> str:
    gens = []
    body: Term = m
    while isinstance(body, Comp):
        gens.append(f"{body.var} <- {_pp(body.source, P_OPEN)}")
        body = body.head
    head = f"for ({', '.join(gens)})"
    match body:
        case Singleton(t):
            return f"{head} yield {_pp(t, P_OPEN)}"
        case Where(Singleton(t), cond):
            return f"{head} where {_pp(cond, P_OPEN)} yield {_pp(t, P_OPEN)}"
    return f"{head} {_pp(body, P_OPEN)}"


def format_value(v: Value) -> str:
    match v:
        case VConst(value, ty):
            return format_literal(value, ty)
        case _ if v is VNull:
            return "null"
        case _ if v is VNone:
            return "none"
        case VSome(inner):
            return "some " + format_value(inner)
        case VRecord(fields):
            return "{" + ", ".join(f"{l} = {format_value(x)}" for l, x in fields) + "}"
        case VSet(elements):
            return "[" + ", ".join(format_value(x) for x in elements) + "]"
    raise ValueError(f"cannot print {v!r}")


def format_type(t: Ty) -> str:
    match t:
        case Option(inner):
            inner_text = format_type(inner)
            return f"{inner_text}?"
    return str(t)
