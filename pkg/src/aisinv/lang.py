"""Lexer, parser, AST and pretty-printer for the small while-language.

Grammar (EBNF)::

    program   = pre stmt { stmt } [ post ] ;
    pre       = "{" [ cond { "," cond } ] "}" ;
    post      = "{" cond { "," cond } "}" ;
    stmt      = assign | simassign | while | if ;
    assign    = ident ":=" expr ";" ;
    simassign = "(" ident { "," ident } ")" ":=" "(" expr { "," expr } ")" ";" ;
    while     = [ ident ":" ] "while" cond "do" stmt { stmt } "end" "while" [ ";" ] ;
    if        = "if" cond "then" stmt { stmt } [ "else" stmt { stmt } ] "end" "if" [ ";" ] ;
    cond      = conj { "or" conj } ;
    conj      = unary { "and" unary } ;
    unary     = "not" unary | "odd" "(" expr ")" | "(" cond ")" | expr relop expr ;
    relop     = "=" | "!=" | "<" | ">" | "<=" | ">=" ;     (also "≠", "≤", "≥")
    expr      = term { ( "+" | "-" ) term } ;
    term      = factor { ( "*" | "/" | "div" | "mod" | "%" ) factor } ;
    factor    = [ "-" ] primary ;
    primary   = int | ident | "exp" "(" expr "," expr ")" | "(" expr ")" ;

Params are the identifiers of the precondition, in order of appearance.
``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BinOp:
    op: str  # add, sub, mul, div, mod
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class ExpFn:
    base: "Expr"
    exponent: "Expr"


Expr = Union[VarRef, IntLit, BinOp, ExpFn]


@dataclass(frozen=True)
class Cmp:
    op: str  # eq, ne, lt, gt, le, ge
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Odd:
    arg: Expr


@dataclass(frozen=True)
class And:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class Or:
    left: "Cond"
    right: "Cond"


@dataclass(frozen=True)
class Not:
    arg: "Cond"


Cond = Union[Cmp, Odd, And, Or, Not]


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Assign:
    lhs: str
    rhs: Expr
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class SimAssign:
    lhss: tuple[str, ...]
    rhss: tuple[Expr, ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class While:
    loop_id: str
    cond: Cond
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()


Stmt = Union[Assign, SimAssign, While, If]


@dataclass(frozen=True)
class Program:
    params: tuple[str, ...]
    pre: Cond | None
    body: tuple[Stmt, ...]
    post: Cond | None = None

    def loops(self) -> list[While]:
        """All loops in pre-order."""
        return [s for s in walk(self.body) if isinstance(s, While)]

    def assigned_vars(self) -> list[str]:
        """Non-param variables in order of first assignment."""
        seen: list[str] = []
        for s in walk(self.body):
            names = (s.lhs,) if isinstance(s, Assign) else s.lhss if isinstance(s, SimAssign) else ()
            for n in names:
                if n not in seen:
                    seen.append(n)
        return seen


def walk(stmts) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        if isinstance(s, While):
            yield from walk(s.body)
        elif isinstance(s, If):
            yield from walk(s.then)
            yield from walk(s.orelse)


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, VarRef):
        return {e.name}
    if isinstance(e, IntLit):
        return set()
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return expr_vars(e.base) | expr_vars(e.exponent)


def cond_vars(c: Cond) -> set[str]:
    if isinstance(c, Cmp):
        return expr_vars(c.left) | expr_vars(c.right)
    if isinstance(c, Odd):
        return expr_vars(c.arg)
    if isinstance(c, Not):
        return cond_vars(c.arg)
    return cond_vars(c.left) | cond_vars(c.right)


def _ordered_vars(c: Cond) -> list[str]:
    out: list[str] = []

    def expr(e):
        if isinstance(e, VarRef):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, BinOp):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, ExpFn):
            expr(e.base)
            expr(e.exponent)

    def cond(c):
        if isinstance(c, Cmp):
            expr(c.left)
            expr(c.right)
        elif isinstance(c, Odd):
            expr(c.arg)
        elif isinstance(c, Not):
            cond(c.arg)
        else:
            cond(c.left)
            cond(c.right)

    cond(c)
    return out


# --------------------------------------------------------------------------- lexer

KEYWORDS = {"while", "do", "end", "if", "then", "else", "and", "or", "not", "odd", "exp", "div", "mod"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<badnum>\d+\.\d*|\.\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|!=|<>|<=|>=|==|[≠≤≥:;,(){}+\-*/%<>=])
    """,
    re.VERBOSE,
)

_OP_ALIASES = {"≠": "!=", "<>": "!=", "≤": "<=", "≥": ">=", "==": "="}


@dataclass(frozen=True)
class Token:
    kind: str  # int, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "badnum":
            raise ParseError(f"non-integer literal {text!r}", line, col)
        elif kind == "int":
            tokens.append(Token("int", text, line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind == "op":
            tokens.append(Token("op", _OP_ALIASES.get(text, text), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------- parser

_RELOPS = {"=": "eq", "!=": "ne", "<": "lt", ">": "gt", "<=": "le", ">=": "ge"}
_ADDOPS = {"+": "add", "-": "sub"}
_MULOPS = {"*": "mul", "/": "div", "div": "div", "mod": "mod", "%": "mod"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.labels: set[str] = set()
        self.n_loops = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str, offset: int = 0) -> bool:
        t = self.toks[min(self.i + offset, len(self.toks) - 1)]
        return t.kind in ("op", "kw") and t.text == text

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("expected identifier")
        t = self.tok
        self.i += 1
        return t

    # program -------------------------------------------------------------

    def program(self):
        pre = self.annotation(allow_empty=True)
        if self.tok.kind == "eof" or self.at("{"):
            self.error("program body must contain at least one statement")
        body = self.stmts(stop=lambda: self.tok.kind == "eof" or self.at("{"))
        post = self.annotation(allow_empty=False) if self.at("{") else None
        if self.tok.kind != "eof":
            self.error("expected end of program")
        return pre, body, post

    def annotation(self, allow_empty: bool) -> Cond | None:
        self.expect("{")
        if self.at("}"):
            if not allow_empty:
                self.error("empty postcondition")
            self.i += 1
            return None
        c = self.cond()
        while self.at(","):
            self.i += 1
            c = And(c, self.cond())
        self.expect("}")
        return c

    def stmts(self, stop) -> tuple[Stmt, ...]:
        out = []
        while not stop():
            out.append(self.stmt())
        return tuple(out)

    def stmt(self) -> Stmt:
        t = self.tok
        if self.at("while") or (t.kind == "ident" and self.at(":", 1)):
            return self.while_stmt()
        if self.at("if"):
            return self.if_stmt()
        if self.at("("):
            return self.sim_assign()
        name = self.ident()
        self.expect(":=")
        rhs = self.expr()
        self.expect(";")
        return Assign(name.text, rhs, Span(name.line, name.col))

    def sim_assign(self) -> Stmt:
        start = self.expect("(")
        lhss = [self.ident()]
        while self.at(","):
            self.i += 1
            lhss.append(self.ident())
        self.expect(")")
        self.expect(":=")
        self.expect("(")
        rhss = [self.expr()]
        while self.at(","):
            self.i += 1
            rhss.append(self.expr())
        self.expect(")")
        self.expect(";")
        names = [t.text for t in lhss]
        if len(names) != len(rhss):
            raise ParseError(
                f"simultaneous assignment has {len(names)} targets but {len(rhss)} values",
                start.line, start.col,
            )
        if len(set(names)) != len(names):
            raise ParseError("simultaneous assignment repeats a target", start.line, start.col)
        return SimAssign(tuple(names), tuple(rhss), Span(start.line, start.col))

    def while_stmt(self) -> While:
        label = None
        if self.tok.kind == "ident":
            label = self.ident()
            self.expect(":")
        kw = self.expect("while")
        loop_id = label.text if label else f"L{self.n_loops}"
        where = label or kw
        self.n_loops += 1
        if loop_id in self.labels:
            raise ParseError(f"duplicate loop label {loop_id!r}", where.line, where.col)
        self.labels.add(loop_id)
        cond = self.cond()
        self.expect("do")
        body = self.stmts(stop=lambda: self.at("end"))
        if not body:
            self.error("loop body must contain at least one statement")
        self.expect("end")
        self.expect("while")
        if self.at(";"):
            self.i += 1
        return While(loop_id, cond, body)

    def if_stmt(self) -> If:
        self.expect("if")
        cond = self.cond()
        self.expect("then")
        then = self.stmts(stop=lambda: self.at("else") or self.at("end"))
        if not then:
            self.error("'then' branch must contain at least one statement")
        orelse: tuple[Stmt, ...] = ()
        if self.at("else"):
            self.i += 1
            orelse = self.stmts(stop=lambda: self.at("end"))
            if not orelse:
                self.error("'else' branch must contain at least one statement")
        self.expect("end")
        self.expect("if")
        if self.at(";"):
            self.i += 1
        return If(cond, then, orelse)

    # conditions ------------------------------------------------------------

    def cond(self) -> Cond:
        c = self.conj()
        while self.at("or"):
            self.i += 1
            c = Or(c, self.conj())
        return c

    def conj(self) -> Cond:
        c = self.unary()
        while self.at("and"):
            self.i += 1
            c = And(c, self.unary())
        return c

    def unary(self) -> Cond:
        if self.at("not"):
            self.i += 1
            return Not(self.unary())
        if self.at("odd"):
            self.i += 1
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Odd(arg)
        if self.at("("):
            # either a parenthesised condition or an expression starting with "("
            save = self.i
            try:
                self.i += 1
                c = self.cond()
                self.expect(")")
                if not (self.tok.kind == "op" and (self.tok.text in _RELOPS or self.tok.text in _ADDOPS
                                                   or self.tok.text in _MULOPS)):
                    return c
            except ParseError:
                pass
            self.i = save
        left = self.expr()
        if not (self.tok.kind == "op" and self.tok.text in _RELOPS):
            self.error("expected comparison operator")
        op = _RELOPS[self.tok.text]
        self.i += 1
        right = self.expr()
        if self.tok.kind == "op" and self.tok.text in _RELOPS:
            self.error("comparison chains are not allowed")
        return Cmp(op, left, right)

    # expressions -----------------------------------------------------------

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in _ADDOPS:
            op = _ADDOPS[self.tok.text]
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.text in _MULOPS and self.tok.kind in ("op", "kw"):
            op = _MULOPS[self.tok.text]
            self.i += 1
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.at("-"):
            self.i += 1
            inner = self.primary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.value)
            return BinOp("sub", IntLit(0), inner)
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntLit(int(t.text))
        if t.kind == "ident":
            self.i += 1
            return VarRef(t.text)
        if self.at("exp"):
            self.i += 1
            self.expect("(")
            base = self.expr()
            self.expect(",")
            exponent = self.expr()
            self.expect(")")
            return ExpFn(base, exponent)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected expression")


def _desugar(stmts: tuple[Stmt, ...]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, SimAssign):
            reads = set().union(*(expr_vars(e) for e in s.rhss))
            if reads.isdisjoint(s.lhss):
                # sequential order is then indistinguishable from simultaneous
                out.extend(Assign(n, e, s.span) for n, e in zip(s.lhss, s.rhss))
            else:
                out.append(s)
        elif isinstance(s, While):
            out.append(While(s.loop_id, s.cond, _desugar(s.body)))
        elif isinstance(s, If):
            out.append(If(s.cond, _desugar(s.then), _desugar(s.orelse)))
        else:
            out.append(s)
    return tuple(out)


def _check_scopes(params: tuple[str, ...], body: tuple[Stmt, ...], post: Cond | None, toks: list[Token]):
    first_tok = {t.text: t for t in reversed(toks) if t.kind == "ident"}

    def fail(msg, name, span=None):
        if span is not None:
            raise ParseError(msg, span.line, span.col)
        t = first_tok.get(name)
        raise ParseError(msg, t.line if t else 1, t.col if t else 1)

    def reads(names, defined):
        for n in sorted(names):
            if n not in defined:
                fail(f"variable {n!r} is read before it is assigned", n)

    def block(stmts, defined: set[str]) -> set[str]:
        defined = set(defined)
        for s in stmts:
            if isinstance(s, (Assign, SimAssign)):
                lhss = (s.lhs,) if isinstance(s, Assign) else s.lhss
                rhss = (s.rhs,) if isinstance(s, Assign) else s.rhss
                for e in rhss:
                    reads(expr_vars(e), defined)
                for n in lhss:
                    if n in params:
                        fail(f"assignment to parameter {n!r}", n, s.span)
                defined.update(lhss)
            elif isinstance(s, While):
                reads(cond_vars(s.cond), defined)
                block(s.body, defined)
            else:
                reads(cond_vars(s.cond), defined)
                defined = block(s.then, defined) & block(s.orelse, defined)
        return defined

    defined = block(body, set(params))
    if post is not None:
        reads(cond_vars(post), defined)


def parse(source: str) -> Program:
    toks = tokenize(source)
    p = _Parser(toks)
    pre, body, post = p.program()
    params = tuple(_ordered_vars(pre)) if pre is not None else ()
    _check_scopes(params, body, post, toks)
    return Program(params, pre, _desugar(body), post)


def parse_expr(source: str) -> Expr:
    p = _Parser(tokenize(source))
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return e


def parse_cond(source: str) -> Cond:
    p = _Parser(tokenize(source))
    c = p.cond()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return c


def parse_assignment(source: str) -> Assign:
    """Parse a single ``x := e`` statement (trailing ``;`` optional)."""
    text = source.strip()
    if not text.endswith(";"):
        text += ";"
    p = _Parser(tokenize(text))
    s = p.stmt()
    if not isinstance(s, Assign) or p.tok.kind != "eof":
        raise ParseError("expected a single assignment", 1, 1)
    return s


# --------------------------------------------------------------------------- printer

_OP_TEXT = {"add": "+", "sub": "-", "mul": "*", "div": "/", "mod": "mod"}
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "mod": 2}
_REL_TEXT = {v: k for k, v in _RELOPS.items()}


def format_expr(e: Expr) -> str:
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, ExpFn):
        return f"exp({format_expr(e.base)}, {format_expr(e.exponent)})"
    prec = _PREC[e.op]
    left, right = format_expr(e.left), format_expr(e.right)
    if isinstance(e.left, BinOp) and _PREC[e.left.op] < prec:
        left = f"({left})"
    if isinstance(e.right, BinOp) and _PREC[e.right.op] <= prec:
        right = f"({right})"
    return f"{left} {_OP_TEXT[e.op]} {right}"


_COND_PREC = {Or: 1, And: 2, Not: 3}


def format_cond(c: Cond) -> str:
    if isinstance(c, Cmp):
        return f"{format_expr(c.left)} {_REL_TEXT[c.op]} {format_expr(c.right)}"
    if isinstance(c, Odd):
        return f"odd({format_expr(c.arg)})"
    prec = _COND_PREC[type(c)]

    def wrap(child, strict):
        text = format_cond(child)
        cp = _COND_PREC.get(type(child), 4)
        return f"({text})" if cp < prec or (strict and cp == prec) else text

    if isinstance(c, Not):
        return f"not {wrap(c.arg, False)}"
    word = "or" if isinstance(c, Or) else "and"
    return f"{wrap(c.left, False)} {word} {wrap(c.right, True)}"


def _format_stmts(stmts, indent: int, loop_index: list[int]) -> list[str]:
    pad = "  " * indent
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.lhs} := {format_expr(s.rhs)};")
        elif isinstance(s, SimAssign):
            lines.append(f"{pad}({', '.join(s.lhss)}) := ({', '.join(format_expr(e) for e in s.rhss)});")
        elif isinstance(s, While):
            auto = f"L{loop_index[0]}"
            loop_index[0] += 1
            label = "" if s.loop_id == auto else f"{s.loop_id}: "
            lines.append(f"{pad}{label}while {format_cond(s.cond)} do")
            lines.extend(_format_stmts(s.body, indent + 1, loop_index))
            lines.append(f"{pad}end while;")
        else:
            lines.append(f"{pad}if {format_cond(s.cond)} then")
            lines.extend(_format_stmts(s.then, indent + 1, loop_index))
            if s.orelse:
                lines.append(f"{pad}else")
                lines.extend(_format_stmts(s.orelse, indent + 1, loop_index))
            lines.append(f"{pad}end if;")
    return lines


def format(p: Program) -> str:  # noqa: A001 - mirrors parse()
    lines = ["{" + (format_cond(p.pre) if p.pre is not None else "") + "}"]
    lines.extend(_format_stmts(p.body, 0, [0]))
    if p.post is not None:
        lines.append("{" + format_cond(p.post) + "}")
    return "\n".join(lines) + "\n"
