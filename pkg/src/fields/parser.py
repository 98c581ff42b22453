"""
式パーサー（再帰下降）

文法:
    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := base ("^" uint)?
    base   := number | "pi" | var | fname "(" expr ")" | "(" expr ")" | "-" base
    var    := "x" uint        (1始まり)
    fname  := sin | cos | exp | tanh

エラー位置はソース先頭からのバイトオフセットで報告する。
"""

import re
from dataclasses import dataclass
from typing import List

from ..core.exceptions import ExprSyntaxError, UnknownIdentifierError, VariableIndexError
from .expr import Binary, Const, Expr, PI, Power, UNARY_FUNCTIONS, Unary, Var

NUMBER_RE = re.compile(r'(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?')
IDENT_RE = re.compile(r'[A-Za-z_][A-Za-z_0-9]*')
VAR_RE = re.compile(r'x(\d+)')
SYMBOLS = '+-*/^()'


@dataclass(frozen=True)
class Token:
    kind: str      # 'num' | 'ident' | 'sym' | 'end'
    text: str
    offset: int    # バイトオフセット


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode('utf-8'))


def tokenize(source: str) -> List[Token]:
    """ソース文字列をトークン列に分割する"""
    tokens = []
    i = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == '.' and i + 1 < len(source) and source[i + 1].isdigit()):
            m = NUMBER_RE.match(source, i)
            tokens.append(Token('num', m.group(0), _byte_offset(source, i)))
            i = m.end()
            continue
        if ch.isascii() and (ch.isalpha() or ch == '_'):
            m = IDENT_RE.match(source, i)
            tokens.append(Token('ident', m.group(0), _byte_offset(source, i)))
            i = m.end()
            continue
        if ch in SYMBOLS:
            tokens.append(Token('sym', ch, _byte_offset(source, i)))
            i += 1
            continue
        raise ExprSyntaxError(f"Unexpected character {ch!r}", _byte_offset(source, i))
    tokens.append(Token('end', '', _byte_offset(source, len(source))))
    return tokens


class Parser:
    """d次元の式を解析する再帰下降パーサー"""

    def __init__(self, source: str, dimension: int):
        self.source = source
        self.dimension = dimension
        self.tokens = tokenize(source)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, symbol: str) -> None:
        token = self.current
        if token.kind != 'sym' or token.text != symbol:
            found = token.text or 'end of input'
            raise ExprSyntaxError(f"Expected '{symbol}' but found '{found}'", token.offset)
        self._advance()

    def parse(self) -> Expr:
        node = self._expr()
        if self.current.kind != 'end':
            raise ExprSyntaxError(f"Unexpected token '{self.current.text}'", self.current.offset)
        return node

    def _expr(self) -> Expr:
        node = self._term()
        while self.current.kind == 'sym' and self.current.text in '+-':
            op = 'add' if self._advance().text == '+' else 'sub'
            node = Binary(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while self.current.kind == 'sym' and self.current.text in '*/':
            op = 'mul' if self._advance().text == '*' else 'div'
            node = Binary(op, node, self._factor())
        return node

    def _factor(self) -> Expr:
        node = self._base()
        if self.current.kind == 'sym' and self.current.text == '^':
            self._advance()
            token = self.current
            if token.kind != 'num' or not token.text.isdigit():
                raise ExprSyntaxError("Exponent must be an unsigned integer", token.offset)
            self._advance()
            node = Power(node, int(token.text))
        return node

    def _base(self) -> Expr:
        token = self.current
        if token.kind == 'num':
            self._advance()
            return Const(float(token.text))
        if token.kind == 'sym' and token.text == '(':
            self._advance()
            node = self._expr()
            self._expect(')')
            return node
        if token.kind == 'sym' and token.text == '-':
            self._advance()
            operand = self._base()
            # 無名の数値リテラルは負の定数に畳み込む
            if isinstance(operand, Const) and operand.name is None:
                return Const(-operand.value)
            return Unary('neg', operand)
        if token.kind == 'ident':
            return self._identifier(token)
        found = token.text or 'end of input'
        raise ExprSyntaxError(f"Unexpected token '{found}'", token.offset)

    def _identifier(self, token: Token) -> Expr:
        self._advance()
        name = token.text
        if name == 'pi':
            return PI
        if name in UNARY_FUNCTIONS:
            self._expect('(')
            arg = self._expr()
            self._expect(')')
            return Unary(name, arg)
        m = VAR_RE.fullmatch(name)
        if m:
            index = int(m.group(1))
            if index < 1 or index > self.dimension:
                raise VariableIndexError(
                    f"Variable index out of range: {name} (dimension {self.dimension})", token.offset
                )
            return Var(index - 1)
        raise UnknownIdentifierError(f"Unknown identifier '{name}'", token.offset)


def parse(source: str, dimension: int) -> Expr:
    """
    式を解析してASTを返す

    Args:
        source: 式の文字列
        dimension: 宣言次元 d（変数は x1..xd）

    Returns:
        AST
    """
    return Parser(source, dimension).parse()
