"""Local, deterministic executors behind the bundled tools."""

from __future__ import annotations

import ast
import json
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping

from toolshap.errors import CalculatorParseError, ExecutorNotFound

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}


@lru_cache(maxsize=None)
def _bundled(name: str) -> dict:
    return json.loads(resources.files("toolshap.data").joinpath(name).read_text(encoding="utf-8"))


def _eval_node(node: ast.AST) -> Fraction:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left, right = _eval_node(node.left), _eval_node(node.right)
        if isinstance(node.op, ast.Div) and right == 0:
            raise ZeroDivisionError
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        value = _eval_node(node.operand)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        # go through the source text so 0.1 stays exactly 1/10
        try:
            return Fraction(Decimal(ast.unparse(node)))
        except InvalidOperation:
            raise CalculatorParseError(f"bad number: {ast.unparse(node)}") from None
    raise CalculatorParseError(f"unsupported syntax: {type(node).__name__}")


def evaluate_expression(expression: str) -> Fraction:
    """Evaluate ``+ - * /`` and parentheses over decimal literals exactly."""
    text = expression.replace("×", "*").replace("÷", "/").replace("−", "-")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise CalculatorParseError(f"could not parse expression {expression!r}") from None
    return _eval_node(tree)


def format_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return format(float(value), ".10g")


def calculator(args: Mapping) -> str:
    expression = str(args.get("expression", ""))
    try:
        return format_number(evaluate_expression(expression))
    except ZeroDivisionError:
        return "Error: division by zero"
    except CalculatorParseError as exc:
        return f"Error: {exc}"


def query_stock(args: Mapping) -> str:
    symbol = str(args.get("symbol", "")).strip().upper()
    prices = _bundled("prices.json")
    if symbol not in prices:
        return f"Unknown symbol: {symbol or '(none)'}"
    return f"{symbol}: {prices[symbol]:.2f}"


def wiki(args: Mapping) -> str:
    query = str(args.get("query", "")).strip()
    articles = _bundled("articles.json")
    article = articles.get(query.lower())
    if article is None:
        return f"No article found for {query!r}."
    return article


def add_alarm(args: Mapping) -> str:
    return f"Alarm set for {args.get('time', 'unspecified time')}."


def add_reminder(args: Mapping) -> str:
    return f"Reminder {args.get('content', '')!r} set for {args.get('time', 'unspecified time')}."


def play_music(args: Mapping) -> str:
    return f"Now playing {args.get('title', 'a random track')}."


def book_hotel(args: Mapping) -> str:
    return (
        f"Booked {args.get('hotel_name', 'a hotel')} from {args.get('check_in', '?')} "
        f"to {args.get('check_out', '?')} for {args.get('guests', 1)} guest(s)."
    )


def translate(args: Mapping) -> str:
    target = str(args.get("tgt_lang", "en"))
    return f"[{target}] {args.get('text', '')}"


EXECUTORS: dict[str, Callable[[Mapping], str]] = {
    "calculator": calculator,
    "query_stock": query_stock,
    "wiki": wiki,
    "add_alarm": add_alarm,
    "add_reminder": add_reminder,
    "play_music": play_music,
    "book_hotel": book_hotel,
    "translate": translate,
}


def execute_tool(executor_id: str, args: Mapping) -> str:
    try:
        fn = EXECUTORS[executor_id]
    except KeyError:
        raise ExecutorNotFound(f"no executor named {executor_id!r}") from None
    return fn(args)
