"""Lark grammars for unit-suffixed quantities and the plain-text geometry file."""
from lark import Lark, Transformer
from lark.exceptions import UnexpectedInput, VisitError


QUANTITY_GRAMMAR = r"""
start: number unit?

number: NUMBER      -> finite
      | INF         -> infinite

unit: UNIT

NUMBER: /[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?/
INF: /[+-]?inf/i
UNIT: /[A-Za-zµμ]+(\/[A-Za-z]+)?/

%ignore /[ \t]+/
"""


GEOMETRY_GRAMMAR = r"""
start: _NL* (item _NL+)*

?item: segment | circuit_decl

segment: NAME NUMBER NUMBER NUMBER NUMBER NUMBER NUMBER
circuit_decl: "!circuit" NAME NUMBER NUMBER NAME

NAME: /[A-Za-z_][A-Za-z0-9_.\-]*/
NUMBER: /[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?/

_NL: /\r?\n/
COMMENT: /#[^\n]*/
%ignore COMMENT
%ignore /[ \t]+/
"""


class QuantityBuilder(Transformer):
    """Turns a quantity parse tree into (value, unit-or-None)."""

    def start(self, items):
        value = items[0]
        unit = items[1] if len(items) > 1 else None
        return value, unit

    def finite(self, items):
        return float(items[0])

    def infinite(self, items):
        return float(str(items[0]))

    def unit(self, items):
        # Both the micro sign and the greek mu are accepted for "micro".
        return str(items[0]).replace("µ", "u").replace("μ", "u")


class GeometryBuilder(Transformer):
    """Turns a geometry-file parse tree into segment rows and circuit declarations."""

    def start(self, items):
        segments = []
        circuits = {}
        for item in items:
            if item[0] == "segment":
                segments.append(item[1:])
            else:
                _, name, width, height, waveform = item
                circuits[name] = (width, height, waveform)
        return segments, circuits

    def segment(self, items):
        name = str(items[0])
        coords = [float(tok) for tok in items[1:]]
        return ("segment", name, tuple(coords[:3]), tuple(coords[3:]))

    def circuit_decl(self, items):
        name, width, height, waveform = items
        return ("circuit", str(name), float(width), float(height), str(waveform))


_quantity_parser = Lark(QUANTITY_GRAMMAR, parser="lalr")
_geometry_parser = Lark(GEOMETRY_GRAMMAR, parser="lalr", propagate_positions=True)


def _line_text(src_text: str, line_no):
    if line_no is None or line_no <= 0:
        return None
    lines = src_text.splitlines()
    if line_no > len(lines):
        return None
    return lines[line_no - 1]


def _caret_line(column):
    if column is None or column <= 0:
        return "^"
    return " " * (column - 1) + "^"


def _pretty_token_name(tok_name: str) -> str:
    token_labels = {
        "NUMBER": "number",
        "NAME": "name",
        "UNIT": "unit",
        "INF": "'inf'",
        "_NL": "end of line",
        "$END": "end of input",
    }
    return token_labels.get(tok_name, tok_name.lower())


def _hint_for_unexpected(e, expected, kind: str):
    tok = getattr(e, "token", None)
    tok_type = getattr(tok, "type", "")
    expected_set = set(expected or [])

    if kind == "geometry":
        if tok_type == "_NL" and "NUMBER" in expected_set:
            return "A segment line needs six coordinates: name x1 y1 z1 x2 y2 z2."
        if tok_type == "NUMBER" and "_NL" in expected_set:
            return "Too many values on a segment line."
        if tok_type == "NUMBER" and "NAME" in expected_set:
            return "Segment lines must start with the circuit name."
    else:
        if "NUMBER" in expected_set or "INF" in expected_set:
            return "A quantity starts with a number, e.g. '10 G' or '115 um'."
        if tok_type == "NUMBER":
            return "Only one number is allowed in a quantity."
    return None


def format_unexpected_input(src_text: str, e, kind: str) -> str:
    line = getattr(e, "line", None)
    column = getattr(e, "column", None)
    token = getattr(e, "token", None)
    token_val = getattr(token, "value", None)
    expected = sorted(getattr(e, "expected", []) or [])

    if token_val is None:
        char = getattr(e, "char", None)
        summary = f"Unexpected character {char!r}" if char is not None else "Unexpected end of input"
    elif token_val == "":
        summary = "Unexpected end of input"
    else:
        summary = f"Unexpected token {token_val!r}"

    pretty = []
    for tok_name in expected:
        label = _pretty_token_name(tok_name)
        if label not in pretty:
            pretty.append(label)
    if pretty:
        summary += f". Expected one of: {', '.join(pretty)}"

    parts = [f"Syntax error at line {line}, column {column}: {summary}"]
    src_line = _line_text(src_text, line)
    if src_line is not None:
        parts.append(src_line)
        parts.append(_caret_line(column))
    hint = _hint_for_unexpected(e, expected, kind)
    if hint:
        parts.append(f"Hint: {hint}")
    return "\n".join(parts)


def parse_quantity_text(text: str):
    """Parse '<number> [unit]' into (float, unit-or-None). Raises SyntaxError."""
    if not isinstance(text, str):
        raise SyntaxError(f"Quantity must be a string, got {type(text).__name__}")
    stripped = text.strip()
    try:
        tree = _quantity_parser.parse(stripped)
    except UnexpectedInput as e:
        raise SyntaxError(format_unexpected_input(stripped, e, "quantity")) from e
    return QuantityBuilder().transform(tree)


def parse_geometry_text(text: str):
    """Parse geometry-file text into (segments, circuit declarations). Raises SyntaxError.

    segments: list of (circuit_name, start_xyz, end_xyz) in file order.
    """
    if not text.endswith("\n"):
        text = text + "\n"
    try:
        tree = _geometry_parser.parse(text)
    except UnexpectedInput as e:
        raise SyntaxError(format_unexpected_input(text, e, "geometry")) from e
    try:
        return GeometryBuilder().transform(tree)
    except VisitError as e:
        raise SyntaxError(f"Geometry file error: {e.orig_exc}") from e.orig_exc
