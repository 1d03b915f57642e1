"""Runs one candidate call and reports the result.

Reads exactly one framed request from stdin and writes exactly one framed
response to stdout. A frame is ``<decimal byte length>:<UTF-8 JSON>\\n``.

Request:  {"version": 1, "source": str, "entry_point": str, "args": str}
Response: {"version": 1, "status": "ok" | "exception" | "timeout" |
           "memory" | "protocol_error", "value": str | null,
           "stderr_tail": str}

``args`` is a canonical list literal; ``value`` is the canonical literal of
the return value (or its ``repr`` when it is not a literal). Resource
limits are applied by the parent through rlimits; anything the candidate
writes to stdout is diverted to stderr so it cannot corrupt the response.
"""

import ast
import math
import os
import sys
import traceback

WIRE_VERSION = 1
STDERR_TAIL = 2048
MAX_RECORD = 64 << 20


class ProtocolError(Exception):
    pass


class NotLiteral(Exception):
    pass


def encode(record):
    import json

    body = json.dumps(record, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return str(len(body)).encode("ascii") + b":" + body + b"\n"


def decode(data):
    import json

    colon = data.find(b":", 0, 21)
    if colon <= 0 or not data[:colon].isdigit():
        raise ProtocolError("record has no length prefix")
    declared = int(data[:colon])
    if declared > MAX_RECORD:
        raise ProtocolError("record length %d exceeds limit" % declared)
    body = data[colon + 1 : colon + 1 + declared]
    if len(body) < declared:
        raise ProtocolError("record length %d but %d bytes available" % (declared, len(body)))
    if data[colon + 1 + declared :].strip():
        raise ProtocolError("unexpected bytes after record")
    try:
        record = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise ProtocolError("malformed record body: %s" % e)
    if not isinstance(record, dict):
        raise ProtocolError("record body is not an object")
    return record


def render_float(v):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def render_str(s):
    quote = '"' if "'" in s and '"' not in s else "'"
    out = [quote]
    for ch in s:
        code = ord(ch)
        if ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ch == quote:
            out.append("\\" + ch)
        elif code < 0x20 or code == 0x7F or 0x80 <= code < 0xA0:
            out.append("\\x%02x" % code)
        else:
            out.append(ch)
    out.append(quote)
    return "".join(out)


def render(value):
    """Canonical literal text; raises NotLiteral outside the grammar."""
    if value is None:
        return "None"
    if value is True:
        return "True"
    if value is False:
        return "False"
    if isinstance(value, int):
        if not -(2**63) <= value < 2**63:
            raise NotLiteral("integer out of 64-bit range")
        return str(value)
    if isinstance(value, float):
        return render_float(value)
    if isinstance(value, str):
        return render_str(value)
    if isinstance(value, list):
        return "[" + ", ".join(render(v) for v in value) + "]"
    if isinstance(value, tuple):
        inner = ", ".join(render(v) for v in value)
        return "(" + inner + ("," if len(value) == 1 else "") + ")"
    if isinstance(value, dict):
        entries = sorted((render(k), render(v)) for k, v in value.items())
        return "{" + ", ".join(k + ": " + v for k, v in entries) + "}"
    raise NotLiteral(type(value).__name__)


_NAMES = {"None": None, "True": True, "False": False, "inf": math.inf, "nan": math.nan}


def _literal(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str, type(None))):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = _literal(node.operand)
        if isinstance(operand, (int, float)) and not isinstance(operand, bool):
            return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.List):
        return [_literal(e) for e in node.elts]
    if isinstance(node, ast.Tuple):
        return tuple(_literal(e) for e in node.elts)
    if isinstance(node, ast.Dict) and None not in node.keys:
        return {_literal(k): _literal(v) for k, v in zip(node.keys, node.values)}
    raise ProtocolError("not a literal: %s" % type(node).__name__)


def parse_literal(text):
    """Parses canonical literal text, including ``inf`` and ``nan``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ProtocolError("bad args literal: %s" % e.msg)
    try:
        return _literal(tree.body)
    except TypeError as e:  # unhashable dict key
        raise ProtocolError("bad args literal: %s" % e)


def parse_args(text):
    args = parse_literal(text)
    if not isinstance(args, list):
        raise ProtocolError("args must be a list literal")
    return args


def response(status, value=None, stderr_tail=""):
    return {"version": WIRE_VERSION, "status": status, "value": value, "stderr_tail": stderr_tail[-STDERR_TAIL:]}


def describe(exc):
    head = "%s: %s" % (type(exc).__name__, exc)
    tb = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)[-3:])
    return head + "\n" + tb


def run(request):
    if request.get("version") != WIRE_VERSION:
        return response("protocol_error", stderr_tail="wire version %r, expected %d" % (request.get("version"), WIRE_VERSION))
    try:
        source = request["source"]
        entry_point = request["entry_point"]
        args = parse_args(request["args"])
    except KeyError as e:
        return response("protocol_error", stderr_tail="missing field %s" % e)
    except ProtocolError as e:
        return response("protocol_error", stderr_tail=str(e))
    module = {"__name__": "__candidate__", "__builtins__": __builtins__}
    try:
        code = compile(source, "<candidate>", "exec")
        exec(code, module)
        func = module.get(entry_point)
        if func is None:
            raise NameError("name %r is not defined" % entry_point)
        result = func(*args)
        try:
            return response("ok", render(result))
        except NotLiteral:
            return response("ok", repr(result))
    except MemoryError:
        return response("memory", stderr_tail="MemoryError")
    except RecursionError as e:
        return response("exception", stderr_tail=describe(e))
    except BaseException as e:  # candidates may raise SystemExit and friends
        return response("exception", stderr_tail=describe(e))


def serve(stdin, stdout_fd):
    data = stdin.read()
    try:
        request = decode(data)
    except ProtocolError as e:
        reply = response("protocol_error", stderr_tail=str(e))
    else:
        reply = run(request)
    payload = encode(reply)
    view = memoryview(payload)
    while view:
        written = os.write(stdout_fd, view)
        view = view[written:]


def main():
    sys.setrecursionlimit(10000)
    real_stdout = os.dup(1)
    os.dup2(2, 1)
    sys.stdout = sys.stderr
    serve(sys.stdin.buffer, real_stdout)
    os.close(real_stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
