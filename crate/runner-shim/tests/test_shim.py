import json
import math
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from runner_shim import decode, encode, parse_literal, render

SHIM = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "runner_shim.py")


def call(source, entry_point, args, timeout=30):
    request = encode({"version": 1, "source": source, "entry_point": entry_point, "args": args})
    proc = subprocess.run([sys.executable, "-I", SHIM], input=request, capture_output=True, timeout=timeout)
    return decode(proc.stdout), proc


def identity(value_text):
    reply, _ = call("def f(x):\n    return x\n", "f", "[" + value_text + "]")
    assert reply["status"] == "ok", reply
    return reply["value"]


literals = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**63), max_value=2**63 - 1)
    | st.floats(allow_nan=False)
    | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4)
    | st.lists(inner, max_size=4).map(tuple)
    | st.dictionaries(st.integers(-5, 5) | st.text(max_size=3), inner, max_size=3),
    max_leaves=12,
)


@settings(max_examples=200, deadline=None)
@given(literals)
def test_render_parse_round_trip(value):
    text = render(value)
    assert render(parse_literal(text)) == text


@pytest.mark.parametrize(
    "text",
    [
        "None",
        "True",
        "False",
        "0",
        "-9223372036854775808",
        "9223372036854775807",
        "2.5",
        "-0.0",
        "1e+16",
        "1e-05",
        "inf",
        "-inf",
        "nan",
        "''",
        "'it\\'s \"q\"'",
        "\"it's\"",
        "'tab\\tnl\\nbs\\\\'",
        "'\\x00\\x7f\\x9f'",
        "'π✓'",
        "[]",
        "()",
        "(1,)",
        "(1, 'a', None)",
        "[[1, 2], [3, [4, (5,)]]]",
        "{}",
        "{1: 'a', 2: [True, False]}",
        "{'a': {'b': (1.5, -2)}}",
    ],
)
def test_live_identity(text):
    assert identity(text) == text


@pytest.mark.parametrize(
    "source, expected_type",
    [
        ("def f():\n    return 1 // 0\n", "ZeroDivisionError"),
        ("def f():\n    return [][3]\n", "IndexError"),
        ("def f():\n    return {}['k']\n", "KeyError"),
        ("def f():\n    return 1 + 'a'\n", "TypeError"),
        ("def f():\n    return helper(1)\n", "NameError"),
        ("def f(n=0):\n    return f(n + 1)\n", "RecursionError"),
        ("def f(:\n    pass\n", "SyntaxError"),
        ("def f():\n    return None.upper()\n", "AttributeError"),
        ("def f():\n    return int('x')\n", "ValueError"),
        ("def f():\n    assert False, 'nope'\n", "AssertionError"),
        ("import sys\ndef f():\n    sys.exit(3)\n", "SystemExit"),
        ("raise RuntimeError('at import')\ndef f():\n    return 1\n", "RuntimeError"),
    ],
)
def test_crashes_become_exceptions(source, expected_type):
    reply, proc = call(source, "f", "[]")
    assert proc.returncode == 0
    assert reply["status"] == "exception"
    assert reply["stderr_tail"].startswith(expected_type + ":"), reply["stderr_tail"]


def test_missing_entry_point_is_name_error():
    reply, _ = call("def g():\n    return 1\n", "f", "[]")
    assert reply["stderr_tail"].startswith("NameError")


def test_stdout_flood_keeps_one_response():
    source = "import os\ndef f():\n    print('x' * 100000)\n    os.write(1, b'12:garbage')\n    return 7\n"
    reply, proc = call(source, "f", "[]")
    assert reply == {"version": 1, "status": "ok", "value": "7", "stderr_tail": ""}
    assert proc.stdout.count(b"\n") == 1
    assert len(proc.stderr) > 100000


def test_non_literal_results_fall_back_to_repr():
    reply, _ = call("def f():\n    return {1, 2}\n", "f", "[]")
    assert reply["value"] == "{1, 2}"


@pytest.mark.parametrize(
    "raw, fragment",
    [
        (b"garbage", "length prefix"),
        (b"5:{}", "5 but"),
        (b"2:[]\n", "not an object"),
        (encode({"version": 2, "source": "", "entry_point": "f", "args": "[]"}), "wire version"),
        (encode({"version": 1, "source": "", "entry_point": "f", "args": "5"}), "list literal"),
        (encode({"version": 1, "source": "", "entry_point": "f", "args": "[x]"}), "not a literal"),
    ],
)
def test_protocol_errors(raw, fragment):
    proc = subprocess.run([sys.executable, "-I", SHIM], input=raw, capture_output=True, timeout=30)
    reply = decode(proc.stdout)
    assert reply["status"] == "protocol_error"
    assert fragment in reply["stderr_tail"]


def test_memory_limit_reports_memory():
    import resource

    def limit():
        resource.setrlimit(resource.RLIMIT_AS, (512 << 20, 512 << 20))

    source = "def f():\n    x = []\n    while True:\n        x.append(bytearray(1 << 20))\n"
    request = encode({"version": 1, "source": source, "entry_point": "f", "args": "[]"})
    proc = subprocess.run([sys.executable, "-I", SHIM], input=request, capture_output=True, timeout=60, preexec_fn=limit)
    assert decode(proc.stdout)["status"] == "memory"


def test_frames_match_wire_format():
    frame = encode({"a": "é"})
    length, body = frame.split(b":", 1)
    assert int(length) == len(body) - 1 and body.endswith(b"\n")
    assert json.loads(body) == {"a": "é"}
    assert math.isnan(parse_literal("nan"))
