"""Deterministic report serialization.

JSON reports are a single object {schema_version, command, params, data}
rendered by a small recursive emitter so that float formatting is pinned
to 17 significant digits (round-trip exact for binary64) and repeated
runs produce identical bytes.  CSV reports carry '#'-prefixed comment
lines naming the generating command and the columns, then a header row
and data rows.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = "pq-spectra/1"


def format_float(value: float) -> str:
    """17-significant-digit decimal form; integral values keep a '.0'."""
    if math.isnan(value) or math.isinf(value):
        raise ValueError("reports must not contain NaN or infinity")
    text = format(float(value), ".17g")
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def _escape(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _emit(value, pieces: list):
    if value is None:
        pieces.append("null")
    elif isinstance(value, bool) or isinstance(value, np.bool_):
        pieces.append("true" if value else "false")
    elif isinstance(value, str):
        pieces.append(_escape(value))
    elif isinstance(value, Fraction):
        pieces.append(_escape(str(value)))
    elif isinstance(value, (int, np.integer)):
        pieces.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        pieces.append(format_float(float(value)))
    elif isinstance(value, dict):
        pieces.append("{")
        for i, (key, item) in enumerate(value.items()):
            if i:
                pieces.append(", ")
            pieces.append(_escape(str(key)))
            pieces.append(": ")
            _emit(item, pieces)
        pieces.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        pieces.append("[")
        for i, item in enumerate(value):
            if i:
                pieces.append(", ")
            _emit(item, pieces)
        pieces.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def render_json(report: dict) -> str:
    pieces: list = []
    _emit(report, pieces)
    pieces.append("\n")
    return "".join(pieces)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(columns: list, rows: list, command_line: str) -> str:
    """Comment header naming the command and columns, then header + rows."""
    lines = [f"# command: {command_line}",
             f"# columns: {','.join(columns)}",
             ",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def make_report(command: str, params: dict, data: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": params,
        "data": data,
    }
