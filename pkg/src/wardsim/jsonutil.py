"""Tolerant extraction of JSON payloads from model output text.

Models wrap JSON in code fences and prose; these helpers find the first
balanced, decodable value of the wanted kind and ignore the rest.
"""

from __future__ import annotations

import json
import re
from typing import Optional

_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*|\s*```\s*$")


def _scan_balanced(text: str, open_ch: str, close_ch: str):
    """Yield decoded candidates for every balanced span starting at open_ch."""
    start = text.find(open_ch)
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for idx in range(start, len(text)):
            ch = text[idx]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch in "{[":
                depth += 1
            elif ch in "}]":
                depth -= 1
                if depth == 0:
                    candidate = text[start : idx + 1]
                    try:
                        yield json.loads(candidate)
                    except ValueError:
                        pass
                    break
        start = text.find(open_ch, start + 1)


def extract_json_object(text: str) -> Optional[dict]:
    """First balanced, decodable JSON object embedded in the text, else None."""
    cleaned = _FENCE_RE.sub("", text)
    for value in _scan_balanced(cleaned, "{", "}"):
        if isinstance(value, dict):
            return value
    return None


def extract_json_array(text: str) -> Optional[list]:
    """First balanced, decodable JSON array embedded in the text, else None."""
    cleaned = _FENCE_RE.sub("", text)
    for value in _scan_balanced(cleaned, "[", "]"):
        if isinstance(value, list):
            return value
    return None
