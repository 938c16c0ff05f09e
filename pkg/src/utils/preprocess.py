import re
from typing import Iterator, Tuple

import numpy as np


def clean_line(line: str) -> str:
    """Strip comments and normalize whitespace."""
    line = line.split("#", 1)[0]
    line = re.sub(r"\s+", " ", line).strip()
    return line


def content_lines(text: str) -> Iterator[Tuple[int, str]]:
    """Yield (line number, cleaned line) for every non-empty line."""
    text = text.replace("\r\n", "\n")
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = clean_line(raw)
        if line:
            yield lineno, line


def to_builtin(value):
    """Convert numpy scalars/arrays into JSON-serializable Python values."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
