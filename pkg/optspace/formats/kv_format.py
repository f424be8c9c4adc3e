"""
Flat key=value text files.

One ``key=value`` pair per line, ``#`` starts a comment, repeated keys accumulate into a list.
"""
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

PathLike = Union[str, Path]


def parse_kv(text: str) -> Dict[str, List[str]]:
    """Parse key=value text.

    :param text: file content.
    :return: ordered {key: [values]} in order of first appearance.
    """
    items: Dict[str, List[str]] = OrderedDict()
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"Line {number}: expected key=value, got '{line}'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"Line {number}: empty key")
        items.setdefault(key, []).append(value)
    return items


def read_kv(path: PathLike) -> Dict[str, List[str]]:
    return parse_kv(Path(path).read_text())


def format_kv(pairs: Iterable[Tuple[str, object]]) -> str:
    return "".join(f"{key}={value}\n" for key, value in pairs)


def write_kv(path: PathLike, pairs: Iterable[Tuple[str, object]]) -> None:
    """Write pairs in the given order.

    :param path: file path.
    :param pairs: (key, value) pairs, a key may repeat.
    """
    Path(path).write_text(format_kv(pairs))
