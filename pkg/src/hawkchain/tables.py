"""Plain-text outputs: tab-delimited tables with a one-line header, and
``key = value`` documents (INI semantics, readable by :mod:`configparser`)."""
from __future__ import annotations

import configparser
from pathlib import Path
from typing import Iterable, Mapping, Sequence


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return _fmt(v.item())
    return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    return header, rows


def write_keyvalue(path, sections: Mapping[str, Mapping[str, object]]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_keyvalue(sections))
    return path


def dumps_keyvalue(sections: Mapping[str, Mapping[str, object]]) -> str:
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in items.items())
        out.append("")
    return "\n".join(out)


def read_keyvalue(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read(path, encoding="utf-8")
    return {s: dict(parser[s]) for s in parser.sections()}
