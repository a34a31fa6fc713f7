"""
Line-oriented text format for plans and defect sets.

Plan:
    n=<n> lambda=<λ> q=<q>
    <indices of query 1, space separated>
    ...                                   (an empty line is an empty query)

Defect set:
    n=<n> d=<d>
    <indices, space separated>

Files end with a single LF; readers accept a missing final newline.
"""

from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .models import DefectSet, QueryPlan

PathLike = Union[str, Path]


def _parse_header(line: str, keys: List[str]) -> Dict[str, int]:
    fields: Dict[str, int] = {}
    for token in line.split():
        key, sep, value = token.partition('=')
        if not sep:
            raise ValueError(f"malformed header token {token!r}")
        fields[key] = int(value)
    if sorted(fields) != sorted(keys):
        raise ValueError(f"header must have exactly the keys {keys}, got {sorted(fields)}")
    return fields


def _parse_indices(line: str) -> np.ndarray:
    return np.array([int(tok) for tok in line.split()], dtype=np.int64)


def format_plan(plan: QueryPlan) -> str:
    lines = [f"n={plan.universe_size} lambda={plan.lambda_} q={plan.num_queries}"]
    lines.extend(" ".join(str(i) for i in plan.row(k).tolist()) for k in range(plan.num_queries))
    return "\n".join(lines) + "\n"


def parse_plan(text: str) -> QueryPlan:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError("empty plan text")
    header = _parse_header(lines[0], ["n", "lambda", "q"])
    body = lines[1:]
    if len(body) != header["q"]:
        raise ValueError(f"header announces q={header['q']} queries, found {len(body)}")
    rows = [_parse_indices(line) for line in body]
    return QueryPlan.from_member_arrays(header["n"], header["lambda"], rows)


def format_defects(defects: DefectSet) -> str:
    members = " ".join(str(i) for i in defects.members)
    return f"n={defects.universe_size} d={defects.size}\n{members}\n"


def parse_defects(text: str) -> DefectSet:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError("empty defect set text")
    header = _parse_header(lines[0], ["n", "d"])
    members = _parse_indices(lines[1]) if len(lines) > 1 else np.zeros(0, dtype=np.int64)
    if len(lines) > 2:
        raise ValueError("defect set text has trailing lines")
    if members.size != header["d"]:
        raise ValueError(f"header announces d={header['d']} items, found {members.size}")
    return DefectSet(universe_size=header["n"], members=tuple(members.tolist()))


def write_plan(plan: QueryPlan, path: PathLike) -> Path:
    target = Path(path)
    with open(target, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_plan(plan))
    return target


def read_plan(path: PathLike) -> QueryPlan:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return parse_plan(f.read())


def write_defects(defects: DefectSet, path: PathLike) -> Path:
    target = Path(path)
    with open(target, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_defects(defects))
    return target


def read_defects(path: PathLike) -> DefectSet:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return parse_defects(f.read())
