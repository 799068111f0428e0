"""JSON parsing and emission for instances, allocations, and densities.

Rationals travel as "p/q" strings (integers allowed) so round trips are
exact; serialization always reduces to lowest terms, making
serialize(parse(text)) idempotent.  Parse failures carry the JSON-path of
the offending field.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .cake import PiecewiseLinearDensity
from .core import Instance, IntegralAllocation
from .errors import InstanceError, ParseError


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {what}: {exc.msg}", f"line {exc.lineno}") from exc


def _parse_rational(raw: Any, location: str) -> Fraction:
    if isinstance(raw, bool):
        raise ParseError("expected a rational, got a boolean", location)
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, str):
        try:
            return Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"not a rational: {raw!r}", location) from exc
    raise ParseError(
        f"expected an integer or 'p/q' string, got {type(raw).__name__}", location
    )


def _require(obj: Any, key: str, location: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(f"expected an object, got {type(obj).__name__}", location)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", location)
    return obj[key]


def _require_int(raw: Any, location: str, minimum: int) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ParseError(f"expected an integer, got {type(raw).__name__}", location)
    if raw < minimum:
        raise ParseError(f"must be >= {minimum}, got {raw}", location)
    return raw


def parse_instance(text: str) -> Instance:
    """Parse the instance document: kind, groups (sizes), types (copies+values).

    Groups are re-sorted ascending by size with value columns permuted to
    match; rationals are parsed exactly.
    """
    doc = _load_json(text, "instance")
    kind = _require(doc, "kind", "$")
    if kind not in ("goods", "chores"):
        raise ParseError(f"kind must be 'goods' or 'chores', got {kind!r}", "$.kind")
    groups = _require(doc, "groups", "$")
    if not isinstance(groups, list) or not groups:
        raise ParseError("groups must be a non-empty array", "$.groups")
    sizes = [
        _require_int(_require(g, "size", f"$.groups[{i}]"), f"$.groups[{i}].size", 1)
        for i, g in enumerate(groups)
    ]
    types = _require(doc, "types", "$")
    if not isinstance(types, list) or not types:
        raise ParseError("types must be a non-empty array", "$.types")
    copies: list[int] = []
    columns: list[list[Fraction]] = []
    for z, entry in enumerate(types):
        loc = f"$.types[{z}]"
        copies.append(_require_int(_require(entry, "copies", loc), f"{loc}.copies", 1))
        values = _require(entry, "values", loc)
        if not isinstance(values, list) or len(values) != len(sizes):
            raise ParseError(
                f"values must list one rational per group ({len(sizes)})",
                f"{loc}.values",
            )
        col = []
        for i, raw in enumerate(values):
            v = _parse_rational(raw, f"{loc}.values[{i}]")
            if v < 0:
                raise ParseError("values must be nonnegative", f"{loc}.values[{i}]")
            if kind == "chores" and v == 0:
                raise ParseError("chores costs must be positive", f"{loc}.values[{i}]")
            col.append(v)
        columns.append(col)

    rows = [[columns[z][i] for z in range(len(types))] for i in range(len(sizes))]
    try:
        return Instance(group_sizes=sizes, type_copies=copies, values=rows, kind=kind)
    except InstanceError as exc:
        raise ParseError(str(exc), "$") from exc


def serialize_instance(instance: Instance) -> str:
    """Emit the instance document with rationals in lowest terms."""
    doc = {
        "kind": instance.kind,
        "groups": [{"size": s} for s in instance.group_sizes],
        "types": [
            {
                "copies": instance.type_copies[z],
                "values": [
                    _format_rational(instance.values[i][z])
                    for i in range(instance.d)
                ],
            }
            for z in range(instance.t)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def parse_allocation(text: str, instance: Instance) -> IntegralAllocation:
    """Parse {"counts": [[...], ...]} of per-agent copy counts."""
    doc = _load_json(text, "allocation")
    counts = _require(doc, "counts", "$")
    if not isinstance(counts, list) or len(counts) != instance.d:
        raise ParseError(f"counts must list {instance.d} group rows", "$.counts")
    rows = []
    for i, row in enumerate(counts):
        if not isinstance(row, list) or len(row) != instance.t:
            raise ParseError(
                f"row must list {instance.t} type counts", f"$.counts[{i}]"
            )
        rows.append(
            [_require_int(c, f"$.counts[{i}][{z}]", 0) for z, c in enumerate(row)]
        )
    try:
        return IntegralAllocation(rows)
    except InstanceError as exc:
        raise ParseError(str(exc), "$.counts") from exc


def serialize_allocation(allocation: IntegralAllocation) -> str:
    return json.dumps({"counts": [list(r) for r in allocation.counts]}, indent=2) + "\n"


def parse_density_spec(text: str) -> list[PiecewiseLinearDensity]:
    """Parse the density file: one array per agent of [breakpoint, value] pairs."""
    doc = _load_json(text, "density spec")
    if not isinstance(doc, list) or not doc:
        raise ParseError("expected a non-empty array of agents", "$")
    densities = []
    for i, agent in enumerate(doc):
        loc = f"$[{i}]"
        if not isinstance(agent, list) or len(agent) < 2:
            raise ParseError("each agent needs at least two [x, value] pairs", loc)
        points = []
        for p, pair in enumerate(agent):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError("expected a [breakpoint, value] pair", f"{loc}[{p}]")
            x = _parse_rational(pair[0], f"{loc}[{p}][0]")
            y = _parse_rational(pair[1], f"{loc}[{p}][1]")
            points.append((x, y))
        try:
            densities.append(
                PiecewiseLinearDensity(
                    [x for x, _ in points], [y for _, y in points]
                )
            )
        except InstanceError as exc:
            raise ParseError(str(exc), loc) from exc
    return densities
