"""Model documents, dataset CSV handling, and DOT export.

Model documents are JSON with a canonical rendering: keys sorted, floats
printed with 17 significant digits, two-space indentation. Semantically
equal models therefore serialize to identical bytes, and
parse(serialize(m)) reproduces m exactly.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .errors import SchemaError
from .factors import Factor, Variable
from .graphs import DirectedGraph
from .learning import Dataset
from .models import BayesianNetwork, MarkovRandomField, Model, validate

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------


def _render(value, indent: int) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [
            f'{pad}  {json.dumps(str(k))}: {_render(value[k], indent + 1)}'
            for k in sorted(value)
        ]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        parts = [f"{pad}  {_render(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise SchemaError("non-finite numbers cannot be serialized")
        return format(float(value), ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    raise SchemaError(f"cannot serialize value of type {type(value).__name__}")


def canonical_json(document) -> str:
    return _render(document, 0) + "\n"


# ---------------------------------------------------------------------------
# Model documents
# ---------------------------------------------------------------------------


def model_to_document(model: Model) -> dict:
    variables = [
        {"name": v.name, "states": list(v.states)}
        for _, v in sorted(model.variables.items())
    ]
    factors = []
    if isinstance(model, BayesianNetwork):
        model_type = "bayesian_network"
        for name in sorted(model.cpds):
            cpd = model.cpds[name]
            factors.append(
                {
                    "kind": "cpd",
                    "child": name,
                    "scope": list(cpd.names),
                    "domain": cpd.domain,
                    "table": [float(x) for x in cpd.values],
                }
            )
    else:
        model_type = "markov_random_field"
        for f in model.factors:
            factors.append(
                {
                    "kind": "potential",
                    "scope": list(f.names),
                    "domain": f.domain,
                    "table": [float(x) for x in f.values],
                }
            )
    return {
        "format_version": FORMAT_VERSION,
        "model_type": model_type,
        "variables": variables,
        "factors": factors,
    }


def serialize_model(model: Model) -> str:
    return canonical_json(model_to_document(model))


def _require(document, key, types, path):
    if key not in document:
        raise SchemaError(f"missing key {key!r}", path=path)
    value = document[key]
    if not isinstance(value, types):
        raise SchemaError(
            f"{key!r} must be {getattr(types, '__name__', types)}", path=path
        )
    return value


def document_to_model(document: dict) -> Model:
    if not isinstance(document, dict):
        raise SchemaError("document must be an object", path="$")
    version = _require(document, "format_version", int, "$")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version}", path="$.format_version")
    model_type = _require(document, "model_type", str, "$")
    entries = _require(document, "variables", list, "$")
    variables: list[Variable] = []
    for i, entry in enumerate(entries):
        path = f"$.variables[{i}]"
        name = _require(entry, "name", str, path)
        states = _require(entry, "states", list, path)
        if not states or not all(isinstance(s, str) for s in states):
            raise SchemaError("states must be a nonempty list of strings", path=path)
        variables.append(Variable(name, tuple(states)))
    by_name = {v.name: v for v in variables}
    if len(by_name) != len(variables):
        raise SchemaError("duplicate variable names", path="$.variables")

    factor_entries = _require(document, "factors", list, "$")
    parsed = []
    for i, entry in enumerate(factor_entries):
        path = f"$.factors[{i}]"
        kind = _require(entry, "kind", str, path)
        scope_names = _require(entry, "scope", list, path)
        table = _require(entry, "table", list, path)
        domain = entry.get("domain", "linear")
        if domain not in ("linear", "log"):
            raise SchemaError(f"unknown domain {domain!r}", path=path)
        scope = []
        for name in scope_names:
            if name not in by_name:
                raise SchemaError(f"scope references unknown variable {name!r}", path=path)
            scope.append(by_name[name])
        expected = int(np.prod([v.cardinality for v in scope])) if scope else 1
        if len(table) != expected:
            raise SchemaError(
                f"table has {len(table)} entries but the scope "
                f"{scope_names} requires {expected}",
                path=path,
            )
        try:
            factor = Factor(scope, np.asarray(table, dtype=float), domain=domain)
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), path=path) from exc
        parsed.append((kind, entry, factor, path))

    if model_type == "bayesian_network":
        cpds = {}
        edges = []
        for kind, entry, factor, path in parsed:
            if kind != "cpd":
                raise SchemaError("bayesian networks require cpd factors", path=path)
            child = _require(entry, "child", str, path)
            if not factor.names or factor.names[0] != child:
                raise SchemaError("cpd scope must start with the child", path=path)
            if child in cpds:
                raise SchemaError(f"duplicate cpd for {child!r}", path=path)
            cpds[child] = factor
            edges.extend((parent, child) for parent in factor.names[1:])
        dag = DirectedGraph([v.name for v in variables], edges)
        model = BayesianNetwork(variables, dag, cpds)
    elif model_type == "markov_random_field":
        for kind, _, _, path in parsed:
            if kind != "potential":
                raise SchemaError("markov random fields require potential factors", path=path)
        model = MarkovRandomField(variables, [f for _, _, f, _ in parsed])
    else:
        raise SchemaError(f"unknown model_type {model_type!r}", path="$.model_type")

    problems = validate(model)
    if problems:
        raise SchemaError("; ".join(str(p) for p in problems), path="$")
    return model


def parse_model(text: str) -> Model:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return document_to_model(document)


# ---------------------------------------------------------------------------
# Dataset CSV
# ---------------------------------------------------------------------------


def load_dataset(text: str, variables: Sequence[Variable] | Model) -> Dataset:
    """Parse a CSV of state labels, validating header and every cell."""
    if hasattr(variables, "variables"):
        variables = list(variables.variables.values())
    by_name = {v.name: v for v in variables}
    lines = [line for line in text.strip().splitlines() if line]
    if not lines:
        raise SchemaError("empty dataset")
    header = [h.strip() for h in lines[0].split(",")]
    if len(set(header)) != len(header):
        raise SchemaError("duplicate columns in header")
    unknown = [h for h in header if h not in by_name and h != "weight"]
    if unknown:
        raise SchemaError(f"unknown columns {unknown}")
    columns = [h for h in header if h != "weight"]
    missing = sorted(set(by_name) - set(columns))
    if missing:
        raise SchemaError(f"missing columns {missing}")
    ordered = sorted(by_name)
    rows = np.zeros((len(lines) - 1, len(ordered)), dtype=np.int64)
    for r, line in enumerate(lines[1:], start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise SchemaError(f"row {r} has {len(cells)} cells, expected {len(header)}")
        for name, cell in zip(header, cells):
            if name == "weight":
                continue
            var = by_name[name]
            if cell not in var.states:
                raise SchemaError(
                    f"row {r}, column {name!r}: invalid state {cell!r}"
                )
            rows[r - 1, ordered.index(name)] = var.index_of(cell)
    return Dataset(tuple(by_name[n] for n in ordered), rows)


def dataset_to_csv(dataset: Dataset) -> str:
    lines = [",".join(dataset.names)]
    for row in dataset.rows:
        lines.append(
            ",".join(v.states[s] for v, s in zip(dataset.variables, row))
        )
    return "\n".join(lines) + "\n"


def load_vector_csv(text: str) -> np.ndarray:
    """Numeric CSV (header optional) as a float matrix, for mixture models."""
    lines = [line for line in text.strip().splitlines() if line]
    if not lines:
        raise SchemaError("empty dataset")
    start = 0
    try:
        [float(c) for c in lines[0].split(",")]
    except ValueError:
        start = 1
    rows = []
    for r, line in enumerate(lines[start:], start=start + 1):
        try:
            rows.append([float(c) for c in line.split(",")])
        except ValueError as exc:
            raise SchemaError(f"row {r}: {exc}") from exc
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise SchemaError("rows have inconsistent widths")
    return np.asarray(rows, dtype=float)


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def export_dot(obj, path: str) -> None:
    """Write the DOT rendering of a graph, junction tree, or model."""
    if hasattr(obj, "to_dot"):
        text = obj.to_dot()
    elif isinstance(obj, BayesianNetwork):
        text = obj.dag.to_dot()
    elif isinstance(obj, MarkovRandomField):
        text = obj.skeleton().to_dot()
    else:
        raise TypeError(f"cannot render {type(obj).__name__} as DOT")
    with open(path, "w") as handle:
        handle.write(text)
