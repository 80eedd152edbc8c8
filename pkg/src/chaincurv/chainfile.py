"""Chain description files.

YAML mapping with these fields::

    states: [a, b, c]          # required, distinct names
    kernel:                    # exactly one of kernel / edges
      - [0.5, 0.5, 0.0]
      - ...
    edges:                     # [u, v, weight]; [u, u, w] is a self-loop
      - [a, b, 1.0]
    metric: [[0, 1, 2], ...]   # optional full distance matrix
    laziness: 0.5              # optional, p <- r I + (1 - r) p

Every error carries the 1-based line of the offending node.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .chain import STOCHASTIC_TOL, FiniteChain, build_chain
from .errors import ChainError, ChainFileError

FIELDS = ("states", "kernel", "edges", "metric", "laziness")


def _line(node) -> int:
    return node.start_mark.line + 1


class _Reader:
    def __init__(self, path):
        self.path = path

    def fail(self, msg, node=None):
        raise ChainFileError(msg, line=None if node is None else _line(node), path=self.path)

    def seq(self, node, what):
        if not isinstance(node, yaml.SequenceNode):
            self.fail(f"{what} must be a list", node)
        return node.value

    def number(self, node, what):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(f"{what} must be a number", node)
        try:
            v = float(node.value)
        except ValueError:
            self.fail(f"{what} must be a number, got {node.value!r}", node)
        if not math.isfinite(v):
            self.fail(f"{what} must be finite", node)
        return v

    def matrix(self, node, n, what):
        rows = self.seq(node, what)
        if len(rows) != n:
            self.fail(f"{what} has {len(rows)} rows, expected {n}", node)
        out = np.empty((n, n))
        for i, row in enumerate(rows):
            cells = self.seq(row, f"{what} row {i}")
            if len(cells) != n:
                self.fail(f"{what} row {i} has {len(cells)} entries, expected {n}", row)
            for j, cell in enumerate(cells):
                out[i, j] = self.number(cell, f"{what}[{i}][{j}]")
        return out


def parse_chain_text(text: str, path=None) -> FiniteChain:
    r = _Reader(path)
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ChainFileError(f"not valid YAML: {getattr(exc, 'problem', exc)}",
                             line=None if mark is None else mark.line + 1, path=path) from None
    if root is None:
        r.fail("empty chain file")
    if not isinstance(root, yaml.MappingNode):
        r.fail("chain file must be a mapping of fields", root)

    fields = {}
    for key, value in root.value:
        name = key.value if isinstance(key, yaml.ScalarNode) else None
        if name not in FIELDS:
            r.fail(f"unknown field {name!r}; allowed: {', '.join(FIELDS)}", key)
        if name in fields:
            r.fail(f"duplicate field {name!r}", key)
        fields[name] = (key, value)

    if "states" not in fields:
        r.fail("missing required field 'states'", root)
    states_node = fields["states"][1]
    states = []
    for s in r.seq(states_node, "states"):
        if not isinstance(s, yaml.ScalarNode) or s.value == "":
            r.fail("state names must be non-empty scalars", s)
        if s.value in states:
            r.fail(f"duplicate state {s.value!r}", s)
        states.append(s.value)
    n = len(states)
    if n == 0:
        r.fail("states must not be empty", states_node)

    has_k, has_e = "kernel" in fields, "edges" in fields
    if has_k == has_e:
        r.fail("give exactly one of 'kernel' and 'edges'", root)

    laziness = 0.0
    if "laziness" in fields:
        node = fields["laziness"][1]
        laziness = r.number(node, "laziness")
        if not 0.0 <= laziness < 1.0:
            r.fail("laziness must lie in [0, 1)", node)

    metric = None
    if "metric" in fields:
        metric = r.matrix(fields["metric"][1], n, "metric")

    kernel = conductances = None
    if has_k:
        knode = fields["kernel"][1]
        kernel = r.matrix(knode, n, "kernel")
        for i, row in enumerate(knode.value):
            for j, cell in enumerate(row.value):
                if kernel[i, j] < 0 or kernel[i, j] > 1:
                    r.fail(f"kernel[{i}][{j}] = {float(kernel[i, j]):g} is not a probability", cell)
            total = kernel[i].sum()
            if abs(total - 1.0) > STOCHASTIC_TOL:
                r.fail(f"kernel row {i} sums to {float(total):.12g}, not 1", row)
    else:
        enode = fields["edges"][1]
        index = {s: k for k, s in enumerate(states)}
        conductances = np.zeros((n, n))
        seen = set()
        for e in r.seq(enode, "edges"):
            parts = r.seq(e, "edge")
            if len(parts) != 3:
                r.fail("edge must be [u, v, weight]", e)
            u, v, w = parts
            ends = []
            for s in (u, v):
                if not isinstance(s, yaml.ScalarNode) or s.value not in index:
                    r.fail(f"edge endpoint {getattr(s, 'value', s)!r} is not a declared state", s)
                ends.append(index[s.value])
            weight = r.number(w, "edge weight")
            if weight <= 0:
                r.fail(f"edge weight must be positive, got {weight:g}", w)
            key = tuple(sorted(ends))
            if key in seen:
                r.fail(f"duplicate edge {u.value!r}-{v.value!r}", e)
            seen.add(key)
            a, b = ends
            conductances[a, b] = conductances[b, a] = weight
    node = fields["kernel" if has_k else "edges"][1]
    try:
        return build_chain(kernel, conductances=conductances, states=states,
                           metric=metric, laziness=laziness)
    except ChainError as exc:
        if metric is not None and "metric" in str(exc):
            node = fields["metric"][1]
        r.fail(str(exc), node)


def parse_chain_file(path) -> FiniteChain:
    """Read and validate a chain description file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ChainFileError(f"cannot read chain file: {exc.strerror}", path=str(path)) from None
    return parse_chain_text(text, path=str(path))


def dump_chain(chain: FiniteChain) -> str:
    """Serialize a chain in the kernel form understood by :func:`parse_chain_text`."""
    doc = {
        "states": [str(s) for s in chain.states],
        "kernel": [[float(v) for v in row] for row in chain.kernel],
    }
    if not chain.graph_metric:
        doc["metric"] = [[float(v) for v in row] for row in chain.metric]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
