"""Declared causal graphs for the real-world datasets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

GRAPH_DIR = Path(__file__).with_name("graphs")
KINDS = ("continuous", "binary")


class GraphError(ValueError):
    pass


@dataclass
class CausalGraphSpec:
    nodes: list                       # names in declaration order
    parents: dict                     # name -> list of parent names
    kinds: dict                       # name -> "continuous" | "binary"
    protected: str
    target: str
    name: str = "graph"
    version: int = 1
    columns: list = field(default_factory=list)
    header: bool = True
    encode: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def children(self, node):
        return [n for n in self.nodes if node in self.parents[n]]

    def topological_order(self):
        order, state = [], {}

        def visit(n, path):
            if state.get(n) == "done":
                return
            if state.get(n) == "active":
                raise GraphError(f"cycle through {' -> '.join(path + [n])}")
            state[n] = "active"
            for p in self.parents[n]:
                visit(p, path + [n])
            state[n] = "done"
            order.append(n)

        for n in self.nodes:
            visit(n, [])
        return order

    def descendants(self, node):
        out, frontier = set(), [node]
        while frontier:
            for c in self.children(frontier.pop()):
                if c not in out:
                    out.add(c)
                    frontier.append(c)
        return out

    @property
    def features(self):
        """Non-protected, non-target nodes in topological order."""
        return [n for n in self.topological_order() if n not in (self.protected, self.target)]

    def validate(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names")
        for n in self.nodes:
            if self.kinds.get(n) not in KINDS:
                raise GraphError(f"node {n}: kind must be one of {KINDS}")
            missing = [p for p in self.parents.get(n, []) if p not in self.nodes]
            if missing:
                raise GraphError(f"node {n}: unknown parents {missing}")
        for role in ("protected", "target"):
            if getattr(self, role) not in self.nodes:
                raise GraphError(f"{role} node {getattr(self, role)!r} not in graph")
        self.topological_order()
        if self.parents[self.protected]:
            raise GraphError("protected node must be a root")
        if self.children(self.target):
            raise GraphError("target node must not have children")
        if self.kinds[self.protected] != "binary":
            raise GraphError("protected node must be binary")

    @classmethod
    def from_dict(cls, d):
        nodes = [x["name"] for x in d["nodes"]]
        return cls(nodes=nodes,
                   parents={x["name"]: list(x.get("parents", [])) for x in d["nodes"]},
                   kinds={x["name"]: x.get("kind", "continuous") for x in d["nodes"]},
                   protected=d["protected"], target=d["target"], name=d.get("name", "graph"),
                   version=int(d.get("version", 1)), columns=list(d.get("columns", [])),
                   header=bool(d.get("header", True)), encode=dict(d.get("encode", {})))

    def to_dict(self):
        return {"name": self.name, "version": self.version, "columns": self.columns,
                "header": self.header, "encode": self.encode,
                "nodes": [{"name": n, "parents": self.parents[n], "kind": self.kinds[n]} for n in self.nodes],
                "protected": self.protected, "target": self.target}


def load_graph(path_or_name):
    """Load a graph config by file path or by shipped name (``law``, ``adult``)."""
    p = Path(path_or_name)
    if not p.exists():
        p = GRAPH_DIR / f"{path_or_name}.v1.json"
    if not p.exists():
        raise FileNotFoundError(f"no graph config {path_or_name!r}")
    return CausalGraphSpec.from_dict(json.loads(p.read_text()))
