"""Labeled k-nearest-neighbor segment graphs and their file formats."""
from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import LabelingError

EPSILON = 1e-9
GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


@dataclass
class SegmentGraph:
    """Undirected weighted graph; node i is the i-th segment of a piece."""

    piece_id: str
    labels: list[str | None]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    k: int | None = None
    expectancy: list[float | None] | None = None
    node_ids: list[int] | None = None

    def __post_init__(self):
        n = len(self.labels)
        if self.expectancy is None:
            self.expectancy = [None] * n
        if self.node_ids is None:
            self.node_ids = list(range(n))
        clean = {}
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            clean[(min(u, v), max(u, v))] = float(w)
        self.edges = clean
        self._adj = None

    @property
    def n(self) -> int:
        return len(self.labels)

    def adjacency(self) -> list[list[int]]:
        if self._adj is None:
            adj = [[] for _ in range(self.n)]
            for u, v in self.edges:
                adj[u].append(v)
                adj[v].append(u)
            self._adj = [sorted(a) for a in adj]
        return self._adj

    def degree(self, node: int) -> int:
        return len(self.adjacency()[node])

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.n, self.n))
        for (u, v), wt in self.edges.items():
            w[u, v] = w[v, u] = wt
        return w

    def subgraph(self, nodes: Sequence[int]) -> "SegmentGraph":
        nodes = sorted(nodes)
        index = {old: new for new, old in enumerate(nodes)}
        edges = {(index[u], index[v]): w for (u, v), w in self.edges.items()
                 if u in index and v in index}
        return SegmentGraph(
            self.piece_id,
            [self.labels[i] for i in nodes],
            edges,
            self.k,
            [self.expectancy[i] for i in nodes],
            [self.node_ids[i] for i in nodes],
        )

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        adj = self.adjacency()
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.n

    def same_as(self, other: "SegmentGraph", rel_tol: float = 1e-8) -> bool:
        """Structural equality with weights compared to ``rel_tol``."""
        if (self.piece_id, self.labels, self.node_ids, self.k) != (
            other.piece_id, other.labels, other.node_ids, other.k
        ):
            return False
        if set(self.edges) != set(other.edges):
            return False
        return all(
            abs(self.edges[e] - other.edges[e]) <= rel_tol * max(abs(self.edges[e]), 1e-300)
            for e in self.edges
        )


def knn_graph(d, k: int, piece_id: str = "", labels=None, expectancy=None) -> SegmentGraph:
    """Union-symmetrized k-NN graph with weights 1/(d + EPSILON).

    Ties for the k-th neighbor go to the lower node index.
    """
    dist = np.asarray(getattr(d, "d", d), dtype=np.float64)
    n = dist.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n (k={k}, n={n})")
    edges = {}
    for i in range(n):
        row = dist[i].copy()
        row[i] = np.inf
        order = np.argsort(row, kind="stable")[:k]
        for j in order.tolist():
            u, v = min(i, j), max(i, j)
            edges[(u, v)] = 1.0 / (dist[u, v] + EPSILON)
    return SegmentGraph(piece_id, list(labels) if labels is not None else [None] * n,
                        edges, k, expectancy)


def _lookup(source, i: int, node_id):
    if isinstance(source, Mapping):
        return source.get(node_id)
    return source[i] if i < len(source) else None


def label_nodes(graph: SegmentGraph, bins, dominants) -> SegmentGraph:
    """Attach "Bin|Symbol" labels. ``bins``/``dominants`` are sequences or maps by node id."""
    labels = []
    for i, node_id in enumerate(graph.node_ids):
        b = _lookup(bins, i, node_id)
        s = _lookup(dominants, i, node_id)
        if b is None or s is None:
            raise LabelingError(
                f"segment {graph.piece_id}:{node_id} has no "
                f"{'expectancy bin' if b is None else 'dominant symbol'}"
            )
        labels.append(f"{b}|{s}")
    return SegmentGraph(graph.piece_id, labels, dict(graph.edges), graph.k,
                        list(graph.expectancy), list(graph.node_ids))


# -- export / import ---------------------------------------------------------

def _fmt(w: float) -> str:
    return f"{w:.9g}"


def to_graphml(graph: SegmentGraph) -> str:
    ET.register_namespace("", GRAPHML_NS)
    root = ET.Element("graphml", xmlns=GRAPHML_NS)
    for key, target, name, typ in (
        ("label", "node", "label", "string"),
        ("expectancy", "node", "expectancy", "double"),
        ("weight", "edge", "weight", "double"),
        ("k", "graph", "k", "int"),
    ):
        ET.SubElement(root, "key", {"id": key, "for": target, "attr.name": name, "attr.type": typ})
    g = ET.SubElement(root, "graph", id=graph.piece_id, edgedefault="undirected")
    if graph.k is not None:
        ET.SubElement(g, "data", key="k").text = str(graph.k)
    for i in range(graph.n):
        node = ET.SubElement(g, "node", id=f"n{graph.node_ids[i]}")
        if graph.labels[i] is not None:
            ET.SubElement(node, "data", key="label").text = graph.labels[i]
        if graph.expectancy[i] is not None:
            ET.SubElement(node, "data", key="expectancy").text = repr(graph.expectancy[i])
    for (u, v), w in sorted(graph.edges.items()):
        edge = ET.SubElement(g, "edge", source=f"n{graph.node_ids[u]}", target=f"n{graph.node_ids[v]}")
        ET.SubElement(edge, "data", key="weight").text = _fmt(w)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def from_graphml(text: str) -> SegmentGraph:
    ns = {"g": GRAPHML_NS}
    root = ET.fromstring(text)
    g = root.find("g:graph", ns)
    k_text = g.findtext("g:data[@key='k']", namespaces=ns)
    labels, expectancy, node_ids, index = [], [], [], {}
    for i, node in enumerate(g.findall("g:node", ns)):
        index[node.get("id")] = i
        node_ids.append(int(node.get("id")[1:]))
        labels.append(node.findtext("g:data[@key='label']", namespaces=ns))
        exp = node.findtext("g:data[@key='expectancy']", namespaces=ns)
        expectancy.append(float(exp) if exp is not None else None)
    edges = {}
    for edge in g.findall("g:edge", ns):
        w = float(edge.findtext("g:data[@key='weight']", namespaces=ns))
        edges[(index[edge.get("source")], index[edge.get("target")])] = w
    return SegmentGraph(g.get("id"), labels, edges, int(k_text) if k_text else None,
                        expectancy, node_ids)


def to_dot(graph: SegmentGraph) -> str:
    lines = [f'graph "{graph.piece_id}" {{']
    for i in range(graph.n):
        label = graph.labels[i] or ""
        lines.append(f'  n{graph.node_ids[i]} [label="{label}"];')
    for (u, v), w in sorted(graph.edges.items()):
        lines.append(f"  n{graph.node_ids[u]} -- n{graph.node_ids[v]} [weight={_fmt(w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: SegmentGraph) -> str:
    data = {
        "piece_id": graph.piece_id,
        "k": graph.k,
        "nodes": [
            {"id": graph.node_ids[i], "label": graph.labels[i], "expectancy": graph.expectancy[i]}
            for i in range(graph.n)
        ],
        "edges": [[u, v, w] for (u, v), w in sorted(graph.edges.items())],
    }
    return json.dumps(data, indent=1)


def from_json(text: str) -> SegmentGraph:
    data = json.loads(text)
    nodes = data["nodes"]
    return SegmentGraph(
        data["piece_id"],
        [nd["label"] for nd in nodes],
        {(u, v): w for u, v, w in data["edges"]},
        data["k"],
        [nd["expectancy"] for nd in nodes],
        [nd["id"] for nd in nodes],
    )
