"""Graph data model, dataset loaders and basic matrix extraction."""
from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed or structurally inconsistent."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph with node features.

    ``edges`` holds each undirected edge once as ``(u, v, w)`` with ``u < v``.
    Node inputs are either categorical ``node_labels`` (length ``n``) or a
    real ``node_features`` matrix of shape ``(n, d_in)``.
    """

    n: int
    edges: tuple = ()
    node_labels: Optional[np.ndarray] = None
    node_features: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        seen = {}
        for u, v, w in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop at node {u} is not allowed")
            if w < 0:
                raise ValueError(f"negative weight {w} on edge ({u}, {v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen[key] = float(w)
        object.__setattr__(
            self, "edges", tuple((u, v, w) for (u, v), w in sorted(seen.items()))
        )
        if self.node_labels is not None:
            labels = np.asarray(self.node_labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != self.n:
                raise ValueError("node_labels length must equal n")
            labels.setflags(write=False)
            object.__setattr__(self, "node_labels", labels)
        if self.node_features is not None:
            feats = np.asarray(self.node_features, dtype=np.float64)
            if feats.ndim == 1:
                feats = feats.reshape(-1, 1)
            if feats.shape[0] != self.n:
                raise ValueError("node_features must have n rows")
            feats.setflags(write=False)
            object.__setattr__(self, "node_features", feats)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``.

        With ``P[:, i] = e_{perm[i]}`` the new adjacency is ``P.T @ A @ P``.
        """
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        edges = tuple((int(inv[u]), int(inv[v]), w) for u, v, w in self.edges)
        return Graph(
            n=self.n,
            edges=edges,
            node_labels=None if self.node_labels is None else self.node_labels[perm],
            node_features=None if self.node_features is None else self.node_features[perm],
            name=self.name,
        )


@dataclass
class Dataset:
    graphs: list
    targets: np.ndarray
    task: str = "regression"
    num_classes: Optional[int] = None
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        self.targets = np.asarray(
            self.targets, dtype=np.int64 if self.task == "classification" else np.float64
        )
        if len(self.targets) != len(self.graphs):
            raise DatasetFormatError(
                f"{len(self.targets)} targets for {len(self.graphs)} graphs"
            )
        if self.task == "classification":
            if self.num_classes is None:
                self.num_classes = int(self.targets.max()) + 1 if len(self.targets) else 0
            if len(self.targets) and (self.targets.min() < 0 or self.targets.max() >= self.num_classes):
                raise DatasetFormatError("class ids must lie in [0, num_classes)")
        used = set()
        for name, idx in self.splits.items():
            idx = [int(i) for i in idx]
            if any(i < 0 or i >= len(self.graphs) for i in idx):
                raise DatasetFormatError(f"split {name!r} has out-of-range indices")
            if used.intersection(idx):
                raise DatasetFormatError(f"split {name!r} overlaps another split")
            used.update(idx)
            self.splits[name] = idx

    def __len__(self):
        return len(self.graphs)

    def subset(self, name: str) -> list[int]:
        return list(self.splits.get(name, []))


def adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for u, v, w in g.edges:
        a[u, v] = w
        a[v, u] = w
    return a


def degree_matrix(a: np.ndarray, add_self_loops: bool = False) -> np.ndarray:
    """Diagonal of ``D = diag(A 1)``; with ``add_self_loops`` it is the diagonal of ``D + I``."""
    d = np.asarray(a, dtype=np.float64).sum(axis=1)
    if add_self_loops:
        d = d + 1.0
    return d


HOP_INF = np.iinfo(np.int64).max


def hop_distances(g: Graph, h_max: int) -> np.ndarray:
    """BFS hop counts; pairs farther than ``h_max`` (or unreachable) hold ``HOP_INF``."""
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    adj = g.neighbors()
    out = np.full((g.n, g.n), HOP_INF, dtype=np.int64)
    for s in range(g.n):
        out[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if out[s, u] >= h_max:
                continue
            for v in adj[u]:
                if out[s, v] == HOP_INF:
                    out[s, v] = out[s, u] + 1
                    queue.append(v)
    return out


def connected_components(g: Graph) -> np.ndarray:
    comp = np.full(g.n, -1, dtype=np.int64)
    adj = g.neighbors()
    c = 0
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        comp[s] = c
        stack = [s]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = c
                    stack.append(v)
        c += 1
    return comp


# --- TUDataset text format -------------------------------------------------

def _read_int_lines(path: str) -> list[int]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(int(float(text)) if "." in text else int(text))
            except ValueError:
                raise DatasetFormatError(f"{path}:{lineno}: expected an integer, got {text!r}") from None
    return values


def _remap_sorted(raw: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    classes = sorted(set(raw))
    lookup = {c: i for i, c in enumerate(classes)}
    return np.array([lookup[r] for r in raw], dtype=np.int64), classes


def load_tudataset(directory: str, name: str) -> Dataset:
    """Read a TUDataset from its distributed text files.

    Graph labels are remapped to contiguous ids by sorting the distinct raw
    labels ascending. Node labels are kept as raw ids.
    """
    prefix = os.path.join(directory, name)
    indicator = _read_int_lines(f"{prefix}_graph_indicator.txt")
    graph_labels = _read_int_lines(f"{prefix}_graph_labels.txt")
    num_nodes = len(indicator)
    if num_nodes == 0:
        raise DatasetFormatError("graph indicator file is empty")
    graph_ids = sorted(set(indicator))
    if len(graph_ids) != len(graph_labels):
        raise DatasetFormatError(
            f"{len(graph_ids)} graphs in indicator but {len(graph_labels)} graph labels"
        )

    node_labels_path = f"{prefix}_node_labels.txt"
    if os.path.exists(node_labels_path):
        node_labels = _read_int_lines(node_labels_path)
        if len(node_labels) != num_nodes:
            raise DatasetFormatError(
                f"{len(node_labels)} node labels for {num_nodes} nodes"
            )
    else:
        node_labels = [0] * num_nodes

    # global 1-indexed node id -> (graph position, local index)
    members: dict[int, list[int]] = {gid: [] for gid in graph_ids}
    for node, gid in enumerate(indicator, start=1):
        members[gid].append(node)
    local = {}
    for gpos, gid in enumerate(graph_ids):
        for li, node in enumerate(members[gid]):
            local[node] = (gpos, li)

    edge_sets: list[dict] = [dict() for _ in graph_ids]
    with open(f"{prefix}_A.txt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise DatasetFormatError(f"{prefix}_A.txt:{lineno}: expected 'u, v', got {text!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetFormatError(f"{prefix}_A.txt:{lineno}: non-integer node id in {text!r}") from None
            if u not in local or v not in local:
                raise DatasetFormatError(f"{prefix}_A.txt:{lineno}: node id out of range")
            (gu, lu), (gv, lv) = local[u], local[v]
            if gu != gv:
                raise DatasetFormatError(f"{prefix}_A.txt:{lineno}: edge crosses graphs")
            if lu == lv:
                continue
            edge_sets[gu][(min(lu, lv), max(lu, lv))] = 1.0

    targets, _ = _remap_sorted(graph_labels)
    graphs = []
    for gpos, gid in enumerate(graph_ids):
        nodes = members[gid]
        graphs.append(Graph(
            n=len(nodes),
            edges=tuple((u, v, w) for (u, v), w in sorted(edge_sets[gpos].items())),
            node_labels=np.array([node_labels[x - 1] for x in nodes]),
            name=f"{name}_{gid}",
        ))
    return Dataset(graphs, targets, task="classification", num_classes=int(targets.max()) + 1)


# --- JSON fixture format ---------------------------------------------------

def dataset_to_json(ds: Dataset) -> dict:
    doc = {"task": ds.task}
    if ds.task == "classification":
        doc["num_classes"] = int(ds.num_classes)
    graphs = []
    for g, t in zip(ds.graphs, ds.targets):
        entry = {"n": g.n, "edges": [[u, v, w] for u, v, w in g.edges]}
        if g.node_labels is not None:
            entry["node_labels"] = g.node_labels.tolist()
        if g.node_features is not None:
            entry["node_features"] = g.node_features.tolist()
        if g.name:
            entry["name"] = g.name
        entry["target"] = int(t) if ds.task == "classification" else float(t)
        graphs.append(entry)
    doc["graphs"] = graphs
    if ds.splits:
        doc["splits"] = {k: list(v) for k, v in ds.splits.items()}
    return doc


def dataset_from_json(doc: dict) -> Dataset:
    task = doc.get("task")
    if task not in ("regression", "classification"):
        raise DatasetFormatError(f"task must be 'regression' or 'classification', got {task!r}")
    if "graphs" not in doc:
        raise DatasetFormatError("missing 'graphs'")
    graphs, targets = [], []
    for i, entry in enumerate(doc["graphs"]):
        try:
            edges = []
            for e in entry.get("edges", []):
                u, v = int(e[0]), int(e[1])
                w = float(e[2]) if len(e) > 2 else 1.0
                edges.append((u, v, w))
            graphs.append(Graph(
                n=int(entry["n"]),
                edges=tuple(edges),
                node_labels=entry.get("node_labels"),
                node_features=entry.get("node_features"),
                name=entry.get("name", ""),
            ))
            targets.append(entry.get("target", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"graphs[{i}]: {exc}") from exc
    return Dataset(graphs, targets, task=task, num_classes=doc.get("num_classes"),
                   splits=dict(doc.get("splits", {})))


def save_json(ds: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(ds), fh)


def load_json(path: str) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}: {exc}") from exc
    return dataset_from_json(doc)


# --- synthetic data --------------------------------------------------------

def cycle_graph(n: int, name: str = "") -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 nodes")
    return Graph(n, tuple((i, (i + 1) % n, 1.0) for i in range(n)),
                 node_labels=np.zeros(n, dtype=np.int64), name=name or f"C{n}")


def path_graph(n: int, name: str = "") -> Graph:
    return Graph(n, tuple((i, i + 1, 1.0) for i in range(n - 1)),
                 node_labels=np.zeros(n, dtype=np.int64), name=name or f"P{n}")


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4,
                 connected: bool = True, weighted: bool = False) -> Graph:
    """Erdos-Renyi graph; with ``connected`` a random spanning tree is added first."""
    edges = {}
    if connected and n > 1:
        order = rng.permutation(n)
        for i in range(1, n):
            u, v = int(order[i]), int(order[rng.integers(i)])
            edges[(min(u, v), max(u, v))] = True
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges[(u, v)] = True
    weights = rng.uniform(0.2, 2.0, size=len(edges)) if weighted else np.ones(len(edges))
    return Graph(n, tuple((u, v, float(w)) for (u, v), w in zip(sorted(edges), weights)),
                 node_labels=np.zeros(n, dtype=np.int64))


def split_indices(n: int, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> dict:
    order = np.random.default_rng(seed).permutation(n).tolist()
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = max(1, min(n_train, n))
    n_val = max(0, min(n_val, n - n_train))
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train:n_train + n_val]),
        "test": sorted(order[n_train + n_val:]),
    }


def kfold_indices(n: int, k: int, fold: int, seed: int = 0) -> dict:
    """Generic seeded k-fold: fold ``fold`` is the test split, the next fold is validation."""
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}]")
    if not 0 <= fold < k:
        raise ValueError(f"fold must lie in [0, {k})")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    test = folds[fold]
    val = folds[(fold + 1) % k] if k > 2 else np.array([], dtype=np.int64)
    train = np.concatenate([f for i, f in enumerate(folds) if i != fold and (k == 2 or i != (fold + 1) % k)])
    return {"train": sorted(train.tolist()), "val": sorted(val.tolist()), "test": sorted(test.tolist())}


def mean_degree(g: Graph) -> float:
    """Weighted mean degree ``2 * sum(w) / n``; the degree_regression target."""
    return 2.0 * sum(w for _, _, w in g.edges) / g.n


def synth_dataset(kind: str, n_graphs: int, n_range=(4, 8), seed: int = 0,
                  fractions=(0.6, 0.2, 0.2)) -> Dataset:
    """Deterministic synthetic datasets.

    ``cycle_vs_path``: alternating cycles (label 1) and paths (label 0).
    ``degree_regression``: connected random graphs, target is the mean degree.
    """
    if n_graphs < 1:
        raise ValueError("n_graphs must be >= 1")
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid n_range {n_range}")
    rng = np.random.default_rng(seed)
    graphs, targets = [], []
    if kind == "cycle_vs_path":
        lo = max(lo, 3)
        if hi < lo:
            raise ValueError("cycle_vs_path needs n_range reaching at least 3")
        for i in range(n_graphs):
            n = int(rng.integers(lo, hi + 1))
            if i % 2 == 0:
                graphs.append(cycle_graph(n, name=f"cycle_{i}"))
                targets.append(1)
            else:
                graphs.append(path_graph(n, name=f"path_{i}"))
                targets.append(0)
        task, num_classes = "classification", 2
    elif kind == "degree_regression":
        for i in range(n_graphs):
            n = int(rng.integers(lo, hi + 1))
            g = random_graph(rng, n, p=float(rng.uniform(0.1, 0.6)))
            g = Graph(g.n, g.edges, node_labels=g.node_labels, name=f"graph_{i}")
            graphs.append(g)
            targets.append(mean_degree(g))
        task, num_classes = "regression", None
    else:
        raise ValueError(f"unknown synthetic dataset kind {kind!r}")
    return Dataset(graphs, targets, task=task, num_classes=num_classes,
                   splits=split_indices(n_graphs, fractions, seed))
