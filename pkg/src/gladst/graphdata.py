"""Graph containers, TUDataset-format text I/O, and synthetic benchmarks.

Datasets live on disk in the multi-file plain-text layout used by the public
graph classification benchmark collections:

    <DS>_A.txt                one edge entry "i, j" per line, 1-based global ids
    <DS>_graph_indicator.txt  line k: graph id (1-based) of global node k
    <DS>_graph_labels.txt     line g: integer class label of graph g
    <DS>_node_labels.txt      optional, line k: integer label of node k
    <DS>_node_attributes.txt  optional, line k: comma-separated real features

Edge entries are directed rows of an undirected adjacency; both orientations
are usually present and are collapsed here (rows missing their reverse are
symmetrized and counted). Node features are taken from the attributes file
when present, else one-hot encoded node labels, else the node degree as a
single scalar feature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

BASE_MOTIFS = ("single_ring", "tree")
ANOMALY_KINDS = ("node_property", "graph_property")


class DataError(Exception):
    """Problem with dataset contents, on disk or in memory."""


class ParseError(DataError):
    """A dataset file is missing or malformed."""


class IntegrityError(DataError):
    """Dataset files are individually readable but mutually inconsistent."""


class UnsupportedDatasetError(DataError):
    """The dataset is readable but outside the supported problem class."""


class InsufficientTrainingDataError(DataError):
    """A label partition required for training is empty."""


class SynthSpecError(ValueError):
    """Invalid synthetic-dataset specification."""


def _canonical_edges(edges, node_count: int) -> tuple[tuple[int, int], ...]:
    canon = set()
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop on node {i}")
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise ValueError(f"edge ({i}, {j}) outside node range 0..{node_count - 1}")
        canon.add((i, j) if i < j else (j, i))
    return tuple(sorted(canon))


@dataclass
class Graph:
    """One undirected graph: edge set, per-node features, binary label.

    Edges are stored canonically as sorted (i, j) pairs with i < j, no
    duplicates and no self-loops. The degree-normalized adjacency operator
    is computed on first access and cached.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    features: np.ndarray
    label: int
    _norm_adj: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _agg_features: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError(f"node_count must be positive, got {self.node_count}")
        self.edges = _canonical_edges(self.edges, self.node_count)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.node_count or feats.shape[1] < 1:
            raise ValueError(
                f"features must be ({self.node_count}, d) with d >= 1, got {feats.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        self.features = feats
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def norm_adj(self) -> np.ndarray:
        if self._norm_adj is None:
            self._norm_adj = normalize_adjacency(self)
        return self._norm_adj

    def aggregated_features(self) -> np.ndarray:
        """norm_adj @ features, cached (fixed across parameter updates)."""
        if self._agg_features is None:
            self._agg_features = self.norm_adj @ self.features
        return self._agg_features

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.float64)
        for i, j in self.edges:
            deg[i] += 1.0
            deg[j] += 1.0
        return deg


@dataclass
class GraphDataset:
    """Ordered collection of graphs sharing one feature dimension.

    ``anomaly_label`` names which raw label (0 or 1) counts as abnormal;
    label-filtered views produced by :func:`split_by_label` keep it.
    """

    graphs: list[Graph]
    feature_dim: int
    anomaly_label: int
    name: str

    def __post_init__(self) -> None:
        if not self.graphs:
            raise ValueError("dataset must contain at least one graph")
        if self.anomaly_label not in (0, 1):
            raise ValueError(f"anomaly_label must be 0 or 1, got {self.anomaly_label}")
        for idx, g in enumerate(self.graphs):
            if g.feature_dim != self.feature_dim:
                raise ValueError(
                    f"graph {idx} has feature_dim {g.feature_dim}, dataset declares {self.feature_dim}"
                )

    def __len__(self) -> int:
        return len(self.graphs)

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def subset(self, indices) -> "GraphDataset":
        """View over the given graph indices, preserving the given order."""
        return GraphDataset(
            graphs=[self.graphs[i] for i in indices],
            feature_dim=self.feature_dim,
            anomaly_label=self.anomaly_label,
            name=self.name,
        )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset with planted anomalies.

    Base graphs are rings or random trees with degree features. Node-property
    anomalies hub one node to many random non-neighbors and perturb its
    feature row; graph-property anomalies replace the motif by two disjoint
    rings joined by a single bridge edge.
    """

    base_count: int
    anomaly_count: int
    base_motif: str = "single_ring"
    anomaly_kind: str = "graph_property"
    node_range: tuple[int, int] = (6, 12)
    perturb_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_count < 1:
            raise SynthSpecError(f"base_count must be >= 1, got {self.base_count}")
        if self.anomaly_count < 0:
            raise SynthSpecError(f"anomaly_count must be >= 0, got {self.anomaly_count}")
        if self.base_motif not in BASE_MOTIFS:
            raise SynthSpecError(f"base_motif must be one of {BASE_MOTIFS}, got {self.base_motif!r}")
        if self.anomaly_kind not in ANOMALY_KINDS:
            raise SynthSpecError(
                f"anomaly_kind must be one of {ANOMALY_KINDS}, got {self.anomaly_kind!r}"
            )
        lo, hi = self.node_range
        if not (3 <= lo <= hi):
            raise SynthSpecError(f"node_range must satisfy 3 <= min <= max, got {self.node_range}")
        if not (self.perturb_scale > 0):
            raise SynthSpecError(f"perturb_scale must be > 0, got {self.perturb_scale}")
        if self.seed < 0:
            raise SynthSpecError(f"seed must be a non-negative integer, got {self.seed}")


def normalize_adjacency(graph: Graph) -> np.ndarray:
    """Degree-normalized adjacency with self-loops.

    Returns S = D^{-1/2} (A + I) D^{-1/2} where D is the diagonal degree
    matrix of A + I. The self-loop guarantees every diagonal degree is at
    least 1, so the result is finite even for isolated nodes. Built so the
    output is bitwise symmetric.
    """
    n = graph.node_count
    a = np.zeros((n, n), dtype=np.float64)
    for i, j in graph.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    idx = np.arange(n)
    a[idx, idx] += 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * np.outer(inv_sqrt, inv_sqrt)


def degree_features(graph: Graph) -> np.ndarray:
    """Node degree (undirected incident edge count) as an (n, 1) feature matrix."""
    return graph.degrees().reshape(-1, 1)


def split_by_label(
    dataset: GraphDataset, require_trainable: bool = False
) -> tuple[GraphDataset, GraphDataset]:
    """Partition into (normal, abnormal) views by the dataset's anomaly label.

    Views share the underlying Graph objects and preserve dataset order.
    With ``require_trainable`` an empty partition raises
    InsufficientTrainingDataError instead of being returned.
    """
    normal_idx = [i for i, g in enumerate(dataset.graphs) if g.label != dataset.anomaly_label]
    abnormal_idx = [i for i, g in enumerate(dataset.graphs) if g.label == dataset.anomaly_label]
    if require_trainable:
        if not normal_idx:
            raise InsufficientTrainingDataError(
                f"dataset {dataset.name!r} has no normal graphs (anomaly_label={dataset.anomaly_label})"
            )
        if not abnormal_idx:
            raise InsufficientTrainingDataError(
                f"dataset {dataset.name!r} has no abnormal graphs (anomaly_label={dataset.anomaly_label})"
            )
    return dataset.subset(normal_idx), dataset.subset(abnormal_idx)


# ---------------------------------------------------------------------------
# TUDataset text format


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise ParseError(f"required dataset file is missing: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _parse_int(token: str, path: Path, lineno: int) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise ParseError(f"{path.name}:{lineno}: expected an integer, got {token.strip()!r}") from None


def _parse_edge_line(line: str, path: Path, lineno: int) -> tuple[int, int]:
    parts = line.split(",")
    if len(parts) != 2:
        raise ParseError(f"{path.name}:{lineno}: expected 'i, j', got {line.strip()!r}")
    return _parse_int(parts[0], path, lineno), _parse_int(parts[1], path, lineno)


def parse_tudataset(dir_path, dataset_name: str, anomaly_label: int) -> GraphDataset:
    """Parse one dataset directory into a GraphDataset.

    Node ids are remapped to 0-based per-graph local indices, directed edge
    rows collapse to undirected edges, and raw graph labels map onto {0, 1}
    by sorted order of the distinct values. Source files may be LF or CRLF
    terminated, with a trailing blank line tolerated.
    """
    root = Path(dir_path)
    if not root.is_dir():
        raise ParseError(f"dataset directory not found: {root}")

    def fpath(suffix: str) -> Path:
        return root / f"{dataset_name}_{suffix}.txt"

    indicator_path = fpath("graph_indicator")
    labels_path = fpath("graph_labels")
    edges_path = fpath("A")
    indicator_lines = _read_lines(indicator_path)
    label_lines = _read_lines(labels_path)
    edge_lines = _read_lines(edges_path)

    num_nodes = len(indicator_lines)
    num_graphs = len(label_lines)
    if num_graphs == 0:
        raise IntegrityError(f"{labels_path.name}: dataset has zero graphs")
    if num_nodes == 0:
        raise IntegrityError(f"{indicator_path.name}: dataset has zero nodes")

    node_graph = np.empty(num_nodes, dtype=np.int64)  # 0-based graph id per global node
    for k, line in enumerate(indicator_lines):
        gid = _parse_int(line, indicator_path, k + 1)
        if not (1 <= gid <= num_graphs):
            raise IntegrityError(
                f"{indicator_path.name}:{k + 1}: graph id {gid} outside 1..{num_graphs}"
            )
        node_graph[k] = gid - 1

    nodes_of: list[list[int]] = [[] for _ in range(num_graphs)]
    for k in range(num_nodes):
        nodes_of[node_graph[k]].append(k)
    for g, members in enumerate(nodes_of):
        if not members:
            raise IntegrityError(f"graph {g + 1} has zero nodes")
    local_idx = np.empty(num_nodes, dtype=np.int64)
    for members in nodes_of:
        for pos, k in enumerate(members):
            local_idx[k] = pos

    directed: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    self_loop_rows = 0
    for lineno, line in enumerate(edge_lines, start=1):
        u, v = _parse_edge_line(line, edges_path, lineno)
        if not (1 <= u <= num_nodes and 1 <= v <= num_nodes):
            raise IntegrityError(
                f"{edges_path.name}:{lineno}: node id outside 1..{num_nodes} in {line.strip()!r}"
            )
        gu, gv = node_graph[u - 1], node_graph[v - 1]
        if gu != gv:
            raise IntegrityError(
                f"{edges_path.name}:{lineno}: edge joins graphs {gu + 1} and {gv + 1}"
            )
        if u == v:
            self_loop_rows += 1
            continue
        directed[gu].add((int(local_idx[u - 1]), int(local_idx[v - 1])))

    undirected: list[list[tuple[int, int]]] = []
    asymmetric_rows = 0
    for dset in directed:
        und = sorted({(min(i, j), max(i, j)) for i, j in dset})
        asymmetric_rows += sum(1 for i, j in und if ((i, j) in dset) != ((j, i) in dset))
        undirected.append(und)
    if asymmetric_rows or self_loop_rows:
        log.warning(
            "%s: symmetrized %d edge rows lacking their reverse, dropped %d self-loop rows",
            dataset_name,
            asymmetric_rows,
            self_loop_rows,
        )

    raw_labels = [_parse_int(line, labels_path, g + 1) for g, line in enumerate(label_lines)]
    distinct = sorted(set(raw_labels))
    if len(distinct) > 2:
        raise UnsupportedDatasetError(
            f"{dataset_name}: expected at most two graph labels, found {distinct}"
        )
    label_map = {raw: pos for pos, raw in enumerate(distinct)}

    features_of = _build_features(root, dataset_name, nodes_of, undirected, num_nodes)

    graphs = [
        Graph(
            node_count=len(nodes_of[g]),
            edges=tuple(undirected[g]),
            features=features_of[g],
            label=label_map[raw_labels[g]],
        )
        for g in range(num_graphs)
    ]
    return GraphDataset(
        graphs=graphs,
        feature_dim=graphs[0].feature_dim,
        anomaly_label=anomaly_label,
        name=dataset_name,
    )


def _build_features(
    root: Path,
    dataset_name: str,
    nodes_of: list[list[int]],
    undirected: list[list[tuple[int, int]]],
    num_nodes: int,
) -> list[np.ndarray]:
    attr_path = root / f"{dataset_name}_node_attributes.txt"
    label_path = root / f"{dataset_name}_node_labels.txt"

    if attr_path.is_file():
        lines = _read_lines(attr_path)
        if len(lines) != num_nodes:
            raise ParseError(
                f"{attr_path.name}: {len(lines)} attribute rows for {num_nodes} nodes"
            )
        rows = []
        dim = None
        for lineno, line in enumerate(lines, start=1):
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise ParseError(
                    f"{attr_path.name}:{lineno}: malformed attribute row {line.strip()!r}"
                ) from None
            if dim is None:
                dim = len(row)
            elif len(row) != dim:
                raise ParseError(
                    f"{attr_path.name}:{lineno}: expected {dim} attributes, got {len(row)}"
                )
            rows.append(row)
        table = np.asarray(rows, dtype=np.float64)
        return [table[members] for members in nodes_of]

    if label_path.is_file():
        lines = _read_lines(label_path)
        if len(lines) != num_nodes:
            raise ParseError(f"{label_path.name}: {len(lines)} label rows for {num_nodes} nodes")
        vals = [_parse_int(line, label_path, k + 1) for k, line in enumerate(lines)]
        index = {v: i for i, v in enumerate(sorted(set(vals)))}
        table = np.zeros((num_nodes, len(index)), dtype=np.float64)
        for k, v in enumerate(vals):
            table[k, index[v]] = 1.0
        return [table[members] for members in nodes_of]

    feats = []
    for members, edges in zip(nodes_of, undirected):
        deg = np.zeros((len(members), 1), dtype=np.float64)
        for i, j in edges:
            deg[i, 0] += 1.0
            deg[j, 0] += 1.0
        feats.append(deg)
    return feats


def write_tudataset(dataset: GraphDataset, dir_path) -> Path:
    """Write the dataset in canonical TUDataset text form.

    Edge rows are "i, j" with both orientations present, sorted ascending;
    features go to the node-attributes file with 17 significant digits so
    float64 values round-trip exactly. All files are LF terminated.
    """
    if not dataset.name or "/" in dataset.name or "\\" in dataset.name:
        raise ValueError(f"dataset name is not a valid file prefix: {dataset.name!r}")
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)

    edge_rows: list[str] = []
    indicator_rows: list[str] = []
    label_rows: list[str] = []
    attr_rows: list[str] = []
    offset = 0
    for gid, g in enumerate(dataset.graphs, start=1):
        pairs = []
        for i, j in g.edges:
            pairs.append((offset + i + 1, offset + j + 1))
            pairs.append((offset + j + 1, offset + i + 1))
        edge_rows.extend(f"{u}, {v}" for u, v in sorted(pairs))
        indicator_rows.extend([str(gid)] * g.node_count)
        label_rows.append(str(g.label))
        attr_rows.extend(", ".join("%.17g" % x for x in row) for row in g.features)
        offset += g.node_count

    def write(suffix: str, rows: list[str]) -> None:
        path = root / f"{dataset.name}_{suffix}.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(rows))
            fh.write("\n")

    write("A", edge_rows)
    write("graph_indicator", indicator_rows)
    write("graph_labels", label_rows)
    write("node_attributes", attr_rows)
    return root


# ---------------------------------------------------------------------------
# Synthetic generation


def _ring_edges(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def _tree_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    # random recursive tree: each new node attaches to a uniform earlier one
    return [(int(rng.integers(0, i)), i) for i in range(1, n)]


def _double_ring_edges(n: int) -> list[tuple[int, int]]:
    n1 = n // 2
    edges = [(i, (i + 1) % n1) for i in range(n1)]
    edges += [(n1 + i, n1 + (i + 1) % (n - n1)) for i in range(n - n1)]
    edges.append((0, n1))  # bridge
    return edges


def _degree_matrix(n: int, edges) -> np.ndarray:
    deg = np.zeros((n, 1), dtype=np.float64)
    for i, j in edges:
        deg[i, 0] += 1.0
        deg[j, 0] += 1.0
    return deg


def generate_synthetic(spec: SynthSpec) -> GraphDataset:
    """Generate base graphs plus planted anomalies, deterministically in seed.

    Base graphs get label 0, anomalies label 1, and the dataset's
    anomaly_label is 1. Node counts are drawn uniformly from
    spec.node_range (inclusive).
    """
    lo, hi = spec.node_range
    if spec.anomaly_kind == "graph_property" and spec.anomaly_count > 0 and lo < 6:
        raise SynthSpecError(
            f"graph_property anomalies need node_range.min >= 6 (two rings of >= 3), got {lo}"
        )
    rng = np.random.default_rng(spec.seed)

    def draw_n() -> int:
        return int(rng.integers(lo, hi + 1))

    def base_edges(n: int) -> list[tuple[int, int]]:
        if spec.base_motif == "single_ring":
            return _ring_edges(n)
        return _tree_edges(n, rng)

    graphs: list[Graph] = []
    for _ in range(spec.base_count):
        n = draw_n()
        edges = base_edges(n)
        graphs.append(Graph(n, tuple(edges), _degree_matrix(n, edges), label=0))

    for _ in range(spec.anomaly_count):
        n = draw_n()
        if spec.anomaly_kind == "graph_property":
            edges = _double_ring_edges(n)
            feats = _degree_matrix(n, edges)
        else:
            edges = base_edges(n)
            neighbors: set[int] = set()
            v = int(rng.integers(0, n))
            for i, j in edges:
                if i == v:
                    neighbors.add(j)
                elif j == v:
                    neighbors.add(i)
            candidates = [u for u in range(n) if u != v and u not in neighbors]
            k = min(math.ceil(n / 2), len(candidates))
            if k > 0:
                picks = rng.choice(len(candidates), size=k, replace=False)
                edges = edges + [(v, candidates[int(p)]) for p in picks]
            feats = _degree_matrix(n, edges)
            feats[v] += rng.normal(0.0, spec.perturb_scale, size=feats.shape[1])
        graphs.append(Graph(n, tuple(edges), feats, label=1))

    name = f"synth_{spec.base_motif}_{spec.anomaly_kind}_s{spec.seed}"
    return GraphDataset(graphs=graphs, feature_dim=1, anomaly_label=1, name=name)
