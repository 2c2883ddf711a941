from collections import deque

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tcdl.errors import TreeError
from tcdl.tolerance import CHAIN_PRODUCT, PROBABILITY_SUM

__all__ = [
    "build_tree",
    "NodeSpec",
    "ScenarioTree",
    "tree_to_spec",
    "TreeSpec",
]


class NodeSpec(BaseModel):
    model_config = ConfigDict(
        populate_by_name=True,
        extra="forbid",
    )

    id: str = Field(description="Node identifier, unique within the tree.")
    parent: str | None = Field(default=None, description="Parent id, None at the root.")
    time: int = Field(ge=0, description="Trading date of the node.")


class TreeSpec(BaseModel):
    """
    Example:
    {
        "nodes": [
            {"id": "0", "parent": null, "time": 0},
            {"id": "0.0", "parent": "0", "time": 1},
            {"id": "0.1", "parent": "0", "time": 1}
        ],
        "probabilities": {"0.0": 0.5, "0.1": 0.5}
    }
    """

    model_config = ConfigDict(
        populate_by_name=True,
        extra="ignore",
    )

    nodes: list[NodeSpec]
    probabilities: dict[str, float] | None = Field(
        default=None,
        description="Leaf id -> probability of the leaf.",
    )
    cond_probabilities: dict[str, float] | None = Field(
        default=None,
        description="Non-root node id -> probability of the node given its parent.",
    )

    @model_validator(mode="after")
    def validate_probability_source(self) -> "TreeSpec":
        if self.probabilities is None and self.cond_probabilities is None:
            raise ValueError("either probabilities or cond_probabilities is required")

        return self


class ScenarioTree(BaseModel):
    """Nodes are stored in breadth-first order, the root has index 0.

    `prob` is the unconditional probability of every node and `cond_prob`
    the probability of a node given its parent (1 at the root).
    """

    model_config = ConfigDict(frozen=True)

    node_ids: tuple[str, ...]
    parent: tuple[int, ...]
    time: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    leaves: tuple[int, ...]
    prob: tuple[float, ...]
    cond_prob: tuple[float, ...]

    @model_validator(mode="after")
    def validate_structure(self) -> "ScenarioTree":
        n_nodes = len(self.node_ids)

        if n_nodes == 0:
            raise ValueError("empty tree")
        if self.parent[0] != -1 or any(p == -1 for p in self.parent[1:]):
            raise ValueError("the root must be the unique node without parent")

        horizon = max(self.time)
        for i in range(n_nodes):
            for child in self.children[i]:
                if self.time[child] != self.time[i] + 1:
                    raise ValueError(f"time of node {self.node_ids[child]} is not parent time + 1")
            if not self.children[i] and self.time[i] != horizon:
                raise ValueError(f"leaf {self.node_ids[i]} is not at the terminal time {horizon}")

        leaf_prob = [self.prob[leaf] for leaf in self.leaves]
        if any(p <= 0.0 for p in leaf_prob):
            raise ValueError("leaf probabilities must be strictly positive")
        if abs(sum(leaf_prob) - 1.0) > PROBABILITY_SUM:
            raise ValueError(f"leaf probabilities sum to {sum(leaf_prob)!r}, not 1")

        for i in range(n_nodes):
            if self.children[i]:
                total = sum(self.cond_prob[c] for c in self.children[i])
                if abs(total - 1.0) > PROBABILITY_SUM:
                    raise ValueError(
                        f"conditional probabilities at {self.node_ids[i]} sum to {total!r}"
                    )

        return self

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def horizon(self) -> int:
        return max(self.time)

    @property
    def index(self) -> dict[str, int]:
        return {node_id: i for i, node_id in enumerate(self.node_ids)}

    @property
    def leaf_ids(self) -> tuple[str, ...]:
        return tuple(self.node_ids[leaf] for leaf in self.leaves)

    @property
    def leaf_prob(self) -> npt.NDArray[np.float64]:
        return np.array([self.prob[leaf] for leaf in self.leaves], dtype=float)

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def path(self, node: int) -> list[int]:
        "Root-to-node index path, both ends included."
        result = [node]
        while self.parent[result[-1]] != -1:
            result.append(self.parent[result[-1]])

        return result[::-1]

    def cond_prob_of(self, node_id: str) -> dict[str, float]:
        i = self.index[node_id]

        return {self.node_ids[c]: self.cond_prob[c] for c in self.children[i]}

    def ancestor_matrix(self) -> npt.NDArray[np.float64]:
        "N x N matrix with entry (n, m) = 1 iff m lies on the root-to-n path."
        matrix = np.zeros((self.n_nodes, self.n_nodes))
        for node in range(self.n_nodes):
            matrix[node, self.path(node)] = 1.0

        return matrix

    def path_matrix(self) -> npt.NDArray[np.float64]:
        "L x N matrix: rows of `ancestor_matrix` restricted to the leaves."
        return self.ancestor_matrix()[list(self.leaves), :]

    def chain_product(self, leaf: int) -> float:
        product = 1.0
        for node in self.path(leaf):
            product *= self.cond_prob[node]

        return product


def _order_nodes(spec: TreeSpec) -> tuple[list[NodeSpec], dict[str, list[str]]]:
    by_id: dict[str, NodeSpec] = {}
    for node in spec.nodes:
        if node.id in by_id:
            raise TreeError(f"duplicate node id {node.id!r}")
        by_id[node.id] = node

    roots = [node.id for node in spec.nodes if node.parent is None]
    if not roots:
        raise TreeError("cycle detected: no node without parent")
    if len(roots) > 1:
        raise TreeError(f"orphan node: several roots {roots}")

    children: dict[str, list[str]] = {node.id: [] for node in spec.nodes}
    for node in spec.nodes:
        if node.parent is None:
            continue
        if node.parent not in by_id:
            raise TreeError(f"orphan node {node.id!r}: unknown parent {node.parent!r}")
        children[node.parent].append(node.id)

    ordered: list[NodeSpec] = []
    queue = deque([roots[0]])
    while queue:
        node_id = queue.popleft()
        ordered.append(by_id[node_id])
        queue.extend(children[node_id])

    if len(ordered) != len(spec.nodes):
        unreachable = sorted(set(by_id) - {node.id for node in ordered})
        raise TreeError(f"cycle detected among nodes {unreachable}")

    return ordered, children


def _leaf_probabilities(
    spec: TreeSpec,
    ordered: list[NodeSpec],
    children: dict[str, list[str]],
) -> dict[str, float]:
    leaf_ids = [node.id for node in ordered if not children[node.id]]

    if spec.probabilities is not None:
        probabilities = spec.probabilities
        if set(probabilities) != set(leaf_ids):
            raise TreeError("probabilities must be given for exactly the leaves")
        if any(not p > 0.0 for p in probabilities.values()):
            raise TreeError("nonpositive probability")
        total = sum(probabilities[leaf] for leaf in leaf_ids)
        if abs(total - 1.0) > PROBABILITY_SUM:
            raise TreeError(f"probabilities sum to {total!r}, not 1")

        return {leaf: float(probabilities[leaf]) for leaf in leaf_ids}

    cond = spec.cond_probabilities or {}
    non_root = [node.id for node in ordered[1:]]
    if set(cond) != set(non_root):
        raise TreeError("cond_probabilities must be given for exactly the non-root nodes")
    if any(not p > 0.0 for p in cond.values()):
        raise TreeError("nonpositive probability")
    for node in ordered:
        if children[node.id]:
            total = sum(cond[c] for c in children[node.id])
            if abs(total - 1.0) > PROBABILITY_SUM:
                raise TreeError(f"conditional probabilities at {node.id!r} sum to {total!r}, not 1")

    parent_of = {node.id: node.parent for node in ordered}
    result: dict[str, float] = {}
    for leaf in leaf_ids:
        product = 1.0
        node_id: str | None = leaf
        while node_id is not None and parent_of[node_id] is not None:
            product *= cond[node_id]
            node_id = parent_of[node_id]
        result[leaf] = product

    return result


def build_tree(spec: TreeSpec) -> ScenarioTree:
    """Validate a tree description and derive both probability views.

    Leaf probabilities are the canonical form: node probabilities are sums
    over the subtree leaves and conditionals are ratios of node
    probabilities, so serialising and rebuilding reproduces the same floats.
    """

    ordered, children_by_id = _order_nodes(spec=spec)
    leaf_probabilities = _leaf_probabilities(
        spec=spec,
        ordered=ordered,
        children=children_by_id,
    )

    index = {node.id: i for i, node in enumerate(ordered)}
    parent = tuple(-1 if node.parent is None else index[node.parent] for node in ordered)
    children = tuple(tuple(index[c] for c in children_by_id[node.id]) for node in ordered)
    leaves = tuple(i for i, node in enumerate(ordered) if not children_by_id[node.id])

    if ordered[0].time != 0:
        raise TreeError("the root must have time 0")
    for node in ordered[1:]:
        if node.time != ordered[index[node.parent or ""]].time + 1:
            raise TreeError(f"node {node.id!r} has time {node.time}, expected parent time + 1")

    prob = [0.0] * len(ordered)
    for leaf in leaves:
        prob[leaf] = leaf_probabilities[ordered[leaf].id]
    for i in reversed(range(len(ordered))):
        if children[i]:
            prob[i] = sum(prob[c] for c in children[i])

    cond_prob = [1.0] + [prob[i] / prob[parent[i]] for i in range(1, len(ordered))]

    try:
        tree = ScenarioTree(
            node_ids=tuple(node.id for node in ordered),
            parent=parent,
            time=tuple(node.time for node in ordered),
            children=children,
            leaves=leaves,
            prob=tuple(prob),
            cond_prob=tuple(cond_prob),
        )
    except ValueError as e:
        raise TreeError(str(e)) from e

    for leaf in tree.leaves:
        if abs(tree.chain_product(leaf=leaf) - tree.prob[leaf]) > CHAIN_PRODUCT:
            raise TreeError(f"chain product mismatch at leaf {tree.node_ids[leaf]!r}")

    if spec.probabilities is not None and spec.cond_probabilities is not None:
        for node_id, value in spec.cond_probabilities.items():
            i = tree.index.get(node_id)
            if i is None or abs(tree.cond_prob[i] - value) > CHAIN_PRODUCT:
                raise TreeError(f"cond_probabilities inconsistent with leaf probabilities at {node_id!r}")

    return tree


def tree_to_spec(tree: ScenarioTree) -> TreeSpec:
    nodes = [
        NodeSpec(
            id=tree.node_ids[i],
            parent=None if tree.parent[i] == -1 else tree.node_ids[tree.parent[i]],
            time=tree.time[i],
        )
        for i in range(tree.n_nodes)
    ]

    return TreeSpec(
        nodes=nodes,
        probabilities={tree.node_ids[leaf]: tree.prob[leaf] for leaf in tree.leaves},
    )


if __name__ == "__main__":
    binomial = build_tree(
        spec=TreeSpec(
            nodes=[
                NodeSpec(id="0", time=0),
                NodeSpec(id="0.0", parent="0", time=1),
                NodeSpec(id="0.1", parent="0", time=1),
            ],
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )

    print("result:", binomial.cond_prob_of(node_id="0"))
