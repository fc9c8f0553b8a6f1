"""Local surrogate: a small CART classifier over the flat feature matrix.

Greedy binary splits maximize gini impurity decrease. Thresholds are
midpoints between consecutive distinct sorted values; ties in decrease
break toward the lower column index, then the lower threshold, so a fit
is fully deterministic. Rows with value equal to a threshold route left
(<= is inclusive).
"""

from dataclasses import dataclass, field

import numpy as np

from procf._kernels import best_split
from procf.encoding import COUNT, Column, FeatureMatrix
from procf.errors import ProcfError

# tolerance for accepting zero-gain splits that float roundoff drags
# a hair below zero; decreases are clamped back to >= 0 when stored
_DECREASE_EPS = 1e-12


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_samples_leaf: int = 5
    min_impurity_decrease: float = 0.0


@dataclass(frozen=True)
class Leaf:
    label: str
    support: int
    histogram: dict = field(compare=False)


@dataclass(frozen=True)
class Split:
    column: int
    threshold: float
    left: object
    right: object
    n: int
    decrease: float      # gini decrease local to this node


@dataclass(frozen=True)
class SurrogateTree:
    root: object
    columns: tuple
    classes: tuple
    config: TreeConfig = TreeConfig()

    def leaves(self):
        out = []

        def walk(node):
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    return 1.0 - float(np.sum(counts * counts)) / float(n * n)


def _majority(counts: np.ndarray, classes) -> str:
    best = int(np.argmax(counts))  # argmax keeps the first = lexicographically
    return classes[best]           # smallest label since classes are sorted


def fit_tree(matrix: FeatureMatrix, labels, config: TreeConfig = TreeConfig()) -> SurrogateTree:
    """Greedy CART fit of black-box labels on the flat matrix."""
    if matrix.n_rows < 2:
        raise ProcfError(f"need at least 2 training rows, got {matrix.n_rows}")
    if len(labels) != matrix.n_rows:
        raise ProcfError("label count does not match row count")

    classes = tuple(sorted(set(labels)))
    class_index = {label: i for i, label in enumerate(classes)}
    y = np.array([class_index[label] for label in labels], dtype=np.int64)
    data = matrix.data
    n_classes = len(classes)

    def counts_of(idx) -> np.ndarray:
        return np.bincount(y[idx], minlength=n_classes).astype(np.int64)

    def grow(idx: np.ndarray, depth: int):
        counts = counts_of(idx)
        n = idx.shape[0]

        def leaf():
            return Leaf(
                label=_majority(counts, classes),
                support=int(n),
                histogram={classes[i]: int(counts[i]) for i in range(n_classes) if counts[i]},
            )

        if depth >= config.max_depth or n < 2 * config.min_samples_leaf:
            return leaf()
        if int((counts > 0).sum()) <= 1:
            return leaf()

        best_col, best_thr, best_dec = -1, 0.0, -1.0
        for col in range(data.shape[1]):
            values = data[idx, col]
            order = np.argsort(values, kind="stable")
            pos, dec = best_split(values[order], y[idx][order],
                                  n_classes, config.min_samples_leaf)
            if pos < 0:
                continue
            if best_col < 0 or dec > best_dec:
                sorted_vals = values[order]
                best_col, best_dec = col, dec
                best_thr = (sorted_vals[pos] + sorted_vals[pos + 1]) / 2.0

        if best_col < 0 or best_dec < config.min_impurity_decrease - _DECREASE_EPS:
            return leaf()

        mask = data[idx, best_col] <= best_thr
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        return Split(
            column=int(best_col),
            threshold=float(best_thr),
            left=left,
            right=right,
            n=int(n),
            decrease=max(float(best_dec), 0.0),
        )

    root = grow(np.arange(matrix.n_rows), 0)
    return SurrogateTree(root=root, columns=matrix.columns, classes=classes, config=config)


def route(tree: SurrogateTree, row: np.ndarray) -> Leaf:
    node = tree.root
    while isinstance(node, Split):
        node = node.left if row[node.column] <= node.threshold else node.right
    return node


def tree_predict(tree: SurrogateTree, matrix: FeatureMatrix):
    """Root-to-leaf routing per row; numeric condition true means go left."""
    return [route(tree, row).label for row in matrix.data]


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    test_size: int
    per_class: dict = field(compare=False)  # label -> (agreements, total)

    def to_json(self) -> dict:
        value = self.fidelity if self.fidelity == self.fidelity else None  # NaN -> null
        return {
            "fidelity": value,
            "test_size": self.test_size,
            "per_class": {label: {"agree": a, "total": t}
                          for label, (a, t) in sorted(self.per_class.items())},
        }


def fidelity(tree: SurrogateTree, b_labels, test: FeatureMatrix) -> FidelityReport:
    """Agreement rate between the tree and the black-box labels."""
    if test.n_rows == 0:
        raise ProcfError("fidelity needs a nonempty test set")
    if len(b_labels) != test.n_rows:
        raise ProcfError("label count does not match test rows")
    predictions = tree_predict(tree, test)
    per_class = {}
    agree = 0
    for predicted, actual in zip(predictions, b_labels):
        hits, total = per_class.get(actual, (0, 0))
        match = predicted == actual
        per_class[actual] = (hits + (1 if match else 0), total + 1)
        agree += 1 if match else 0
    return FidelityReport(
        fidelity=agree / test.n_rows,
        test_size=test.n_rows,
        per_class=per_class,
    )


def importance(tree: SurrogateTree) -> dict:
    """Impurity-decrease importance re-aggregated to source attributes.

    One-hot columns of one attribute merge into that attribute; all count
    columns merge into the bundled ``control_flow`` pseudo-attribute.
    Values are normalized to sum to 1 when any split exists.
    """
    total_n = tree.root.n if isinstance(tree.root, Split) else 0
    per_attr = {}
    for col in tree.columns:
        per_attr.setdefault("control_flow" if col.kind == COUNT else col.name, 0.0)

    def walk(node):
        if isinstance(node, Leaf):
            return
        col = tree.columns[node.column]
        attr = "control_flow" if col.kind == COUNT else col.name
        per_attr[attr] += (node.n / total_n) * node.decrease
        walk(node.left)
        walk(node.right)

    if total_n:
        walk(tree.root)
    total = sum(per_attr.values())
    if total > 0:
        per_attr = {name: value / total for name, value in per_attr.items()}
    return per_attr


# ---------------------------------------------------------------------------
# JSON form (artifacts, hand-built fixtures)
# ---------------------------------------------------------------------------

def tree_to_json(tree: SurrogateTree) -> dict:
    def node_doc(node):
        if isinstance(node, Leaf):
            return {"kind": "leaf", "label": node.label, "support": node.support,
                    "histogram": dict(sorted(node.histogram.items()))}
        return {
            "kind": "split",
            "column": node.column,
            "column_name": tree.columns[node.column].display,
            "threshold": node.threshold,
            "n": node.n,
            "decrease": node.decrease,
            "left": node_doc(node.left),
            "right": node_doc(node.right),
        }

    return {
        "classes": list(tree.classes),
        "columns": [
            {"kind": c.kind, "name": c.name, "level": c.level, "lo": c.lo, "hi": c.hi}
            for c in tree.columns
        ],
        "config": {
            "max_depth": tree.config.max_depth,
            "min_samples_leaf": tree.config.min_samples_leaf,
            "min_impurity_decrease": tree.config.min_impurity_decrease,
        },
        "root": node_doc(tree.root),
    }


def tree_from_json(doc: dict) -> SurrogateTree:
    columns = tuple(
        Column(kind=c["kind"], name=c["name"], level=c.get("level"),
               lo=c.get("lo", 0.0), hi=c.get("hi", 1.0))
        for c in doc["columns"]
    )

    def parse(node_doc):
        if node_doc["kind"] == "leaf":
            return Leaf(label=node_doc["label"], support=node_doc["support"],
                        histogram=dict(node_doc.get("histogram", {})))
        return Split(
            column=node_doc["column"],
            threshold=node_doc["threshold"],
            left=parse(node_doc["left"]),
            right=parse(node_doc["right"]),
            n=node_doc.get("n", 0),
            decrease=node_doc.get("decrease", 0.0),
        )

    cfg_doc = doc.get("config", {})
    return SurrogateTree(
        root=parse(doc["root"]),
        columns=columns,
        classes=tuple(doc["classes"]),
        config=TreeConfig(
            max_depth=cfg_doc.get("max_depth", 8),
            min_samples_leaf=cfg_doc.get("min_samples_leaf", 5),
            min_impurity_decrease=cfg_doc.get("min_impurity_decrease", 0.0),
        ),
    )
