"""Research-area label propagation over the field-of-study hierarchy."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError

MAX_LEVEL = 5


@dataclass(frozen=True)
class FosNode:
    fos_id: str
    name: str = ""
    level: int = 0
    parents: tuple = ()


def build_dag(fields_of_study: Iterable, children: Iterable, stats: Optional[Counter] = None) -> dict:
    """Assemble and validate nodes from FOS rows and (parent, child) edges.

    ``fields_of_study`` yields ``(fos_id, name, level)`` tuples or dicts with
    those keys; ``children`` yields ``(parent_id, child_id)`` pairs or dicts.
    Duplicate edges are dropped and counted; edges naming an unknown FOS are
    dropped and counted as ``dangling_edges``. Level inversions raise.
    """
    stats = stats if stats is not None else Counter()
    levels, names = {}, {}
    for row in fields_of_study:
        if isinstance(row, dict):
            fos_id, name, level = row["fos_id"], row.get("name", ""), row["level"]
        else:
            fos_id, name, level = row
        fos_id = str(fos_id).strip()
        try:
            level = int(level)
        except (TypeError, ValueError):
            raise ValidationError(f"FOS {fos_id}: level {level!r} is not an integer") from None
        if not 0 <= level <= MAX_LEVEL:
            raise ValidationError(f"FOS {fos_id}: level {level} outside [0, {MAX_LEVEL}]")
        if fos_id in levels:
            raise ValidationError(f"duplicate FOS id {fos_id}")
        levels[fos_id], names[fos_id] = level, str(name).strip()

    parents = defaultdict(set)
    for row in children:
        if isinstance(row, dict):
            parent, child = row["parent_id"], row["child_id"]
        else:
            parent, child = row
        parent, child = str(parent).strip(), str(child).strip()
        if parent not in levels or child not in levels:
            stats["dangling_edges"] += 1
            continue
        if parent in parents[child]:
            stats["duplicate_edges"] += 1
            continue
        parents[child].add(parent)

    nodes = {}
    for fos_id, level in levels.items():
        ps = tuple(sorted(parents.get(fos_id, ())))
        nodes[fos_id] = FosNode(fos_id, names[fos_id], level, ps)
    validate_dag(nodes)
    return nodes


def validate_dag(nodes: dict) -> None:
    """Raise :class:`ValidationError` on roots with parents or parent levels not below the child's.

    Strictly increasing levels along every edge also rule out cycles.
    """
    for node in nodes.values():
        if node.level == 0 and node.parents:
            raise ValidationError(f"level-0 FOS {node.fos_id} has parents {list(node.parents)}")
        for p in node.parents:
            if p not in nodes:
                raise ValidationError(f"FOS {node.fos_id} has unknown parent {p}")
            if nodes[p].level >= node.level:
                raise ValidationError(
                    f"level inversion: parent {p} (level {nodes[p].level}) of "
                    f"{node.fos_id} (level {node.level})"
                )


def _normalized(raw: dict) -> dict:
    total = sum(raw[k] for k in sorted(raw))
    if total <= 0:
        return {}
    return {k: raw[k] / total for k in sorted(raw)}


def propagate_labels(nodes: dict, stats: Optional[Counter] = None) -> dict:
    """Research-area score map per FOS.

    Roots score 1.0 on themselves. Every other node sums its parents' score
    maps and rescales the sum to 1; with root parents this is the share of
    each area in the inherited tag list. Nodes without a labelled ancestor
    get an empty map. Nodes are processed level by level.
    """
    stats = stats if stats is not None else Counter()
    labels = {}
    by_level = defaultdict(list)
    for node in nodes.values():
        by_level[node.level].append(node)
    for level in sorted(by_level):
        for node in sorted(by_level[level], key=lambda n: n.fos_id):
            if level == 0:
                labels[node.fos_id] = {node.fos_id: 1.0}
                continue
            raw = defaultdict(float)
            for p in sorted(set(node.parents)):  # fixed order keeps float sums reproducible
                for area, score in labels[p].items():
                    raw[area] += score
            labels[node.fos_id] = _normalized(raw)
            if not labels[node.fos_id]:
                stats["unlabeled"] += 1
    return labels


def score_papers(paper_fos_links: Iterable, labels: dict, *, on_reject=None,
                 stats: Optional[Counter] = None) -> dict:
    """Research-area scores per paper from its linked FOS labels.

    Sums the labels of each paper's (distinct) FOS by area and divides by the
    grand total. Links to unknown FOS are passed to ``on_reject``. Papers
    whose FOS are all unlabelled get an empty map.
    """
    stats = stats if stats is not None else Counter()
    linked = defaultdict(set)
    for row in paper_fos_links:
        if isinstance(row, dict):
            paper_id, fos_id = row["paper_id"], row["fos_id"]
        else:
            paper_id, fos_id = row[0], row[1]
        paper_id, fos_id = str(paper_id).strip(), str(fos_id).strip()
        stats["links_in"] += 1
        if fos_id not in labels:
            stats["links_rejected"] += 1
            if on_reject is not None:
                on_reject((paper_id, fos_id))
            continue
        if fos_id in linked[paper_id]:
            stats["duplicate_links"] += 1
        linked[paper_id].add(fos_id)

    scores = {}
    for paper_id in sorted(linked):
        raw = defaultdict(float)
        for fos_id in sorted(linked[paper_id]):
            for area, score in labels[fos_id].items():
                raw[area] += score
        scores[paper_id] = _normalized(raw)
        if not scores[paper_id]:
            stats["unlabeled_papers"] += 1
    return scores


class FosLabelPropagator(TransformerMixin, BaseEstimator):
    """Fit on the FOS hierarchy; transform paper-FOS links into paper area scores.

    ``fit(X)`` takes a dict of :class:`FosNode` (or an iterable of them);
    after fitting ``labels_`` maps every FOS id to its area scores.
    """

    def fit(self, X, y=None):
        nodes = X if isinstance(X, dict) else {n.fos_id: n for n in X}
        validate_dag(nodes)
        self.stats_ = Counter()
        self.labels_ = propagate_labels(nodes, self.stats_)
        self.areas_ = sorted(fid for fid, n in nodes.items() if n.level == 0)
        return self

    def transform(self, X):
        check_is_fitted(self, "labels_")
        return score_papers(X, self.labels_, stats=self.stats_)
