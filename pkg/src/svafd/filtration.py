"""Quality-aware knowledge filtration.

Each client fingerprints its local knowledge with a class-average-logits
matrix, projects it through a shared random-projection hash, scores cosine
intimacy against every peer, and leads a group of its top-R most intimate
followers. The union of group cliques forms the round's communication
topology.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmptyDataset(ValueError):
    """No samples to average."""


class RTooLarge(ValueError):
    """Requested more followers than there are candidates."""


@dataclass(frozen=True)
class CalMatrix:
    """Per-class mean logits (row d = mean over samples labeled d+1) plus
    the per-class sample counts; zero-count rows are zeroed and flagged."""

    per_class_mean_logits: np.ndarray
    class_counts: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return self.class_counts > 0


@dataclass(frozen=True)
class LshConfig:
    projection_seed: int
    p: int = 16


@dataclass(frozen=True)
class HashedCal:
    """Random projection of a CAL matrix, shape (d, p), carrying the
    class-presence flags so degenerate rows stay out of similarities."""

    matrix: np.ndarray
    present: np.ndarray


def compute_cal(dataset_logits) -> CalMatrix:
    """Average logits rows per class label; labels are 1-based in [1, d].

    d is taken from the logits row width. Classes with no local samples get
    an all-zero row and a zero count.
    """
    items = list(dataset_logits)
    if not items:
        raise EmptyDataset("cannot average an empty sample set")
    d = len(np.asarray(items[0][1]))
    sums = np.zeros((d, d))
    counts = np.zeros(d, dtype=np.int64)
    for label, row in items:
        if not 1 <= label <= d:
            raise ValueError(f"label {label} outside [1, {d}]")
        sums[label - 1] += np.asarray(row, dtype=float)
        counts[label - 1] += 1
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    return CalMatrix(per_class_mean_logits=means, class_counts=counts)


def projection_matrix(d: int, cfg: LshConfig) -> np.ndarray:
    """The shared d x p standard-normal projection, deterministic in the seed."""
    rng = np.random.default_rng(cfg.projection_seed)
    return rng.standard_normal((d, cfg.p))


def lsh_project(cal: CalMatrix, cfg: LshConfig) -> HashedCal:
    """Project the CAL through the shared random matrix: output = CAL @ M."""
    if cfg.p < 1:
        raise ValueError("projection width must be >= 1")
    d = cal.per_class_mean_logits.shape[0]
    m = projection_matrix(d, cfg)
    return HashedCal(matrix=cal.per_class_mean_logits @ m, present=cal.present.copy())


def intimacy(h1, h2) -> float:
    """Cosine similarity of two hashed fingerprints, flattened.

    Rows flagged absent on either side are masked out of both operands.
    Defined as 0 when either masked operand is all-zero, so degenerate
    fingerprints stay in the scoring without poisoning the ranking.
    """
    if isinstance(h1, HashedCal) and isinstance(h2, HashedCal):
        mask = h1.present & h2.present
        a = h1.matrix[mask].ravel()
        b = h2.matrix[mask].ravel()
    else:
        a = np.asarray(h1, dtype=float).ravel()
        b = np.asarray(h2, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("hashed values have different shapes")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class IntimacyList:
    """One client's cosine scores against every client id (its own slot is
    present but never selectable)."""

    owner: int
    scores: np.ndarray


def intimacy_list(owner: int, hashed: dict[int, HashedCal]) -> IntimacyList:
    n = max(hashed) + 1
    scores = np.zeros(n)
    own = hashed[owner]
    for cid, h in hashed.items():
        scores[cid] = 1.0 if cid == owner else intimacy(own, h)
    return IntimacyList(owner=owner, scores=scores)


def select_group(ilist: IntimacyList, r: int) -> list[int]:
    """Ids of the r highest-scoring candidates, owner excluded; ties broken
    by ascending client id. Output is in descending-score order."""
    n = len(ilist.scores)
    if r > n - 1:
        raise RTooLarge(f"r={r} but only {n - 1} candidates")
    candidates = [i for i in range(n) if i != ilist.owner]
    candidates.sort(key=lambda i: (-ilist.scores[i], i))
    return candidates[:r]


@dataclass(frozen=True)
class Topology:
    """Round communication graph: every group (leader plus members) forms a
    clique; a client leads exactly one group but may follow many."""

    nodes: frozenset
    edges: frozenset
    groups: dict = field(default_factory=dict)


def build_topology(groups: dict[int, list[int]]) -> Topology:
    """Union of co-membership cliques over leader-and-members sets."""
    nodes = set(groups)
    edges = set()
    for leader, members in groups.items():
        if leader in members:
            raise ValueError(f"leader {leader} appears in its own member list")
        nodes.update(members)
        clique = [leader] + list(members)
        for i, a in enumerate(clique):
            for b in clique[i + 1:]:
                edges.add((min(a, b), max(a, b)))
    return Topology(nodes=frozenset(nodes), edges=frozenset(edges), groups=dict(groups))
