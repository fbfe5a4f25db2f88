"""Algebraic-multigrid aggregation of one class's proximity graph and the
two-class hierarchy construction loop.

One coarsening step picks a dominating seed set (driven by future volumes),
builds the sparse fine-to-coarse interpolation operator, and forms the coarse
graph by the triple product P^T W P. The two classes coarsen independently; a
class at or below the coarsest-size threshold is copied unchanged until both
classes fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .knn_graph import ProximityGraph

ROW_SUM_TOL = 1e-12
VOLUME_TOL = 1e-9


@dataclass
class CoarseningConfig:
    coarsest_size: int = 300    # per-class size threshold M
    eta: float = 2.0            # future-volume pre-seeding factor
    q_seed: float = 0.5         # coupling threshold for the seed sweep
    interp_order: int = 2       # max seed neighbors per non-seed row
    stall_fraction: float = 0.95
    normalized_points: bool = True

    def __post_init__(self):
        if self.coarsest_size < 1:
            raise ValueError("coarsest_size must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 <= self.q_seed < 1:
            raise ValueError("q_seed must lie in [0, 1)")
        if self.interp_order < 1:
            raise ValueError("interp_order must be >= 1")


@dataclass(eq=False)
class FutureVolumes:
    """Per-node growth estimates; values[i] >= volumes[i] always."""

    values: np.ndarray
    mean: float


@dataclass(eq=False)
class SeedPartition:
    """Disjoint split of nodes into seeds (future coarse points) and the rest.

    coarse_index[i] is the coarse column of seed i, -1 for non-seeds; seeds
    are numbered in ascending node order.
    """

    seeds: np.ndarray
    nonseeds: np.ndarray
    coarse_index: np.ndarray

    @classmethod
    def from_mask(cls, in_seed: np.ndarray) -> "SeedPartition":
        seeds = np.flatnonzero(in_seed)
        nonseeds = np.flatnonzero(~in_seed)
        coarse_index = np.full(in_seed.size, -1, dtype=np.int64)
        coarse_index[seeds] = np.arange(seeds.size)
        return cls(seeds, nonseeds, coarse_index)


@dataclass(eq=False)
class InterpolationOperator:
    """Sparse row-stochastic fine-to-coarse mapping.

    Seed rows carry a single 1 in their own column; every other row spreads
    its mass over at most ``interp_order`` seed neighbors. Column q's nonzero
    rows form aggregate q.
    """

    matrix: sp.csr_matrix
    seeds: np.ndarray  # fine node backing each coarse column

    def __post_init__(self):
        rows = np.asarray(self.matrix.sum(axis=1)).ravel()
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            raise ValueError("interpolation rows must sum to 1")
        self._csc = self.matrix.tocsc()

    @property
    def fine_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def coarse_count(self) -> int:
        return self.matrix.shape[1]

    def aggregate(self, q: int) -> np.ndarray:
        """Fine rows with nonzero weight into coarse point q."""
        return self._csc.indices[self._csc.indptr[q]:self._csc.indptr[q + 1]].copy()

    def aggregate_union(self, columns: np.ndarray) -> np.ndarray:
        """Sorted union of the aggregates of the given coarse columns."""
        columns = np.asarray(columns, dtype=np.int64)
        if columns.size == 0:
            return np.empty(0, dtype=np.int64)
        parts = [self.aggregate(int(q)) for q in columns]
        return np.unique(np.concatenate(parts))


def compute_future_volumes(graph: ProximityGraph, active: np.ndarray | None = None) -> FutureVolumes:
    """Estimate how much an aggregate seeded at each node could grow.

    A neighbor j donates its volume in proportion to the share of j's
    incident weight pointing at i. When ``active`` is given both the donor
    set and the share normalization are restricted to it (the recompute over
    F in the seed sweep); the reported mean is over the active set.
    """
    adj = graph.adjacency
    v = graph.volumes
    if active is None:
        active = np.ones(graph.node_count, dtype=bool)
    mask = active.astype(np.float64)
    denom = adj @ mask  # each donor's incident weight restricted to the active set
    share = np.zeros_like(v)
    nz = denom > 0
    share[nz] = v[nz] * mask[nz] / denom[nz]
    values = v + adj @ share
    evaluated = values[active]
    mean = float(evaluated.mean()) if evaluated.size else float(values.mean())
    return FutureVolumes(values, mean)


def select_seeds(graph: ProximityGraph, fv: FutureVolumes, eta: float = 2.0,
                 q_seed: float = 0.5) -> SeedPartition:
    """Pick a dominating seed set by future volume and weak coupling.

    Nodes with future volume above eta times the mean are pre-seeded; the
    rest are visited in descending recomputed future volume (ties to the
    lower index) and join the seeds whenever at most a q_seed fraction of
    their incident weight already points into the seed set.
    """
    n = graph.node_count
    adj = graph.adjacency
    in_seed = fv.values > eta * fv.mean
    remaining = ~in_seed
    recomputed = compute_future_volumes(graph, active=remaining)
    frontier = np.flatnonzero(remaining)
    order = np.lexsort((frontier, -recomputed.values[frontier]))
    total_w = np.asarray(adj.sum(axis=1)).ravel()
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    for i in frontier[order]:
        cols = indices[indptr[i]:indptr[i + 1]]
        wts = data[indptr[i]:indptr[i + 1]]
        ratio = 0.0 if total_w[i] <= 0 else float(wts[in_seed[cols]].sum()) / float(total_w[i])
        if ratio <= q_seed:
            in_seed[i] = True
    if not in_seed.any():
        raise AssertionError("seed selection produced an empty seed set")
    return SeedPartition.from_mask(in_seed)


def build_interpolation(graph: ProximityGraph, partition: SeedPartition,
                        order: int = 2) -> InterpolationOperator:
    """Assemble the row-stochastic interpolation matrix for one level.

    Non-seed rows keep their ``order`` heaviest seed neighbors (weight ties
    to the lower index) and normalize; a non-seed with no seed neighbor is
    promoted to the seed set rather than left unrepresented.
    """
    n = graph.node_count
    adj = graph.adjacency
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    in_seed = np.zeros(n, dtype=bool)
    in_seed[partition.seeds] = True

    while True:
        stranded = [i for i in np.flatnonzero(~in_seed)
                    if not in_seed[indices[indptr[i]:indptr[i + 1]]].any()]
        if not stranded:
            break
        in_seed[stranded] = True
    partition = SeedPartition.from_mask(in_seed)

    rows, cols, vals = [], [], []
    rows.extend(partition.seeds.tolist())
    cols.extend(partition.coarse_index[partition.seeds].tolist())
    vals.extend([1.0] * partition.seeds.size)
    for i in partition.nonseeds:
        nbr = indices[indptr[i]:indptr[i + 1]]
        wts = data[indptr[i]:indptr[i + 1]]
        keep = in_seed[nbr]
        nbr, wts = nbr[keep], wts[keep]
        if nbr.size > order:
            pick = np.lexsort((nbr, -wts))[:order]
            nbr, wts = nbr[pick], wts[pick]
        share = wts / wts.sum()
        rows.extend([int(i)] * nbr.size)
        cols.extend(partition.coarse_index[nbr].tolist())
        vals.extend(share.tolist())
    matrix = sp.coo_matrix((vals, (rows, cols)),
                           shape=(n, partition.seeds.size)).tocsr()
    return InterpolationOperator(matrix, partition.seeds.copy())


def coarsen_graph(graph: ProximityGraph, interp: InterpolationOperator) -> ProximityGraph:
    """Form the coarse graph P^T W P with diagonal contributions discarded.

    Coarse volumes are P^T v, which conserves total volume because rows of P
    sum to one.
    """
    coarse = (interp.matrix.T @ graph.adjacency @ interp.matrix).tocsr()
    coarse.setdiag(0.0)
    coarse.eliminate_zeros()
    coarse_volumes = interp.matrix.T @ graph.volumes
    return ProximityGraph(interp.coarse_count, coarse, coarse_volumes)


def coarsen_points(points: np.ndarray, volumes: np.ndarray,
                   interp: InterpolationOperator,
                   normalized: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate points through P; total volume is conserved.

    The default coarse point is the volume-weighted mean of its aggregate
    (dividing by the coarse volume keeps aggregates inside the data's convex
    hull); ``normalized=False`` gives the plain unnormalized P^T x form.
    """
    P = interp.matrix
    coarse_volumes = P.T @ volumes
    if normalized:
        weighted = P.T @ (points * volumes[:, None])
        coarse_points = weighted / coarse_volumes[:, None]
    else:
        coarse_points = P.T @ points
    total_f, total_c = float(volumes.sum()), float(coarse_volumes.sum())
    if abs(total_c - total_f) > VOLUME_TOL * total_f:
        raise AssertionError("volume conservation violated in coarsening")
    return np.ascontiguousarray(coarse_points), coarse_volumes


@dataclass(eq=False)
class ClassLevel:
    """One class's data at one level of the hierarchy.

    ``interp`` maps the next finer level's rows onto this level's points
    (identity when the class was copied); None at the finest level.
    """

    points: np.ndarray
    graph: ProximityGraph
    interp: InterpolationOperator | None = None
    copied: bool = False

    @property
    def volumes(self) -> np.ndarray:
        return self.graph.volumes

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(eq=False)
class HierarchyLevel:
    pos: ClassLevel
    neg: ClassLevel

    def total_size(self) -> int:
        return self.pos.size + self.neg.size


@dataclass(eq=False)
class LevelHierarchy:
    """Per-class level chain; index 0 is the finest level."""

    levels: list[HierarchyLevel] = field(default_factory=list)

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def coarsest(self) -> HierarchyLevel:
        return self.levels[-1]

    def spec_level(self, index: int) -> int:
        """1-based level number (1 = finest) for a list index."""
        return index + 1


def _identity_copy(level: ClassLevel) -> ClassLevel:
    eye = sp.identity(level.size, format="csr")
    interp = InterpolationOperator(eye, np.arange(level.size, dtype=np.int64))
    return ClassLevel(level.points, level.graph, interp, copied=True)


def coarsen_class(level: ClassLevel, cfg: CoarseningConfig) -> ClassLevel | None:
    """One aggregation step for one class; None when the step stalls.

    A stall (seed set keeping more than ``stall_fraction`` of the nodes)
    means further coarsening cannot meaningfully shrink the class; the caller
    accepts the current level as that class's coarsest.
    """
    fv = compute_future_volumes(level.graph)
    partition = select_seeds(level.graph, fv, cfg.eta, cfg.q_seed)
    if partition.seeds.size > cfg.stall_fraction * level.size:
        return None
    interp = build_interpolation(level.graph, partition, cfg.interp_order)
    coarse_graph = coarsen_graph(level.graph, interp)
    coarse_points, _ = coarsen_points(level.points, level.volumes, interp,
                                      cfg.normalized_points)
    return ClassLevel(coarse_points, coarse_graph, interp)


def build_hierarchy(pos_points: np.ndarray, pos_graph: ProximityGraph,
                    neg_points: np.ndarray, neg_graph: ProximityGraph,
                    cfg: CoarseningConfig | None = None) -> LevelHierarchy:
    """Coarsen both classes independently until each fits the size threshold.

    A class at or below the threshold is copied unchanged while the other
    keeps shrinking, so the coarsest level is balanced (total at most twice
    the per-class threshold, stalls aside).
    """
    cfg = cfg or CoarseningConfig()
    m = cfg.coarsest_size
    hierarchy = LevelHierarchy([HierarchyLevel(ClassLevel(pos_points, pos_graph),
                                               ClassLevel(neg_points, neg_graph))])
    stalled = {"pos": False, "neg": False}

    def needs_work(side: str, level: ClassLevel) -> bool:
        return level.size > m and not stalled[side]

    current = hierarchy.levels[0]
    while needs_work("pos", current.pos) or needs_work("neg", current.neg):
        nxt = {}
        for side, level in (("pos", current.pos), ("neg", current.neg)):
            if not needs_work(side, level):
                nxt[side] = _identity_copy(level)
                continue
            coarser = coarsen_class(level, cfg)
            if coarser is None:
                stalled[side] = True
                nxt[side] = _identity_copy(level)
            else:
                nxt[side] = coarser
        current = HierarchyLevel(nxt["pos"], nxt["neg"])
        hierarchy.levels.append(current)
    return hierarchy


def hierarchy_trace(hierarchy: LevelHierarchy) -> list[dict]:
    """Per-level sizes, coarse-point counts and volume totals (debug dump)."""
    rows = []
    for idx, level in enumerate(hierarchy.levels):
        rows.append({
            "level": hierarchy.spec_level(idx),
            "pos_size": level.pos.size,
            "neg_size": level.neg.size,
            "pos_volume": float(level.pos.volumes.sum()),
            "neg_volume": float(level.neg.volumes.sum()),
            "pos_copied": level.pos.copied,
            "neg_copied": level.neg.copied,
        })
    return rows
