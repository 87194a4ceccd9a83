# app/analysis/persistence.py
"""
Vietoris-Rips filtrations and degree-1 persistent homology over Z/2.

Two reductions live here:
  * `reduce_standard` - the textbook left-to-right column reduction of the
    full boundary matrix (degrees 0 and 1). Slow; kept as the reference.
  * `reduce_h1` - reduction of the anti-transposed (coboundary) matrix for
    edges only, with H0 clearing via Kruskal. Same diagram, far fewer
    column operations.
Simplices enter at the maximum pairwise distance of their vertices (the
closed "<=" convention). Ties are broken by dimension, then by the
lexicographic vertex tuple.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from app.analysis.embedding import PointCloud
from app.core.errors import DomainError, InsufficientDataError

logger = logging.getLogger(__name__)

Simplex = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """
    Off-diagonal (birth, death) pairs of one homology degree, sorted by
    birth then death. `n_essential` counts classes still alive at the
    largest scale of the filtration; they are given death = max_scale.
    """

    degree: int
    pairs: np.ndarray
    n_essential: int = 0

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        if len(pairs) and not np.all(pairs[:, 1] > pairs[:, 0]):
            raise DomainError("persistence pairs must satisfy death > birth")
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def births(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.pairs[:, 1]

    @property
    def persistence(self) -> np.ndarray:
        return self.pairs[:, 1] - self.pairs[:, 0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.pairs)))

    def same_as(self, other: "PersistenceDiagram") -> bool:
        """Exact multiset equality."""
        return self.degree == other.degree and np.array_equal(self.pairs, other.pairs)

    def to_text(self) -> str:
        return "".join(f"{float(b)!r}\t{float(d)!r}\n" for b, d in self.pairs)

    @classmethod
    def empty(cls, degree: int = 1) -> "PersistenceDiagram":
        return cls(degree=degree, pairs=np.empty((0, 2)))


@dataclass(frozen=True, eq=False)
class FiltrationComplex:
    """
    Rips 2-skeleton. Edges and triangles are stored as sorted vertex index
    arrays, each block already in filtration order.
    """

    n_vertices: int
    edges: np.ndarray
    edge_values: np.ndarray
    triangles: np.ndarray
    triangle_values: np.ndarray
    max_scale: float

    @property
    def size(self) -> int:
        return self.n_vertices + len(self.edges) + len(self.triangles)

    def simplices(self, max_dim: int = 2) -> List[Tuple[Simplex, float]]:
        """All simplices up to `max_dim` in the total filtration order."""
        items: List[Tuple[float, int, Simplex]] = [(0.0, 0, (v,)) for v in range(self.n_vertices)]
        if max_dim >= 1:
            items += [(float(x), 1, tuple(int(i) for i in e)) for e, x in zip(self.edges, self.edge_values)]
        if max_dim >= 2:
            items += [(float(x), 2, tuple(int(i) for i in t)) for t, x in zip(self.triangles, self.triangle_values)]
        items.sort()
        return [(simplex, value) for value, _, simplex in items]


# === Construction ===

def pairwise_distances(cloud: Union[PointCloud, np.ndarray, Iterable]) -> np.ndarray:
    points = cloud.points if isinstance(cloud, PointCloud) else cloud
    try:
        X = np.asarray(points, dtype=float)
    except ValueError as e:
        raise DomainError(f"points have mismatched dimensions: {e}")
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DomainError("points have mismatched dimensions")
    if len(X) < 2:
        raise InsufficientDataError(f"need at least 2 points, got {len(X)}")
    return squareform(pdist(X, metric="euclidean"))


@lru_cache(maxsize=8)
def _all_triangles(n: int) -> np.ndarray:
    if n < 3:
        return np.empty((0, 3), dtype=np.int64)
    return np.array(list(combinations(range(n), 3)), dtype=np.int64)


def build_rips(distances: np.ndarray, max_scale: float) -> FiltrationComplex:
    D = np.asarray(distances, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DomainError("distance matrix must be square")
    if not max_scale > 0:
        raise DomainError(f"max_scale must be positive, got {max_scale}")
    n = D.shape[0]

    i, j = np.triu_indices(n, k=1)
    edge_values = D[i, j]
    keep = edge_values <= max_scale
    i, j, edge_values = i[keep], j[keep], edge_values[keep]
    order = np.lexsort((j, i, edge_values))
    edges = np.column_stack([i[order], j[order]]).astype(np.int64)
    edge_values = edge_values[order]

    tri = _all_triangles(n)
    if len(tri):
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        tri_values = np.maximum(np.maximum(D[a, b], D[a, c]), D[b, c])
        keep = tri_values <= max_scale
        tri, tri_values = tri[keep], tri_values[keep]
        order = np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0], tri_values))
        tri, tri_values = tri[order], tri_values[order]
    else:
        tri_values = np.empty(0)

    complex_ = FiltrationComplex(
        n_vertices=n,
        edges=edges,
        edge_values=edge_values,
        triangles=tri,
        triangle_values=tri_values,
        max_scale=float(max_scale),
    )
    logger.debug(f"Rips complex: {n} vertices, {len(edges)} edges, {len(tri)} triangles")
    return complex_


# === Reductions ===

def _diagram(degree: int, raw_pairs: List[Tuple[float, float]], n_essential: int) -> PersistenceDiagram:
    kept = [(b, d) for b, d in raw_pairs if d > b]
    return PersistenceDiagram(degree=degree, pairs=np.array(kept, dtype=float).reshape(-1, 2), n_essential=n_essential)


def reduce_standard(complex_: FiltrationComplex, degree: int = 1) -> PersistenceDiagram:
    """
    Naive reduction: every column of the boundary matrix, left to right,
    adding earlier columns until its lowest entry is unique.
    Unpaired degree-0 classes die at +inf, unpaired degree-1 classes at max_scale.
    """
    if degree not in (0, 1):
        raise DomainError(f"only degrees 0 and 1 are supported, got {degree}")
    simplices = complex_.simplices(max_dim=degree + 1)
    index: Dict[Simplex, int] = {s: k for k, (s, _) in enumerate(simplices)}
    reduced: List[Set[int]] = []
    owner: Dict[int, int] = {}

    for j, (simplex, _) in enumerate(simplices):
        col: Set[int] = set()
        if len(simplex) > 1:
            col = {index[face] for face in combinations(simplex, len(simplex) - 1)}
        while col:
            low = max(col)
            k = owner.get(low)
            if k is None:
                break
            col ^= reduced[k]
        if col:
            owner[max(col)] = j
        reduced.append(col)

    raw: List[Tuple[float, float]] = []
    n_essential = 0
    essential_death = np.inf if degree == 0 else complex_.max_scale
    for k, (simplex, value) in enumerate(simplices):
        if len(simplex) != degree + 1 or reduced[k]:
            continue
        if k in owner:
            raw.append((value, simplices[owner[k]][1]))
        else:
            n_essential += 1
            raw.append((value, essential_death))
    return _diagram(degree, raw, n_essential)


def _negative_edges(complex_: FiltrationComplex) -> np.ndarray:
    """Edges that merge two components (the H0 deaths), found by Kruskal."""
    parent = list(range(complex_.n_vertices))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    negative = np.zeros(len(complex_.edges), dtype=bool)
    for e, (a, b) in enumerate(complex_.edges.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            negative[e] = True
    return negative


def reduce_h1(complex_: FiltrationComplex, method: str = "cohomology") -> PersistenceDiagram:
    """
    Degree-1 diagram. Edges are processed in reverse filtration order; the
    pivot of an edge column is its earliest coface triangle.
    """
    if method == "standard":
        return reduce_standard(complex_, degree=1)
    if method != "cohomology":
        raise DomainError(f"unknown reduction method '{method}'")

    n = complex_.n_vertices
    tri = complex_.triangles
    rank = np.full((n, n, n), -1, dtype=np.int64)
    order = np.arange(len(tri))
    for p in permutations(range(3)):
        rank[tri[:, p[0]], tri[:, p[1]], tri[:, p[2]]] = order

    negative = _negative_edges(complex_)
    edge_values = complex_.edge_values
    tri_values = complex_.triangle_values
    pivots: Dict[int, Set[int]] = {}
    raw: List[Tuple[float, float]] = []
    n_essential = 0

    for e in range(len(complex_.edges) - 1, -1, -1):
        if negative[e]:
            continue
        a, b = complex_.edges[e]
        cofaces = rank[a, b]
        col = set(cofaces[cofaces >= 0].tolist())
        while col:
            other = pivots.get(min(col))
            if other is None:
                break
            col ^= other
        birth = float(edge_values[e])
        if col:
            low = min(col)
            pivots[low] = col
            raw.append((birth, float(tri_values[low])))
        else:
            n_essential += 1
            raw.append((birth, complex_.max_scale))

    if n_essential:
        logger.warning(f"{n_essential} H1 classes unpaired at max_scale={complex_.max_scale}; death set to max_scale")
    return _diagram(1, raw, n_essential)


def diagram_for_cloud(cloud: Union[PointCloud, np.ndarray], max_scale: Optional[float] = None, method: str = "cohomology") -> PersistenceDiagram:
    """
    distances -> Rips complex up to the cloud diameter -> H1 diagram.
    At the diameter every triangle is present, so no class survives.
    """
    D = pairwise_distances(cloud)
    if len(D) < 3:
        raise InsufficientDataError(f"need at least 3 points for H1, got {len(D)}")
    diameter = float(D.max())
    if diameter == 0.0:
        return PersistenceDiagram.empty(degree=1)
    return reduce_h1(build_rips(D, max_scale or diameter), method=method)
