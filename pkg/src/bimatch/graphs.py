"""Euclidean combinatorial optimization over bipartite graph families.

A family selects the admissible graphs on n + n labeled vertices: perfect
matchings, alternating traveling-salesperson tours, bounded-degree spanning
trees, or r-regular connected graphs. Families are closed under relabeling,
so optimizing over graphs absorbs vertex permutations. Exact solvers:
matchings at any size, tours up to n = 12 by an alternating bitmask DP,
everything else by enumeration at n <= 5. A greedy + 2-opt heuristic covers
large tours for convergence runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from .geometry import PointCloud
from .matching import (
    CostParams,
    SizeLimitError,
    SolveResult,
    cost_matrix,
    matching_cost,
)

__all__ = [
    "GraphFamily",
    "BipartiteGraph",
    "enumerate_family",
    "generic_cost",
    "tsp_exact",
    "tsp_heuristic",
    "check_axioms",
    "AxiomReport",
    "is_member",
    "ENUM_MAX_SIDE",
    "TSP_DP_MAX",
]

ENUM_MAX_SIDE = 5
TSP_DP_MAX = 12
_RECT_SUBSET_LIMIT = 2_000


@dataclass(frozen=True)
class GraphFamily:
    """Descriptor of an admissible bipartite graph class.

    kappa0 is the smallest size with a nonempty class; kappa the edge budget
    constant used in the merge/restriction properties and in the generic
    subadditivity constant (3 + kappa0) * kappa / 2.
    """

    kind: str
    param: int | None = None

    _KINDS = ("matching", "tsp", "tree", "rreg")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind in ("tree", "rreg"):
            if self.param is None or self.param < 2:
                raise ValueError(f"family {self.kind!r} needs an integer parameter >= 2")
        elif self.param is not None:
            raise ValueError(f"family {self.kind!r} takes no parameter")

    @classmethod
    def matching(cls) -> "GraphFamily":
        return cls("matching")

    @classmethod
    def tsp_tour(cls) -> "GraphFamily":
        return cls("tsp")

    @classmethod
    def spanning_tree(cls, max_degree: int) -> "GraphFamily":
        return cls("tree", max_degree)

    @classmethod
    def r_regular(cls, r: int) -> "GraphFamily":
        return cls("rreg", r)

    @property
    def kappa0(self) -> int:
        return {"matching": 1, "tsp": 2, "tree": 1, "rreg": self.param or 2}[self.kind]

    @property
    def degree_bound(self) -> int:
        return {"matching": 1, "tsp": 2, "tree": self.param or 2,
                "rreg": self.param or 2}[self.kind]

    @property
    def kappa(self) -> int:
        if self.kind == "matching":
            return 1
        if self.kind == "tsp":
            return 4
        if self.kind == "tree":
            return int(self.param)
        return max(4, int(self.param))

    @property
    def merge_kappa(self) -> int:
        """Edge budget of the merge operation; 0 for matchings."""
        return 0 if self.kind == "matching" else self.kappa

    @property
    def subadd_constant(self) -> float:
        """Constant C in the subadditivity inequality; sharp 1/2 for matchings."""
        if self.kind == "matching":
            return 0.5
        return (3 + self.kappa0) * self.kappa / 2.0

    def label(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param})"


@dataclass(frozen=True)
class BipartiteGraph:
    """Edge set over vertex sides [n] and [n]; edge (i, j) joins X_i to Y_j."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for i, j in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        dx = np.zeros(self.n, dtype=int)
        dy = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            dx[i] += 1
            dy[j] += 1
        return dx, dy

    def is_connected_on_used(self) -> bool:
        """Connectivity over the vertices incident to at least one edge."""
        if not self.edges:
            return True
        adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
        for i, j in self.edges:
            adj.setdefault(("x", i), []).append(("y", j))
            adj.setdefault(("y", j), []).append(("x", i))
        start = next(iter(adj))
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(adj)

    def to_json_dict(self) -> dict:
        return {"schema_version": 1, "n": self.n,
                "edges": sorted([int(i), int(j)] for i, j in self.edges)}


def _spans_all(graph: BipartiteGraph) -> bool:
    dx, dy = graph.degrees()
    return bool(np.all(dx > 0) and np.all(dy > 0))


def is_member(graph: BipartiteGraph, family: GraphFamily) -> bool:
    """Re-validate a certificate graph against its family definition."""
    n = graph.n
    dx, dy = graph.degrees()
    if family.kind == "matching":
        return len(graph.edges) == n and np.all(dx == 1) and np.all(dy == 1)
    if family.kind == "tsp":
        return (n >= 2 and len(graph.edges) == 2 * n and np.all(dx == 2)
                and np.all(dy == 2) and graph.is_connected_on_used())
    if family.kind == "tree":
        return (len(graph.edges) == 2 * n - 1 and _spans_all(graph)
                and graph.is_connected_on_used()
                and np.all(dx <= family.degree_bound) and np.all(dy <= family.degree_bound))
    r = family.param
    return (n >= r and np.all(dx == r) and np.all(dy == r)
            and graph.is_connected_on_used())


# ---------------------------------------------------------------------------
# enumeration


def _enum_matching(n: int) -> list[frozenset]:
    return [frozenset((i, int(p)) for i, p in enumerate(perm))
            for perm in itertools.permutations(range(n))]


def _enum_tsp(n: int) -> list[frozenset]:
    if n < 2:
        return []
    seen = set()
    for rest in itertools.permutations(range(1, n)):
        xs = (0,) + rest
        for ys in itertools.permutations(range(n)):
            edges = set()
            for k in range(n):
                edges.add((xs[k], ys[k]))
                edges.add((xs[(k + 1) % n], ys[k]))
            seen.add(frozenset(edges))
    return sorted(seen, key=sorted)


def _enum_rreg(n: int, r: int) -> list[frozenset]:
    if n < r:
        return []
    out = []
    col_need = [r] * n
    rows: list[tuple[int, ...]] = []

    def rec(i: int):
        if i == n:
            edges = frozenset((ri, j) for ri, cols in enumerate(rows) for j in cols)
            g = BipartiteGraph(n, edges)
            if g.is_connected_on_used():
                out.append(edges)
            return
        remaining_rows = n - i - 1
        for cols in itertools.combinations(range(n), r):
            if any(col_need[j] == 0 for j in cols):
                continue
            for j in cols:
                col_need[j] -= 1
            # every column must still be fillable by the remaining rows
            if all(col_need[j] <= remaining_rows for j in range(n)):
                rows.append(cols)
                rec(i + 1)
                rows.pop()
            for j in cols:
                col_need[j] += 1

    rec(0)
    return out


def _enum_tree(n: int, max_degree: int) -> list[frozenset]:
    target = 2 * n - 1
    all_edges = [(i, j) for i in range(n) for j in range(n)]
    out = []
    deg_x = [0] * n
    deg_y = [0] * n
    parent = list(range(2 * n))  # X vertices 0..n-1, Y vertices n..2n-1

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    chosen: list[tuple[int, int]] = []

    def rec(start: int):
        if len(chosen) == target:
            out.append(frozenset(chosen))
            return
        if target - len(chosen) > len(all_edges) - start:
            return
        for idx in range(start, len(all_edges)):
            i, j = all_edges[idx]
            if deg_x[i] >= max_degree or deg_y[j] >= max_degree:
                continue
            ri, rj = find(i), find(n + j)
            if ri == rj:
                continue
            saved = parent.copy()
            parent[ri] = rj
            deg_x[i] += 1
            deg_y[j] += 1
            chosen.append((i, j))
            rec(idx + 1)
            chosen.pop()
            deg_x[i] -= 1
            deg_y[j] -= 1
            parent[:] = saved

    if n >= 1:
        rec(0)
    return out


@lru_cache(maxsize=256)
def _enumerate_cached(kind: str, param: int | None, n: int) -> tuple[frozenset, ...]:
    if kind == "matching":
        sets = _enum_matching(n)
    elif kind == "tsp":
        sets = _enum_tsp(n)
    elif kind == "rreg":
        sets = _enum_tsp(n) if param == 2 else _enum_rreg(n, param)
    else:
        sets = _enum_tree(n, param)
    return tuple(sets)


def _enum_cap(family: GraphFamily) -> int:
    if family.kind == "matching":
        return 7
    if family.kind == "tsp" or (family.kind == "rreg" and family.param == 2):
        return 6
    if family.kind == "tree":
        return 4
    return 5


def enumerate_family(n: int, family: GraphFamily,
                     limit: int = ENUM_MAX_SIDE) -> list[BipartiteGraph]:
    """All members of the family at size n; empty exactly when n < kappa0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > limit:
        raise SizeLimitError(f"family enumeration limited to n <= {limit}")
    if n < family.kappa0:
        return []
    sets = _enumerate_cached(family.kind, family.param, n)
    return [BipartiteGraph(n, e) for e in sets]


# ---------------------------------------------------------------------------
# exact solvers


def _tsp_dp_matrix(d: np.ndarray) -> tuple[float, list[int], list[int]]:
    """Minimum alternating tour over a full n x n edge cost matrix.

    Returns (cost, xs, ys) where the cycle is xs[0], ys[0], xs[1], ys[1], ...
    closing from ys[-1] back to xs[0]. States track (visited-X mask,
    visited-Y mask, last X vertex); each transition appends one Y and one X.
    """
    n = d.shape[0]
    if n < 2:
        raise ValueError("tour needs n >= 2")
    inf = np.inf
    v0 = np.full(n, inf)
    v0[0] = 0.0
    layers_parents: list[dict] = []
    states: dict[tuple[int, int], np.ndarray] = {(1, 0): v0}
    for _ in range(n - 1):
        new_states: dict[tuple[int, int], np.ndarray] = {}
        new_parents: dict[tuple[int, int], np.ndarray] = {}
        for (mx, my), vec in states.items():
            for yy in range(n):
                if (my >> yy) & 1:
                    continue
                through = vec + d[:, yy]
                last = int(np.argmin(through))
                c1 = through[last]
                if not np.isfinite(c1):
                    continue
                nmy = my | (1 << yy)
                enc = (yy << 8) | last
                for xx in range(n):
                    if (mx >> xx) & 1:
                        continue
                    key = (mx | (1 << xx), nmy)
                    arr = new_states.get(key)
                    if arr is None:
                        arr = np.full(n, inf)
                        par = np.full(n, -1, dtype=np.int64)
                        new_states[key] = arr
                        new_parents[key] = par
                    else:
                        par = new_parents[key]
                    cand = c1 + d[xx, yy]
                    if cand < arr[xx]:
                        arr[xx] = cand
                        par[xx] = enc
        states = new_states
        layers_parents.append(new_parents)

    full = (1 << n) - 1
    best = inf
    best_state = None
    for (mx, my), vec in states.items():
        y_missing = int((full ^ my).bit_length() - 1)
        closing = vec + d[:, y_missing] + d[0, y_missing]
        last = int(np.argmin(closing))
        if closing[last] < best:
            best = closing[last]
            best_state = (mx, my, last, y_missing)
    assert best_state is not None
    mx, my, last, y_missing = best_state

    xs_rev = [last]
    ys_rev = [y_missing]
    for layer in range(n - 2, -1, -1):
        enc = int(layers_parents[layer][(mx, my)][last])
        yy, prev_last = enc >> 8, enc & 0xFF
        ys_rev.append(yy)
        mx &= ~(1 << last)
        my &= ~(1 << yy)
        last = prev_last
        xs_rev.append(last)
    xs = xs_rev[::-1]
    ys = ys_rev[::-1]
    return float(best), xs, ys


def _tour_edges(xs: list[int], ys: list[int]) -> list[tuple[int, int]]:
    n = len(xs)
    edges = []
    for k in range(n):
        edges.append((xs[k], ys[k]))
        edges.append((xs[(k + 1) % n], ys[k]))
    return sorted(set(edges))


def tsp_exact(x: PointCloud, y: PointCloud, params: CostParams) -> SolveResult:
    """Exact minimum alternating tour for equal sides, n <= 12."""
    if x.dim != y.dim:
        raise ValueError("dimension mismatch")
    if len(x) != len(y):
        raise ValueError("exact tour DP requires equal cardinalities")
    n = len(x)
    if n > TSP_DP_MAX:
        raise SizeLimitError(f"exact tour DP limited to n <= {TSP_DP_MAX}")
    if n < 2:
        return SolveResult(cost=0.0, unmatched_x=list(range(n)),
                           unmatched_y=list(range(n)))
    d = cost_matrix(x, y, params)
    cost, xs, ys = _tsp_dp_matrix(d)
    return SolveResult(cost=cost, matched=_tour_edges(xs, ys))


def _min_over_graphs(d: np.ndarray, graphs: list[BipartiteGraph]) -> tuple[float, BipartiteGraph]:
    best = np.inf
    best_g = None
    for g in graphs:
        total = 0.0
        for i, j in g.edges:
            total += d[i, j]
        if total < best:
            best = total
            best_g = g
    return float(best), best_g


def generic_cost(x: PointCloud, y: PointCloud, family: GraphFamily,
                 params: CostParams) -> SolveResult:
    """Minimum edge cost over the family's graphs, smaller side fully used.

    Zero (with every point unmatched) below the family threshold kappa0.
    """
    if x.dim != y.dim:
        raise ValueError("dimension mismatch")
    if family.kind == "matching":
        return matching_cost(x, y, params)

    swapped = len(y) < len(x)
    a, b = (y, x) if swapped else (x, y)
    m, n = len(a), len(b)
    if m < family.kappa0:
        res = SolveResult(cost=0.0, unmatched_x=list(range(m)),
                          unmatched_y=list(range(n)))
        return _swap_result(res) if swapped else res

    if family.kind == "tsp" or (family.kind == "rreg" and family.param == 2):
        if m > TSP_DP_MAX:
            raise SizeLimitError(f"exact tour limited to n <= {TSP_DP_MAX}")
        if m != n and comb(n, m) > _RECT_SUBSET_LIMIT:
            raise SizeLimitError("rectangular tour instance beyond exact-solver limits")
        solver = "dp"
    else:
        if n > ENUM_MAX_SIDE:
            raise SizeLimitError(f"{family.label()} solver limited to sides <= {ENUM_MAX_SIDE}")
        solver = "enum"

    d_full = cost_matrix(a, b, params)
    best_cost = np.inf
    best_edges: list[tuple[int, int]] = []
    for subset in itertools.combinations(range(n), m):
        cols = np.asarray(subset, dtype=np.intp)
        d = d_full[:, cols]
        if solver == "dp":
            cost, xs, ys = _tsp_dp_matrix(d)
            edges = _tour_edges(xs, ys)
        else:
            graphs = enumerate_family(m, family)
            cost, g = _min_over_graphs(d, graphs)
            edges = sorted(g.edges)
        if cost < best_cost:
            best_cost = cost
            best_edges = [(i, int(cols[j])) for i, j in edges]

    used_a = {i for i, _ in best_edges}
    used_b = {j for _, j in best_edges}
    res = SolveResult(
        cost=float(best_cost),
        matched=sorted(best_edges),
        unmatched_x=[i for i in range(m) if i not in used_a],
        unmatched_y=[j for j in range(n) if j not in used_b],
    )
    return _swap_result(res) if swapped else res


def _swap_result(res: SolveResult) -> SolveResult:
    return SolveResult(
        cost=res.cost,
        matched=sorted((j, i) for i, j in res.matched),
        boundary_x=res.boundary_y,
        boundary_y=res.boundary_x,
        unmatched_x=res.unmatched_y,
        unmatched_y=res.unmatched_x,
        exact=res.exact,
    )


# ---------------------------------------------------------------------------
# tour heuristic


def tsp_heuristic(x: PointCloud, y: PointCloud, params: CostParams) -> SolveResult:
    """Greedy nearest-opposite construction plus alternation-preserving 2-opt.

    Always feasible, deterministic, and an upper bound on the exact tour.
    The 2-opt move pairs an X-to-Y edge with a Y-to-X edge and reverses the
    odd-length segment between them, which keeps the tour alternating; each
    pass evaluates every move at once and applies the best one.
    """
    if x.dim != y.dim:
        raise ValueError("dimension mismatch")
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("tour heuristic requires equal cardinalities >= 2")
    n = len(x)
    d = cost_matrix(x, y, params)

    seq = [0]
    used_x = np.zeros(n, dtype=bool)
    used_y = np.zeros(n, dtype=bool)
    used_x[0] = True
    for t in range(1, 2 * n):
        cur = seq[-1]
        if t % 2 == 1:  # at an X vertex, pick nearest unused Y
            row = np.where(used_y, np.inf, d[cur])
            nxt = int(np.argmin(row))
            used_y[nxt] = True
        else:
            col = np.where(used_x, np.inf, d[:, cur])
            nxt = int(np.argmin(col))
            used_x[nxt] = True
        seq.append(nxt)

    # tour as parallel index lists: cycle ex[0], ey[0], ex[1], ey[1], ...
    ex = np.array(seq[0::2], dtype=np.intp)
    ey = np.array(seq[1::2], dtype=np.intp)
    while True:
        m = d[np.ix_(ex, ey)]
        m_next = np.roll(m, -1, axis=0)  # m_next[k, j] = d[ex[k+1], ey[j]]
        # move (a, b): drop edges (ex[a], ey[a]) and (ey[b], ex[b+1]), add
        # (ex[a], ey[b]) and (ey[a], ex[b+1]), reverse the path between
        delta = m + m_next.T - np.diag(m)[:, None] - np.diag(m_next)[None, :]
        np.fill_diagonal(delta, np.inf)  # b == a is a no-op
        a, b = map(int, np.unravel_index(int(np.argmin(delta)), delta.shape))
        if delta[a, b] >= -1e-12:
            break
        if a > b:
            # the reversed segment wraps; restart the cycle at slot b + 1
            shift = b + 1
            ex = np.roll(ex, -shift)
            ey = np.roll(ey, -shift)
            a, b = a - shift, n - 1
        ex[a + 1:b + 1] = ex[a + 1:b + 1][::-1]
        ey[a:b + 1] = ey[a:b + 1][::-1]
    total = float(d[ex, ey].sum() + d[np.roll(ex, -1), ey].sum())
    xs = [int(v) for v in ex]
    ys = [int(v) for v in ey]
    return SolveResult(cost=float(total), matched=_tour_edges(xs, ys), exact=False)


# ---------------------------------------------------------------------------
# axiom checks


@dataclass
class AxiomReport:
    family: str
    n_max: int
    a1_ok: bool
    a2_ok: bool
    a3_observed_degree: int
    a3_ok: bool
    a4_pairs: list[dict]
    a4_observed: int
    a4_ok: bool
    a5_cases: list[dict]
    a5_observed: int
    a5_ok: bool
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.a1_ok and self.a2_ok and self.a3_ok and self.a4_ok and self.a5_ok

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "family": self.family,
            "n_max": self.n_max,
            "a1_ok": self.a1_ok,
            "a2_ok": self.a2_ok,
            "a3_observed_degree": self.a3_observed_degree,
            "a3_ok": self.a3_ok,
            "a4_pairs": self.a4_pairs,
            "a4_observed": self.a4_observed,
            "a4_ok": self.a4_ok,
            "a5_cases": self.a5_cases,
            "a5_observed": self.a5_observed,
            "a5_ok": self.a5_ok,
            "passed": self.passed,
            "notes": self.notes,
        }


def _merge_edge_sets(g1: frozenset, n: int, g2: frozenset) -> frozenset:
    return frozenset(set(g1) | {(n + i, n + j) for i, j in g2})


def _min_symdiff(target: frozenset, candidates: tuple[frozenset, ...]) -> int:
    best = None
    for cand in candidates:
        s = len(target ^ cand)
        if best is None or s < best:
            best = s
            if best == 0:
                break
    return -1 if best is None else best


def check_axioms(family: GraphFamily, n_max: int) -> AxiomReport:
    """Verify the family axioms by enumeration and report observed constants.

    Merge checks are limited to size pairs whose combined size stays within
    the enumeration budget for the family; the report lists which pairs ran.
    """
    if n_max > ENUM_MAX_SIDE:
        raise SizeLimitError(f"axiom checks limited to n_max <= {ENUM_MAX_SIDE}")
    cap = _enum_cap(family)
    k0 = family.kappa0
    notes: list[str] = []

    a1_ok = True
    a3_obs = 0
    a3_ok = True
    for n in range(0, n_max + 1):
        graphs = enumerate_family(n, family)
        if n >= k0 and not graphs:
            a1_ok = False
        if n < k0 and graphs:
            a1_ok = False
        for g in graphs:
            dx, dy = g.degrees()
            if len(g.edges):
                a3_obs = max(a3_obs, int(dx.max()), int(dy.max()))
    if a3_obs > family.degree_bound:
        a3_ok = False

    a2_ok = True
    for n in range(k0, min(n_max, 3) + 1):
        members = {g.edges for g in enumerate_family(n, family)}
        for edges in members:
            for perm_x in itertools.permutations(range(n)):
                for perm_y in itertools.permutations(range(n)):
                    relabeled = frozenset((perm_x[i], perm_y[j]) for i, j in edges)
                    if relabeled not in members:
                        a2_ok = False
                        break
                if not a2_ok:
                    break
            if not a2_ok:
                break

    a4_pairs: list[dict] = []
    a4_obs = 0
    pairs = [(n, m) for n in range(k0, n_max + 1)
             for m in range(1, n_max + 1) if n + m <= cap]
    for n, m in pairs:
        if m < k0:
            gs_m: list[frozenset] = [frozenset()]
        else:
            gs_m = [g.edges for g in enumerate_family(m, family)]
        gs_n = [g.edges for g in enumerate_family(n, family)]
        merged_members = _enumerate_cached(family.kind, family.param, n + m)
        if not gs_n or not merged_members:
            continue
        worst = 0
        for ge in gs_n:
            for ge2 in gs_m:
                target = _merge_edge_sets(ge, n, ge2)
                s = _min_symdiff(target, merged_members)
                worst = max(worst, s)
        a4_pairs.append({"n": n, "m": m, "worst_min_symdiff": worst})
        a4_obs = max(a4_obs, worst)
    # r-regular constants beyond r = 2 are loose; report observations only
    loose_constants = family.kind == "rreg" and (family.param or 2) >= 3
    a4_ok = a4_obs <= 2 * family.merge_kappa or loose_constants
    if loose_constants:
        notes.append("r-regular merge/restriction budgets are loose; "
                     "observed constants are reported without a pass bound")
    if not a4_pairs:
        notes.append("no merge pair fit within the enumeration budget")

    a5_cases: list[dict] = []
    a5_obs = 0
    for n in range(k0 + 1, min(n_max, cap) + 1):
        members_small = _enumerate_cached(family.kind, family.param, n - 1)
        if not members_small:
            continue
        worst = 0
        for g in enumerate_family(n, family):
            restricted = frozenset((i, j) for i, j in g.edges if i < n - 1 and j < n - 1)
            s = _min_symdiff(restricted, members_small)
            worst = max(worst, s)
        a5_cases.append({"n": n, "worst_min_symdiff": worst})
        a5_obs = max(a5_obs, worst)
    a5_ok = a5_obs <= 2 * family.kappa or loose_constants

    return AxiomReport(
        family=family.label(),
        n_max=n_max,
        a1_ok=a1_ok,
        a2_ok=a2_ok,
        a3_observed_degree=a3_obs,
        a3_ok=a3_ok,
        a4_pairs=a4_pairs,
        a4_observed=a4_obs,
        a4_ok=a4_ok,
        a5_cases=a5_cases,
        a5_observed=a5_obs,
        a5_ok=a5_ok,
        notes=notes,
    )
