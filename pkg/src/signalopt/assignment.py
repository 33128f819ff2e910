"""User-equilibrium traffic assignment under signal-dependent link costs.

Link travel time follows the BPR form with an effective capacity scaled by
the link green split: t(v) = t0 * (1 + alpha * (v / (lam * S))**beta).  The
solver minimizes the corresponding integral objective with Frank-Wolfe
iterations: all-or-nothing loading along current shortest paths, then an
exact line search by bisection on the objective's directional derivative.

Everything here is a pure function of its inputs; concurrent solves on a
shared network are safe.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .netmodel import Network, NetworkError

__all__ = [
    "CostParams",
    "SolverOptions",
    "AssignmentResult",
    "CapacityViolation",
    "link_travel_time",
    "beckmann_term",
    "all_or_nothing",
    "solve_ue",
    "total_travel_time",
    "capacity_check",
]


@dataclass(frozen=True)
class CostParams:
    """BPR volume-delay parameters."""

    alpha: float = 0.15
    beta: float = 4.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")


@dataclass(frozen=True)
class SolverOptions:
    gap_tolerance: float = 1e-4
    max_iterations: int = 500
    line_search_iterations: int = 48

    def __post_init__(self):
        if self.gap_tolerance <= 0:
            raise ValueError("gap tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class AssignmentResult:
    """Equilibrium link flows plus convergence diagnostics.

    ``total_travel_time`` is in vehicle-hours (hourly flows times travel
    times over the one-hour horizon).  ``objective_trace`` records the
    integral objective after the initial loading and after every step; it
    never increases.
    """

    link_flows: dict  # link id -> veh/h
    relative_gap: float
    iterations: int
    total_travel_time: float
    beckmann_value: float
    converged: bool
    objective_trace: tuple


@dataclass(frozen=True)
class CapacityViolation:
    link: object
    flow: float
    effective_capacity: float
    ratio: float


def _check_split(green_split: float) -> None:
    if green_split <= 0:
        raise ValueError("green split must be positive")
    if green_split > 1 + 1e-12:
        raise ValueError("green split cannot exceed 1")


def link_travel_time(link, flow: float, green_split: float, params: CostParams = CostParams()) -> float:
    """Travel time in seconds at hourly flow ``flow`` and green share ``green_split``."""
    _check_split(green_split)
    if flow < 0:
        raise ValueError("flow must be non-negative")
    effective = green_split * link.capacity
    return link.free_flow_time * (1.0 + params.alpha * (flow / effective) ** params.beta)


def beckmann_term(link, flow: float, green_split: float, params: CostParams = CostParams()) -> float:
    """Integral of the travel-time curve from 0 to ``flow``.

    Closed form of int_0^v t(x) dx; its derivative in ``flow`` is
    :func:`link_travel_time`.
    """
    _check_split(green_split)
    if flow < 0:
        raise ValueError("flow must be non-negative")
    effective = green_split * link.capacity
    return link.free_flow_time * (
        flow
        + params.alpha * flow ** (params.beta + 1.0) / ((params.beta + 1.0) * effective**params.beta)
    )


# ---------------------------------------------------------------------------
# assignment engine
#
# Shortest paths are label-setting (priority queue) with ties broken by the
# lexicographic link-id sequence, which makes loading deterministic.  On
# small networks all simple paths per OD pair are enumerated once up front
# and the per-iteration shortest path reduces to a vectorized argmin over
# path costs; the two strategies pick identical paths.

_PATH_ENUMERATION_LIMIT = 4096


class _Engine:
    def __init__(self, net: Network):
        self.net = net
        self.link_ids = sorted(net.links, key=str)
        self.index = {lid: i for i, lid in enumerate(self.link_ids)}
        links = [net.links[lid] for lid in self.link_ids]
        self.t0 = np.array([l.free_flow_time for l in links])
        self.capacity = np.array([l.capacity for l in links])
        self.controlled = np.array([l.signal_controlled for l in links])
        self.n_links = len(links)
        # adjacency in canonical id order so exploration is deterministic
        self.out = {}
        for i, l in enumerate(links):
            self.out.setdefault(l.from_node, []).append((i, l.to_node))
        self.od = [((o, d), dem) for (o, d), dem in net.od.positive_pairs()]
        self.demands = np.array([dem for _, dem in self.od])
        self._solve_cache = {}
        self._build_paths()

    def _build_paths(self):
        """Enumerate simple paths per OD pair; fall back to Dijkstra if huge."""
        all_paths = []
        self.od_slices = []
        for (o, d), _ in self.od:
            paths = []
            self._walk(o, d, {o}, [], paths)
            if not paths:
                raise NetworkError(f"no path for demand between {o!r} and {d!r}")
            paths.sort()
            start = len(all_paths)
            all_paths.extend(paths)
            self.od_slices.append((start, len(all_paths)))
            if len(all_paths) > _PATH_ENUMERATION_LIMIT:
                self.enumerated = False
                self.paths = None
                return
        self.enumerated = True
        self.paths = all_paths
        maxlen = max((len(p) for p in all_paths), default=1)
        pad = np.full((len(all_paths), maxlen), self.n_links, dtype=np.int64)
        for r, p in enumerate(all_paths):
            pad[r, : len(p)] = p
        self.pad = pad
        self._ext = np.zeros(self.n_links + 1)

    def _walk(self, node, dest, visited, path, paths):
        if node == dest:
            paths.append(tuple(path))
            return
        if len(paths) > _PATH_ENUMERATION_LIMIT:
            return
        for i, to in self.out.get(node, ()):
            if to in visited:
                continue
            visited.add(to)
            path.append(i)
            self._walk(to, dest, visited, path, paths)
            path.pop()
            visited.remove(to)

    def aon(self, costs: np.ndarray) -> np.ndarray:
        """All-or-nothing loading at the given link costs."""
        flows = np.zeros(self.n_links)
        if not self.od:
            return flows
        if self.enumerated:
            self._ext[: self.n_links] = costs
            path_costs = self._ext[self.pad].sum(axis=1).tolist()
            key = path_costs.__getitem__
            for ((_, _), demand), (start, end) in zip(self.od, self.od_slices):
                best = min(range(start, end), key=key)
                for i in self.paths[best]:
                    flows[i] += demand
            return flows
        trees = {}
        for (o, d), demand in self.od:
            if o not in trees:
                trees[o] = self._dijkstra(costs, o)
            path = trees[o].get(d)
            if path is None:
                raise NetworkError(f"no path for demand between {o!r} and {d!r}")
            for i in path:
                flows[i] += demand
        return flows

    def _dijkstra(self, costs, origin):
        """Single-origin shortest path trees with lexicographic tie-break.

        Heap entries carry the link-index sequence so equal-cost labels
        settle in id order; indices follow sorted link ids, so comparing
        index tuples compares id sequences.
        """
        settled = {}
        heap = [(0.0, (), origin)]
        while heap:
            dist, path, node = heapq.heappop(heap)
            if node in settled:
                continue
            settled[node] = path
            for i, to in self.out.get(node, ()):
                if to not in settled:
                    heapq.heappush(heap, (dist + costs[i], path + (i,), to))
        return settled

    def split_vector(self, green_splits) -> np.ndarray:
        lam = np.ones(self.n_links)
        for lid, value in green_splits.items():
            if lid not in self.index:
                raise NetworkError(f"green split for unknown link {lid!r}")
            _check_split(value)
            lam[self.index[lid]] = value
        missing = [
            self.link_ids[i] for i in range(self.n_links) if self.controlled[i] and self.link_ids[i] not in green_splits
        ]
        if missing:
            raise ValueError(f"missing green split for signal-controlled links: {missing}")
        return lam


_ENGINES: dict = {}


def _engine_for(net: Network) -> _Engine:
    key = id(net)
    hit = _ENGINES.get(key)
    if hit is not None and hit[0] is net:
        return hit[1]
    engine = _Engine(net)
    _ENGINES[key] = (net, engine)
    return engine


def all_or_nothing(net: Network, costs, od=None) -> dict:
    """Load every OD demand onto its single cheapest path.

    ``costs`` maps link id to a positive, finite cost in seconds.  Ties are
    broken by the lexicographic link-id sequence.  The returned flows
    satisfy route/link conservation exactly: each demand appears on every
    link of exactly one path.
    """
    engine = _engine_for(net)
    vec = np.empty(engine.n_links)
    for i, lid in enumerate(engine.link_ids):
        try:
            c = float(costs[lid])
        except KeyError:
            raise ValueError(f"missing cost for link {lid!r}") from None
        if not np.isfinite(c) or c <= 0:
            raise ValueError(f"cost for link {lid!r} must be positive and finite")
        vec[i] = c
    if od is not None and od is not net.od:
        raise ValueError("all_or_nothing uses the network's own demand table")
    flows = engine.aon(vec)
    return {lid: float(flows[i]) for i, lid in enumerate(engine.link_ids)}


def _step_derivative(v, direction, t0, effective, params):
    """phi'(a) for the step objective, as a fast scalar-valued callable.

    For integer exponents the derivative is a polynomial in the step size,
    so its coefficients are assembled once and each bisection probe costs a
    scalar Horner evaluation instead of a full vector pass.
    """
    beta = params.beta
    if float(beta).is_integer() and 1 <= beta <= 12:
        from math import comb

        b = int(beta)
        scale = t0 * params.alpha / effective**b
        coeffs = [float(direction @ t0)] + [0.0] * b
        v_pow = np.ones_like(v)  # v**(b-j) built from the top down
        powers = [None] * (b + 1)
        for j in range(b, -1, -1):
            powers[j] = v_pow
            v_pow = v_pow * v
        d_pow = direction
        for j in range(b + 1):
            coeffs[j] += comb(b, j) * float(scale @ (powers[j] * d_pow))
            d_pow = d_pow * direction

        def deriv(a):
            acc = coeffs[b]
            for j in range(b - 1, -1, -1):
                acc = acc * a + coeffs[j]
            return acc

        return deriv

    def deriv(a):
        x = v + a * direction
        return float(direction @ (t0 * (1.0 + params.alpha * (x / effective) ** params.beta)))

    return deriv


def _line_search(v, direction, t0, effective, params, iterations):
    """Exact step along the all-or-nothing direction (bisection on phi')."""
    deriv = _step_derivative(v, direction, t0, effective, params)
    if deriv(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        g = deriv(mid)
        if g == 0.0:
            return mid
        if g < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return 0.5 * (lo + hi)


def solve_ue(
    net: Network,
    green_splits,
    opts: SolverOptions = SolverOptions(),
    params: CostParams = CostParams(),
) -> AssignmentResult:
    """Solve the user equilibrium for the given per-link green splits.

    Iterates until the relative gap (linearization gap over current total
    cost) drops to ``opts.gap_tolerance`` or ``opts.max_iterations`` is
    reached; non-convergence is reported through the ``converged`` flag,
    not raised.  Deterministic: identical inputs give identical flows.
    """
    engine = _engine_for(net)
    lam = engine.split_vector(green_splits)
    key = (lam.tobytes(), opts, params)
    cached = engine._solve_cache.get(key)
    if cached is not None:
        return cached

    t0 = engine.t0
    effective = lam * engine.capacity
    alpha, beta = params.alpha, params.beta
    beck_coeff = t0 * alpha / ((beta + 1.0) * effective**beta)

    def costs(v):
        return t0 * (1.0 + alpha * (v / effective) ** beta)

    def objective(v):
        return float(t0 @ v + beck_coeff @ v ** (beta + 1.0))

    v = engine.aon(costs(np.zeros(engine.n_links)))
    trace = [objective(v)]
    gap = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        c = costs(v)
        y = engine.aon(c)
        den = float(c @ v)
        num = den - float(c @ y)
        gap = num / den if den > 0.0 else 0.0
        if gap <= opts.gap_tolerance:
            converged = True
            break
        step = _line_search(v, y - v, t0, effective, params, opts.line_search_iterations)
        v = v + step * (y - v)
        trace.append(objective(v))

    final_costs = costs(v)
    result = AssignmentResult(
        link_flows={lid: float(v[i]) for i, lid in enumerate(engine.link_ids)},
        relative_gap=gap,
        iterations=iterations,
        total_travel_time=float(v @ final_costs) / 3600.0,
        beckmann_value=objective(v),
        converged=converged,
        objective_trace=tuple(trace),
    )
    engine._solve_cache[key] = result
    return result


def total_travel_time(result: AssignmentResult, net: Network, green_splits, params: CostParams = CostParams()) -> float:
    """Vehicle-hours spent in the network: sum of flow times travel time."""
    total = 0.0
    for lid, link in net.links.items():
        flow = result.link_flows.get(lid, 0.0)
        lam = green_splits.get(lid, 1.0) if hasattr(green_splits, "get") else green_splits[lid]
        total += flow * link_travel_time(link, flow, lam, params)
    return total / 3600.0


def capacity_check(result: AssignmentResult, net: Network, green_splits) -> list:
    """Links whose flow exceeds the green-scaled capacity, worst first.

    An empty list means every link respects its exit capacity; violations
    are diagnostics, the solver does not enforce the bound.
    """
    violations = []
    for lid in sorted(net.links, key=str):
        link = net.links[lid]
        lam = green_splits.get(lid, 1.0) if hasattr(green_splits, "get") else green_splits[lid]
        effective = lam * link.capacity
        flow = result.link_flows.get(lid, 0.0)
        if flow > effective:
            violations.append(CapacityViolation(lid, flow, effective, flow / effective))
    violations.sort(key=lambda v: -v.ratio)
    return violations
