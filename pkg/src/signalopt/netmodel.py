"""Road network, travel demand and incident data model.

A network is a directed multigraph.  Road links carry traffic between
junction nodes; demand enters and leaves at centroid nodes, which are
attached to the rest of the graph through connector links.  Connectors are
plumbing only: they have negligible free-flow time, effectively unlimited
capacity, are never signal controlled and are omitted from route listings.

Networks are immutable after construction and safe to share between any
number of concurrent solver runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "NodeKind",
    "Turn",
    "Node",
    "Link",
    "Movement",
    "ODMatrix",
    "IncidentSpec",
    "SignalTable",
    "Network",
    "NetworkError",
    "load_network",
    "build_testbed",
    "enumerate_routes",
    "to_document",
    "DEFAULT_LANE_CAPACITY_VPH",
    "DEFAULT_FREE_FLOW_TIME_S",
    "DEFAULT_CYCLE_S",
    "TESTBED_INCIDENT_LINK",
    "CONNECTOR_TIME_S",
    "CONNECTOR_CAPACITY_VPH",
]


class NetworkError(ValueError):
    """A network document violates the schema or a model invariant."""


class NodeKind(str, Enum):
    SIGNALIZED = "signalized-intersection"
    JUNCTION = "plain-junction"
    CENTROID = "centroid-connector"


class Turn(str, Enum):
    THROUGH = "through"
    LEFT = "left"
    RIGHT = "right"


# Connector links: near-zero cost, effectively infinite capacity.  A strictly
# positive free-flow time keeps the Link invariant (time > 0) intact.
CONNECTOR_TIME_S = 1e-3
CONNECTOR_CAPACITY_VPH = 1e9

# Built-in testbed defaults: 500 m approaches at 60 km/h, two lanes each.
# The two approaches into junction i2 (the sink side of the dominant demand)
# run at a reduced effective lane capacity: curb friction and pedestrian
# load near the main activity centre.  Both heavy routes end on one of these
# reduced links, so the routes stay mirror images of each other.
DEFAULT_FREE_FLOW_TIME_S = 30.0
DEFAULT_LANE_CAPACITY_VPH = 1800.0
SINK_LANE_CAPACITY_VPH = 700.0
SINK_APPROACH_LINKS = ("r02_i4_i2", "r04_i1_i2")
DEFAULT_LANES = 2
DEFAULT_CYCLE_S = 90.0

# Road link of the built-in incident: the eastbound street into the busiest
# junction, on the second of the two heavy-demand routes.
TESTBED_INCIDENT_LINK = "r04_i1_i2"


@dataclass(frozen=True)
class Node:
    id: object
    kind: NodeKind
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Link:
    """Directed link with BPR-style attributes.

    ``signal_controlled`` is true iff the downstream node is a signalized
    intersection and the link is a road link (connectors are exempt).
    """

    id: object
    from_node: object
    to_node: object
    free_flow_time: float  # seconds
    capacity: float  # vehicles/hour
    lanes: int = 1
    signal_controlled: bool = False
    connector: bool = False

    def __post_init__(self):
        if self.free_flow_time <= 0:
            raise NetworkError(f"link {self.id}: non-positive free-flow time")
        if self.capacity <= 0:
            raise NetworkError(f"link {self.id}: non-positive capacity")
        if self.lanes < 1:
            raise NetworkError(f"link {self.id}: lanes must be >= 1")
        if self.from_node == self.to_node:
            raise NetworkError(f"link {self.id}: from and to node coincide")


@dataclass(frozen=True)
class Movement:
    """A permitted turn from one link onto another at a junction."""

    in_link: object
    out_link: object
    turn: Turn


@dataclass(frozen=True)
class ODMatrix:
    """Origin-destination demand in vehicles/hour, keyed by centroid pair."""

    demands: dict = field(default_factory=dict)

    def __getitem__(self, pair):
        return self.demands.get(tuple(pair), 0.0)

    def pairs(self):
        """Demand entries sorted deterministically, zero entries included."""
        return sorted(self.demands.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))

    def positive_pairs(self):
        return [(od, d) for od, d in self.pairs() if d > 0]

    def total(self) -> float:
        return sum(self.demands.values())

    def row_total(self, origin) -> float:
        return sum(d for (o, _), d in self.demands.items() if o == origin)

    def col_total(self, destination) -> float:
        return sum(d for (_, t), d in self.demands.items() if t == destination)


@dataclass(frozen=True)
class IncidentSpec:
    """Capacity-reducing incident on a single link.

    The capacity multiplier is (lanes - lanes_blocked) / lanes, derived from
    the affected link when the incident is applied.  ``lanes_blocked == 0``
    is allowed as an explicit no-op.  Times are simulation-relative hours;
    the whole analysis hour is affected by default.
    """

    link: object
    lanes_blocked: int
    start_h: float = 0.0
    end_h: float = 1.0

    def __post_init__(self):
        if self.lanes_blocked < 0:
            raise NetworkError("lanes_blocked must be >= 0")
        if self.end_h <= self.start_h:
            raise NetworkError("incident end must be after its start")


@dataclass(frozen=True)
class SignalTable:
    """Raw signal layout for one junction, as read from a network document.

    ``phases`` holds, per phase, the indices into the network's movement
    list that are granted green.  The signals module turns this into plan
    and layout objects.
    """

    junction: object
    cycle: float
    phases: tuple  # tuple of tuples of movement indices
    initial_durations: tuple


@dataclass(frozen=True, eq=True)
class Network:
    nodes: dict  # node id -> Node
    links: dict  # link id -> Link
    movements: tuple  # tuple of Movement
    centroids: tuple  # centroid node ids
    od: ODMatrix
    signals: tuple = ()  # tuple of SignalTable

    def road_links(self):
        """Road links (non-connectors) in deterministic id order."""
        return [self.links[k] for k in sorted(self.links, key=str) if not self.links[k].connector]

    def out_links(self, node_id):
        return [l for l in self.links.values() if l.from_node == node_id]

    def signalized_nodes(self):
        return [n for n in self.nodes.values() if n.kind is NodeKind.SIGNALIZED]


# ---------------------------------------------------------------------------
# document loading


def _require(mapping, key, context):
    try:
        return mapping[key]
    except (KeyError, TypeError):
        raise NetworkError(f"{context}: missing required key '{key}'") from None


def load_network(source) -> Network:
    """Parse and validate a network document.

    ``source`` may be a mapping (already-parsed JSON), a JSON string, or a
    path to a JSON file.  The document layout is::

        {"nodes":     [{"id", "kind", "x", "y"}],
         "links":     [{"id", "from", "to", "free_flow_time_s",
                        "capacity_vph", "lanes"}],
         "movements": [{"in_link", "out_link", "turn"}],
         "centroids": [ids],
         "demand":    [{"from", "to", "vph"}],
         "signals":   [{"junction", "cycle_s",
                        "phases": [{"movements": [movement indices]}],
                        "initial_durations_s": [...]}]}

    Coordinates are used for plotting only.  Links that touch a centroid
    node are treated as connectors regardless of their stated attributes.
    """
    if isinstance(source, (str, Path)) and not isinstance(source, dict):
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        doc = json.loads(text)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise NetworkError("network document must be a JSON object")

    nodes = {}
    for entry in _require(doc, "nodes", "document"):
        nid = _require(entry, "id", "node")
        try:
            kind = NodeKind(_require(entry, "kind", f"node {nid}"))
        except ValueError:
            raise NetworkError(f"node {nid}: unknown kind {entry.get('kind')!r}") from None
        if str(nid) in {str(k) for k in nodes}:
            raise NetworkError(f"duplicate node id {nid!r}")
        nodes[nid] = Node(nid, kind, float(entry.get("x", 0.0)), float(entry.get("y", 0.0)))

    links = {}
    for entry in _require(doc, "links", "document"):
        lid = _require(entry, "id", "link")
        frm = _require(entry, "from", f"link {lid}")
        to = _require(entry, "to", f"link {lid}")
        for ref in (frm, to):
            if ref not in nodes:
                raise NetworkError(f"link {lid}: missing node reference {ref!r}")
        if str(lid) in {str(k) for k in links}:
            raise NetworkError(f"duplicate link id {lid!r}")
        cap = float(_require(entry, "capacity_vph", f"link {lid}"))
        if cap <= 0:
            raise NetworkError(f"link {lid}: non-positive capacity")
        connector = (
            nodes[frm].kind is NodeKind.CENTROID or nodes[to].kind is NodeKind.CENTROID
        )
        links[lid] = Link(
            id=lid,
            from_node=frm,
            to_node=to,
            free_flow_time=float(_require(entry, "free_flow_time_s", f"link {lid}")),
            capacity=cap,
            lanes=int(entry.get("lanes", 1)),
            signal_controlled=(not connector and nodes[to].kind is NodeKind.SIGNALIZED),
            connector=connector,
        )

    movements = []
    for entry in doc.get("movements", []):
        in_link = _require(entry, "in_link", "movement")
        out_link = _require(entry, "out_link", "movement")
        for ref in (in_link, out_link):
            if ref not in links:
                raise NetworkError(f"movement: missing link reference {ref!r}")
        if links[in_link].to_node != links[out_link].from_node:
            raise NetworkError(
                f"movement {in_link!r}->{out_link!r}: links do not meet at a node"
            )
        movements.append(Movement(in_link, out_link, Turn(_require(entry, "turn", "movement"))))

    centroids = []
    for cid in _require(doc, "centroids", "document"):
        if cid not in nodes:
            raise NetworkError(f"centroid list: missing node reference {cid!r}")
        if nodes[cid].kind is not NodeKind.CENTROID:
            raise NetworkError(f"centroid {cid!r} is not a centroid-connector node")
        centroids.append(cid)

    demands = {}
    for entry in doc.get("demand", []):
        o = _require(entry, "from", "demand")
        d = _require(entry, "to", "demand")
        vph = float(_require(entry, "vph", f"demand {o}->{d}"))
        for ref in (o, d):
            if ref not in centroids:
                raise NetworkError(f"demand {o!r}->{d!r}: {ref!r} is not a listed centroid")
        if vph < 0:
            raise NetworkError(f"demand {o!r}->{d!r}: negative volume")
        if o == d and vph != 0:
            raise NetworkError(f"demand {o!r}->{d!r}: diagonal entries must be zero")
        demands[(o, d)] = vph

    signals = []
    for entry in doc.get("signals", []):
        junction = _require(entry, "junction", "signal")
        if junction not in nodes:
            raise NetworkError(f"signal: missing node reference {junction!r}")
        if nodes[junction].kind is not NodeKind.SIGNALIZED:
            raise NetworkError(f"signal at {junction!r}: node is not signalized")
        phases = []
        for phase in _require(entry, "phases", f"signal {junction}"):
            refs = tuple(int(i) for i in _require(phase, "movements", f"signal {junction}"))
            for i in refs:
                if not 0 <= i < len(movements):
                    raise NetworkError(f"signal {junction!r}: movement index {i} out of range")
            if not refs:
                raise NetworkError(f"signal {junction!r}: phase grants green to no movement")
            phases.append(refs)
        initial = tuple(float(v) for v in entry.get("initial_durations_s", ()))
        signals.append(
            SignalTable(junction, float(entry.get("cycle_s", DEFAULT_CYCLE_S)), tuple(phases), initial)
        )

    net = Network(
        nodes=nodes,
        links=links,
        movements=tuple(movements),
        centroids=tuple(centroids),
        od=ODMatrix(demands),
        signals=tuple(signals),
    )
    _check_connectivity(net)
    return net


def _check_connectivity(net: Network) -> None:
    """Every OD pair with positive demand must be connected by links."""
    out = {}
    for link in net.links.values():
        out.setdefault(link.from_node, []).append(link.to_node)
    for (o, d), demand in net.od.positive_pairs():
        seen = {o}
        stack = [o]
        while stack:
            n = stack.pop()
            if n == d:
                break
            for m in out.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        else:
            raise NetworkError(f"no path for demand between {o!r} and {d!r}")


def to_document(net: Network) -> dict:
    """Serialize a network back to its document form (deterministic order)."""
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "x": n.x, "y": n.y}
            for n in sorted(net.nodes.values(), key=lambda n: str(n.id))
        ],
        "links": [
            {
                "id": l.id,
                "from": l.from_node,
                "to": l.to_node,
                "free_flow_time_s": l.free_flow_time,
                "capacity_vph": l.capacity,
                "lanes": l.lanes,
            }
            for l in sorted(net.links.values(), key=lambda l: str(l.id))
        ],
        "movements": [
            {"in_link": m.in_link, "out_link": m.out_link, "turn": m.turn.value}
            for m in net.movements
        ],
        "centroids": list(net.centroids),
        "demand": [
            {"from": o, "to": d, "vph": v} for (o, d), v in net.od.pairs()
        ],
        "signals": [
            {
                "junction": s.junction,
                "cycle_s": s.cycle,
                "phases": [{"movements": list(p)} for p in s.phases],
                "initial_durations_s": list(s.initial_durations),
            }
            for s in net.signals
        ],
    }


# ---------------------------------------------------------------------------
# built-in testbed
#
# Four signalized intersections on a 2x2 grid, eight perimeter centroids
# numbered clockwise from north of i1.  Streets are two-way, one road link
# per direction; every road link is 500 m, two lanes, uniform capacity, so
# the two routes of the heavy 7->3 movement are interchangeable when the
# network is unloaded.
#
#         c1        c2
#         |         |
#   c8 -- i1 ------ i2 -- c3
#         |         |
#   c7 -- i3 ------ i4 -- c4
#         |         |
#         c6        c5


def build_testbed(
    lane_capacity_vph: float = DEFAULT_LANE_CAPACITY_VPH,
    free_flow_time_s: float = DEFAULT_FREE_FLOW_TIME_S,
    sink_lane_capacity_vph: float = SINK_LANE_CAPACITY_VPH,
) -> Network:
    """Build the four-intersection demonstration network.

    Deterministic: repeated calls produce identical structures.
    """
    demand_rows = {
        1: (0, 150, 150, 150, 150, 100, 100, 150),
        2: (150, 0, 100, 100, 100, 150, 150, 100),
        3: (150, 100, 0, 150, 100, 100, 100, 150),
        4: (100, 150, 100, 0, 150, 100, 150, 150),
        5: (150, 100, 100, 150, 0, 150, 150, 100),
        6: (100, 100, 100, 100, 0, 0, 150, 100),
        7: (100, 150, 750, 150, 150, 100, 0, 150),
        8: (100, 150, 150, 100, 150, 100, 100, 0),
    }

    nodes = [
        {"id": "i1", "kind": NodeKind.SIGNALIZED.value, "x": 0.0, "y": 500.0},
        {"id": "i2", "kind": NodeKind.SIGNALIZED.value, "x": 500.0, "y": 500.0},
        {"id": "i3", "kind": NodeKind.SIGNALIZED.value, "x": 0.0, "y": 0.0},
        {"id": "i4", "kind": NodeKind.SIGNALIZED.value, "x": 500.0, "y": 0.0},
        {"id": 1, "kind": NodeKind.CENTROID.value, "x": 0.0, "y": 800.0},
        {"id": 2, "kind": NodeKind.CENTROID.value, "x": 500.0, "y": 800.0},
        {"id": 3, "kind": NodeKind.CENTROID.value, "x": 800.0, "y": 500.0},
        {"id": 4, "kind": NodeKind.CENTROID.value, "x": 800.0, "y": 0.0},
        {"id": 5, "kind": NodeKind.CENTROID.value, "x": 500.0, "y": -300.0},
        {"id": 6, "kind": NodeKind.CENTROID.value, "x": 0.0, "y": -300.0},
        {"id": 7, "kind": NodeKind.CENTROID.value, "x": -300.0, "y": 0.0},
        {"id": 8, "kind": NodeKind.CENTROID.value, "x": -300.0, "y": 500.0},
    ]

    roads = [
        ("r01_i3_i4", "i3", "i4"),  # south street eastbound
        ("r02_i4_i2", "i4", "i2"),  # east street northbound
        ("r03_i3_i1", "i3", "i1"),  # west street northbound
        ("r04_i1_i2", "i1", "i2"),  # north street eastbound
        ("r05_i1_i3", "i1", "i3"),  # west street southbound
        ("r06_i4_i3", "i4", "i3"),  # south street westbound
        ("r07_i2_i1", "i2", "i1"),  # north street westbound
        ("r08_i2_i4", "i2", "i4"),  # east street southbound
    ]
    links = [
        {
            "id": lid,
            "from": a,
            "to": b,
            "free_flow_time_s": free_flow_time_s,
            "capacity_vph": (
                sink_lane_capacity_vph if lid in SINK_APPROACH_LINKS else lane_capacity_vph
            )
            * DEFAULT_LANES,
            "lanes": DEFAULT_LANES,
        }
        for lid, a, b in roads
    ]
    attachments = {1: "i1", 2: "i2", 3: "i2", 4: "i4", 5: "i4", 6: "i3", 7: "i3", 8: "i1"}
    for c, j in sorted(attachments.items()):
        for lid, a, b in ((f"x_{c}_{j}", c, j), (f"x_{j}_{c}", j, c)):
            links.append(
                {
                    "id": lid,
                    "from": a,
                    "to": b,
                    "free_flow_time_s": CONNECTOR_TIME_S,
                    "capacity_vph": CONNECTOR_CAPACITY_VPH,
                    "lanes": 1,
                }
            )

    # Road approaches per junction: one north/south, one east/west.  Left
    # turns run with their through phase (near-side turns under left-hand
    # drive); right turns cross opposing traffic and get protected phases.
    # approach -> (through out-link, left out-link, right out-link)
    approach_turns = {
        "r03_i3_i1": ("x_i1_1", "x_i1_8", "r04_i1_i2"),  # northbound at i1
        "r07_i2_i1": ("x_i1_8", "r05_i1_i3", "x_i1_1"),  # westbound at i1
        "r02_i4_i2": ("x_i2_2", "r07_i2_i1", "x_i2_3"),  # northbound at i2
        "r04_i1_i2": ("x_i2_3", "x_i2_2", "r08_i2_i4"),  # eastbound at i2
        "r05_i1_i3": ("x_i3_6", "r01_i3_i4", "x_i3_7"),  # southbound at i3
        "r06_i4_i3": ("x_i3_7", "x_i3_6", "r03_i3_i1"),  # westbound at i3
        "r08_i2_i4": ("x_i4_5", "x_i4_4", "r06_i4_i3"),  # southbound at i4
        "r01_i3_i4": ("x_i4_4", "r02_i4_i2", "x_i4_5"),  # eastbound at i4
    }
    movements = []
    movement_index = {}
    for in_link in sorted(approach_turns):
        through, left, right = approach_turns[in_link]
        for out_link, turn in ((through, "through"), (left, "left"), (right, "right")):
            movement_index[(in_link, turn)] = len(movements)
            movements.append({"in_link": in_link, "out_link": out_link, "turn": turn})

    # Four phases per junction: 1 = N/S through+left, 2 = E/W through+left,
    # 3 = E/W right, 4 = N/S right.
    junction_approaches = {
        "i1": ("r03_i3_i1", "r07_i2_i1"),
        "i2": ("r02_i4_i2", "r04_i1_i2"),
        "i3": ("r05_i1_i3", "r06_i4_i3"),
        "i4": ("r08_i2_i4", "r01_i3_i4"),
    }
    signals = []
    for j in ("i1", "i2", "i3", "i4"):
        ns, ew = junction_approaches[j]
        phases = [
            {"movements": [movement_index[(ns, "through")], movement_index[(ns, "left")]]},
            {"movements": [movement_index[(ew, "through")], movement_index[(ew, "left")]]},
            {"movements": [movement_index[(ew, "right")]]},
            {"movements": [movement_index[(ns, "right")]]},
        ]
        signals.append(
            {
                "junction": j,
                "cycle_s": DEFAULT_CYCLE_S,
                "phases": phases,
                "initial_durations_s": [DEFAULT_CYCLE_S / 4] * 4,
            }
        )

    demand = [
        {"from": o, "to": d, "vph": float(v)}
        for o, row in demand_rows.items()
        for d, v in zip(range(1, 9), row)
    ]

    return load_network(
        {
            "nodes": nodes,
            "links": links,
            "movements": movements,
            "centroids": list(range(1, 9)),
            "demand": demand,
            "signals": signals,
        }
    )


# ---------------------------------------------------------------------------
# route enumeration


def enumerate_routes(net: Network, w, max_routes: int):
    """Loop-free routes for OD pair ``w`` as road-link id sequences.

    Routes are sorted by free-flow time, ties broken by the link-id
    sequence, and truncated to ``max_routes``.  Connector links are
    traversed but omitted from the returned sequences; they carry no cost
    worth reporting.
    """
    origin, dest = w
    if net.od[w] <= 0:
        raise ValueError(f"OD pair {w!r} has no positive demand")
    if max_routes <= 0:
        return []
    for ref in (origin, dest):
        if ref not in net.nodes:
            raise NetworkError(f"unknown node {ref!r} in OD pair")

    out = {}
    for link in sorted(net.links.values(), key=lambda l: str(l.id)):
        out.setdefault(link.from_node, []).append(link)

    routes = []

    def walk(node, visited, path):
        if node == dest:
            fft = sum(l.free_flow_time for l in path)
            roads = tuple(l.id for l in path if not l.connector)
            routes.append((fft, roads))
            return
        for link in out.get(node, ()):
            if link.to_node in visited:
                continue
            visited.add(link.to_node)
            path.append(link)
            walk(link.to_node, visited, path)
            path.pop()
            visited.remove(link.to_node)

    walk(origin, {origin}, [])
    if not routes:
        raise NetworkError(f"no path for demand between {origin!r} and {dest!r}")
    routes.sort(key=lambda r: (r[0], tuple(str(i) for i in r[1])))
    unique = []
    for _, roads in routes:
        if roads not in unique:
            unique.append(roads)
        if len(unique) == max_routes:
            break
    return [list(r) for r in unique]
