import json

import pytest
from hypothesis import given, settings, strategies as st

from signalopt.netmodel import (
    DEFAULT_LANE_CAPACITY_VPH,
    IncidentSpec,
    NetworkError,
    NodeKind,
    SINK_APPROACH_LINKS,
    SINK_LANE_CAPACITY_VPH,
    build_testbed,
    enumerate_routes,
    load_network,
    to_document,
)

from conftest import single_link_doc


class TestTestbed:
    def test_structure(self, testbed):
        assert len(testbed.signalized_nodes()) == 4
        assert len(testbed.centroids) == 8
        road = testbed.road_links()
        assert len(road) == 8
        assert all(l.signal_controlled for l in road)
        assert all(l.lanes == 2 for l in road)

    def test_demand_table(self, testbed):
        assert testbed.od[7, 3] == 750.0
        assert testbed.od[1, 2] == 150.0
        assert testbed.od[6, 5] == 0.0
        assert testbed.od.total() == 7500.0

    def test_diagonal_zero(self, testbed):
        for u in range(1, 9):
            assert testbed.od[u, u] == 0.0

    def test_row_and_column_totals(self, testbed):
        assert testbed.od.row_total(7) == 1550.0
        assert testbed.od.col_total(3) == 1450.0

    def test_deterministic(self):
        assert to_document(build_testbed()) == to_document(build_testbed())

    def test_link_defaults(self, testbed):
        for link in testbed.road_links():
            assert link.free_flow_time == 30.0
            expected = SINK_LANE_CAPACITY_VPH if link.id in SINK_APPROACH_LINKS else DEFAULT_LANE_CAPACITY_VPH
            assert link.capacity == expected * 2

    def test_connectors_are_inert(self, testbed):
        connectors = [l for l in testbed.links.values() if l.connector]
        assert len(connectors) == 16
        assert all(not l.signal_controlled for l in connectors)
        assert all(l.capacity >= 1e9 for l in connectors)

    def test_roundtrips_through_document(self, testbed):
        doc = to_document(testbed)
        again = load_network(json.loads(json.dumps(doc)))
        assert to_document(again) == doc

    def test_every_road_link_green_somewhere(self, testbed):
        granted = set()
        for table in testbed.signals:
            for phase in table.phases:
                for idx in phase:
                    granted.add(testbed.movements[idx].in_link)
        assert granted == {l.id for l in testbed.road_links()}


class TestLoader:
    def test_zero_capacity_rejected(self):
        doc = single_link_doc()
        doc["links"][0]["capacity_vph"] = 0.0
        with pytest.raises(NetworkError, match="non-positive capacity"):
            load_network(doc)

    def test_missing_node_reference(self):
        doc = single_link_doc()
        doc["links"][0]["to"] = "ghost"
        with pytest.raises(NetworkError, match="missing node reference"):
            load_network(doc)

    def test_unreachable_demand_names_the_pair(self):
        doc = single_link_doc()
        doc["demand"].append({"from": "cd", "to": "co", "vph": 5.0})
        with pytest.raises(NetworkError, match="'cd' and 'co'"):
            load_network(doc)

    def test_negative_demand_rejected(self):
        doc = single_link_doc()
        doc["demand"][0]["vph"] = -1.0
        with pytest.raises(NetworkError, match="negative"):
            load_network(doc)

    def test_duplicate_link_id_rejected(self):
        doc = single_link_doc()
        doc["links"].append(dict(doc["links"][0]))
        with pytest.raises(NetworkError, match="duplicate link id"):
            load_network(doc)

    def test_movement_must_join_at_a_node(self):
        doc = single_link_doc()
        doc["movements"] = [{"in_link": "road", "out_link": "x_co_o", "turn": "through"}]
        with pytest.raises(NetworkError, match="do not meet"):
            load_network(doc)

    def test_json_text_accepted(self):
        net = load_network(json.dumps(single_link_doc()))
        assert "road" in net.links

    def test_signal_phase_must_grant_green(self, testbed):
        doc = to_document(testbed)
        doc["signals"][0]["phases"][0]["movements"] = []
        with pytest.raises(NetworkError, match="no movement"):
            load_network(doc)


class TestEnumerateRoutes:
    def test_heavy_pair_has_two_routes(self, testbed):
        routes = enumerate_routes(testbed, (7, 3), max_routes=2)
        assert len(routes) == 2
        assert routes[0][0] != routes[1][0]
        assert len(routes[0]) == len(routes[1]) == 2
        assert routes == [["r01_i3_i4", "r02_i4_i2"], ["r03_i3_i1", "r04_i1_i2"]]

    def test_single_link_network(self):
        net = load_network(single_link_doc())
        assert enumerate_routes(net, ("co", "cd"), max_routes=5) == [["road"]]

    def test_zero_max_routes(self, testbed):
        assert enumerate_routes(testbed, (7, 3), max_routes=0) == []

    def test_requires_positive_demand(self, testbed):
        with pytest.raises(ValueError, match="positive demand"):
            enumerate_routes(testbed, (6, 5), max_routes=2)

    def test_sorted_by_free_flow_time(self, parallel_net):
        doc = to_document(parallel_net)
        doc["links"][1]["free_flow_time_s"] = 60.0  # slow down pb
        net = load_network(doc)
        routes = enumerate_routes(net, ("co", "cd"), max_routes=2)
        assert routes == [["pa"], ["pb"]]


class TestIncidentSpec:
    def test_negative_block_rejected(self):
        with pytest.raises(NetworkError):
            IncidentSpec("r04_i1_i2", lanes_blocked=-1)

    def test_times_ordered(self):
        with pytest.raises(NetworkError):
            IncidentSpec("r04_i1_i2", 1, start_h=1.0, end_h=0.5)

    def test_defaults_cover_the_hour(self):
        inc = IncidentSpec("r04_i1_i2", 1)
        assert (inc.start_h, inc.end_h) == (0.0, 1.0)


# -- generated-document property tests --------------------------------------

_ids = st.integers(min_value=0, max_value=6)


@st.composite
def chain_documents(draw):
    """Random chain networks: centroid -> n road nodes -> centroid."""
    n = draw(st.integers(min_value=2, max_value=5))
    nodes = [{"id": f"n{i}", "kind": "plain-junction"} for i in range(n)]
    nodes[-1]["kind"] = "signalized-intersection"
    nodes += [
        {"id": "a", "kind": "centroid-connector"},
        {"id": "b", "kind": "centroid-connector"},
    ]
    links = []
    for i in range(n - 1):
        links.append(
            {
                "id": f"l{i}",
                "from": f"n{i}",
                "to": f"n{i+1}",
                "free_flow_time_s": draw(st.floats(min_value=1.0, max_value=120.0)),
                "capacity_vph": draw(st.floats(min_value=100.0, max_value=5000.0)),
                "lanes": draw(st.integers(min_value=1, max_value=4)),
            }
        )
    links.append({"id": "xa", "from": "a", "to": "n0", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1})
    links.append({"id": "xb", "from": f"n{n-1}", "to": "b", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1})
    demand = draw(st.floats(min_value=0.0, max_value=4000.0))
    return {
        "nodes": nodes,
        "links": links,
        "movements": [],
        "centroids": ["a", "b"],
        "demand": [{"from": "a", "to": "b", "vph": demand}],
    }


@given(chain_documents())
@settings(max_examples=60, deadline=None)
def test_loaded_networks_satisfy_invariants(doc):
    net = load_network(doc)
    ids = [str(l.id) for l in net.links.values()]
    assert len(ids) == len(set(ids))
    for link in net.links.values():
        assert link.capacity > 0
        assert link.free_flow_time > 0
        assert link.from_node != link.to_node
        assert link.from_node in net.nodes and link.to_node in net.nodes
        assert link.signal_controlled == (
            not link.connector and net.nodes[link.to_node].kind is NodeKind.SIGNALIZED
        )
    for (o, d), v in net.od.pairs():
        assert v >= 0
        assert o != d or v == 0
    assert to_document(load_network(to_document(net))) == to_document(net)
