import pytest

from signalopt.netmodel import build_testbed, load_network


@pytest.fixture(scope="session")
def testbed():
    return build_testbed()


def parallel_pair_doc(t0_a=30.0, t0_b=30.0, cap_a=3600.0, cap_b=3600.0, demand=2000.0):
    """Two parallel road links between one origin and one destination."""
    return {
        "nodes": [
            {"id": "o", "kind": "plain-junction", "x": 0, "y": 0},
            {"id": "d", "kind": "plain-junction", "x": 1, "y": 0},
            {"id": "co", "kind": "centroid-connector", "x": -1, "y": 0},
            {"id": "cd", "kind": "centroid-connector", "x": 2, "y": 0},
        ],
        "links": [
            {"id": "pa", "from": "o", "to": "d", "free_flow_time_s": t0_a, "capacity_vph": cap_a, "lanes": 2},
            {"id": "pb", "from": "o", "to": "d", "free_flow_time_s": t0_b, "capacity_vph": cap_b, "lanes": 2},
            {"id": "x_co_o", "from": "co", "to": "o", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
            {"id": "x_d_cd", "from": "d", "to": "cd", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
        ],
        "movements": [],
        "centroids": ["co", "cd"],
        "demand": [{"from": "co", "to": "cd", "vph": demand}],
    }


@pytest.fixture
def parallel_net():
    return load_network(parallel_pair_doc())


def single_link_doc(demand=1000.0):
    return {
        "nodes": [
            {"id": "o", "kind": "plain-junction"},
            {"id": "d", "kind": "plain-junction"},
            {"id": "co", "kind": "centroid-connector"},
            {"id": "cd", "kind": "centroid-connector"},
        ],
        "links": [
            {"id": "road", "from": "o", "to": "d", "free_flow_time_s": 30.0, "capacity_vph": 3600.0, "lanes": 2},
            {"id": "x_co_o", "from": "co", "to": "o", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
            {"id": "x_d_cd", "from": "d", "to": "cd", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
        ],
        "movements": [],
        "centroids": ["co", "cd"],
        "demand": [{"from": "co", "to": "cd", "vph": demand}],
    }


def toy_junction_doc(demand_ns=1100.0, demand_ew=700.0, cap=1800.0):
    """One signalized junction with two competing approaches and one exit.

    Two phases: phase 1 gives green to the first approach's movement, phase
    2 to the second.  The search space is effectively one-dimensional.
    """
    return {
        "nodes": [
            {"id": "u1", "kind": "plain-junction", "x": 0, "y": 1},
            {"id": "u2", "kind": "plain-junction", "x": -1, "y": 0},
            {"id": "j1", "kind": "signalized-intersection", "x": 0, "y": 0},
            {"id": "u3", "kind": "plain-junction", "x": 1, "y": 0},
            {"id": "ca", "kind": "centroid-connector", "x": 0, "y": 2},
            {"id": "cb", "kind": "centroid-connector", "x": -2, "y": 0},
            {"id": "cz", "kind": "centroid-connector", "x": 2, "y": 0},
        ],
        "links": [
            {"id": "m1_u1_j1", "from": "u1", "to": "j1", "free_flow_time_s": 30.0, "capacity_vph": cap, "lanes": 2},
            {"id": "m2_u2_j1", "from": "u2", "to": "j1", "free_flow_time_s": 30.0, "capacity_vph": cap, "lanes": 2},
            {"id": "m3_j1_u3", "from": "j1", "to": "u3", "free_flow_time_s": 30.0, "capacity_vph": 7200.0, "lanes": 4},
            {"id": "x_ca_u1", "from": "ca", "to": "u1", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
            {"id": "x_cb_u2", "from": "cb", "to": "u2", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
            {"id": "x_u3_cz", "from": "u3", "to": "cz", "free_flow_time_s": 0.001, "capacity_vph": 1e9, "lanes": 1},
        ],
        "movements": [
            {"in_link": "m1_u1_j1", "out_link": "m3_j1_u3", "turn": "left"},
            {"in_link": "m2_u2_j1", "out_link": "m3_j1_u3", "turn": "through"},
        ],
        "centroids": ["ca", "cb", "cz"],
        "demand": [
            {"from": "ca", "to": "cz", "vph": demand_ns},
            {"from": "cb", "to": "cz", "vph": demand_ew},
        ],
        "signals": [
            {
                "junction": "j1",
                "cycle_s": 90.0,
                "phases": [{"movements": [0]}, {"movements": [1]}],
                "initial_durations_s": [45.0, 45.0],
            }
        ],
    }


@pytest.fixture
def toy_junction_net():
    return load_network(toy_junction_doc())
