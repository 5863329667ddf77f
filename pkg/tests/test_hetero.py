import numpy as np
import pytest

from omicgat.errors import DataError
from omicgat.graphs import SimilarityGraph
from omicgat.hetero import (
    FEATURE,
    PATIENT,
    R_FAP,
    R_FSF,
    R_PSP,
    HeteroGraph,
    assemble,
    restrict_feature_net,
)


def tiny_inputs():
    """2 features x 3 patients with one feature edge and one patient edge."""
    patient_values = np.array([[0.1, 0.9], [0.2, 0.8], [0.3, 0.7]])
    feature_profiles = patient_values.T  # training patients = all three
    relevance = np.array([0.5, 0.6])
    node_tau = np.array([0.2, 0.3])
    feature_edges = (
        np.array([0]), np.array([1]), np.array([0.4]), np.array([0.25]),
    )
    patient_edges = (np.array([0]), np.array([2]), np.array([0.7]))
    return patient_values, feature_profiles, relevance, node_tau, feature_edges, patient_edges


def test_complete_bipartite_edge_count():
    graph = assemble(*tiny_inputs())
    assert graph.relations[R_FAP].edge_count == 2 * 3


def test_empty_patient_net_still_valid():
    pv, fp, rel, tau, fe, _ = tiny_inputs()
    graph = assemble(pv, fp, rel, tau, fe, (np.array([]), np.array([]), np.array([])))
    assert graph.relations[R_PSP].edge_count == 0
    graph.validate()


def test_hand_assembled_attribute_tensors():
    pv, fp, rel, tau, fe, pe = tiny_inputs()
    graph = assemble(pv, fp, rel, tau, fe, pe)

    assert np.array_equal(graph.node_attrs[PATIENT], pv)
    expected_feature_attrs = np.array(
        [[0.1, 0.2, 0.3, 0.5, 0.2], [0.9, 0.8, 0.7, 0.6, 0.3]]
    )
    assert np.allclose(graph.node_attrs[FEATURE], expected_feature_attrs)

    fsf = graph.relations[R_FSF]
    assert np.array_equal(fsf.src, [0, 1])  # both directions
    assert np.array_equal(fsf.dst, [1, 0])
    assert np.allclose(fsf.edge_attr, [[0.4, 0.25], [0.4, 0.25]])

    psp = graph.relations[R_PSP]
    assert np.array_equal(psp.src, [0, 2])
    assert np.array_equal(psp.dst, [2, 0])
    assert np.allclose(psp.edge_attr, [[0.7], [0.7]])

    fap = graph.relations[R_FAP]
    # feature-major ordering: (f0,p0), (f0,p1), (f0,p2), (f1,p0)...
    assert np.array_equal(fap.src, [0, 0, 0, 1, 1, 1])
    assert np.array_equal(fap.dst, [0, 1, 2, 0, 1, 2])
    assert np.allclose(fap.edge_attr[:, 0], [0.1, 0.2, 0.3, 0.9, 0.8, 0.7])


def test_relation_endpoint_types_consistent():
    graph = assemble(*tiny_inputs())
    assert graph.relations[R_PSP].src_type == PATIENT
    assert graph.relations[R_PSP].dst_type == PATIENT
    assert graph.relations[R_FSF].src_type == FEATURE
    assert graph.relations[R_FSF].dst_type == FEATURE
    assert graph.relations[R_FAP].src_type == FEATURE
    assert graph.relations[R_FAP].dst_type == PATIENT


def test_assembly_deterministic():
    a = assemble(*tiny_inputs())
    b = assemble(*tiny_inputs())
    for name in a.relations:
        assert np.array_equal(a.relations[name].edge_attr, b.relations[name].edge_attr)
    for t in (PATIENT, FEATURE):
        assert np.array_equal(a.node_attrs[t], b.node_attrs[t])


def test_ablation_homogeneous_drops_feature_relation():
    graph = assemble(*tiny_inputs(), ablation="homogeneous")
    assert R_FSF not in graph.relations
    assert R_PSP in graph.relations and R_FAP in graph.relations


def test_ablation_no_edge_attr_zeroes_feature_edges():
    graph = assemble(*tiny_inputs(), ablation="no-edge-attr")
    assert np.all(graph.relations[R_FSF].edge_attr == 0.0)
    # value-bearing relations keep their attributes
    assert np.any(graph.relations[R_FAP].edge_attr != 0.0)


def test_ablation_no_node_attr_zeroes_relevance_and_tau():
    graph = assemble(*tiny_inputs(), ablation="no-node-attr")
    assert np.all(graph.node_attrs[FEATURE][:, -2:] == 0.0)
    assert np.any(graph.node_attrs[FEATURE][:, :-2] != 0.0)


def test_unknown_ablation_rejected():
    with pytest.raises(DataError, match="unknown ablation"):
        assemble(*tiny_inputs(), ablation="bogus")


def test_profile_dimension_mismatch_rejected():
    pv, fp, rel, tau, fe, pe = tiny_inputs()
    with pytest.raises(DataError, match="profile count"):
        assemble(pv, fp[:1], rel, tau, fe, pe)


def test_restrict_feature_net_reindexes():
    net = SimilarityGraph(
        node_count=5,
        edges_u=np.array([0, 1, 2, 3]),
        edges_v=np.array([1, 2, 4, 4]),
        weights=np.array([0.1, 0.2, 0.3, 0.4]),
        kind="feature-net",
    )
    edge_tau = np.array([1.0, 2.0, 3.0, 4.0])
    u, v, w, t = restrict_feature_net(net, edge_tau, selected=[1, 2, 4])
    # kept edges: (1,2) and (2,4) -> positions (0,1) and (1,2)
    assert np.array_equal(u, [0, 1])
    assert np.array_equal(v, [1, 2])
    assert np.allclose(w, [0.2, 0.3])
    assert np.allclose(t, [2.0, 3.0])


def test_graph_roundtrip(tmp_path):
    graph = assemble(*tiny_inputs())
    graph.save(tmp_path / "g")
    back = HeteroGraph.load(tmp_path / "g")
    for t in (PATIENT, FEATURE):
        assert np.allclose(back.node_attrs[t], graph.node_attrs[t], atol=1e-15)
    for name in graph.relations:
        assert np.array_equal(back.relations[name].src, graph.relations[name].src)
        assert np.array_equal(back.relations[name].dst, graph.relations[name].dst)
        assert np.allclose(
            back.relations[name].edge_attr, graph.relations[name].edge_attr, atol=1e-15
        )


def test_copy_is_deep():
    graph = assemble(*tiny_inputs())
    clone = graph.copy()
    clone.node_attrs[PATIENT][:] = 0.0
    clone.relations[R_FAP].edge_attr[:] = 0.0
    assert np.any(graph.node_attrs[PATIENT] != 0.0)
    assert np.any(graph.relations[R_FAP].edge_attr != 0.0)
