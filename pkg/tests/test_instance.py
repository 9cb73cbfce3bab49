import pytest

from ammdrpg.geometry import Point
from ammdrpg.instance import (
    FormatError,
    Instance,
    VisitMode,
    generate_grid_instance,
    load_instance,
    make_graph,
    save_instance,
    validate_instance,
)

BBOX = (0.0, 0.0, 100.0, 100.0)


def gen(seed=1, n_graphs=5, mode="edge", n_drones=2, endurance=30.0):
    return generate_grid_instance(seed, n_graphs, BBOX, n_drones, endurance, mode)


def test_node_count_mix_five_graphs():
    inst = gen(seed=1, n_graphs=5)
    counts = sorted(len(g.nodes) for g in inst.graphs)
    assert counts == [4, 6, 8, 10, 12]


def test_node_count_mix_ten_graphs():
    inst = gen(seed=1, n_graphs=10)
    counts = [len(g.nodes) for g in inst.graphs]
    for c in (4, 6, 8, 10, 12):
        assert counts.count(c) == 2


def test_generator_deterministic():
    assert save_instance(gen(seed=7)) == save_instance(gen(seed=7))
    assert save_instance(gen(seed=7)) != save_instance(gen(seed=8))


def test_generator_speeds_and_wellformed():
    for mode in ("edge", "graph"):
        inst = gen(seed=3, mode=mode)
        assert inst.v_d == 2.0 * inst.v_m
        assert validate_instance(inst) == []


def test_generated_graphs_cell_disjoint():
    inst = gen(seed=5, n_graphs=9)
    boxes = []
    for g in inst.graphs:
        xs = [p.x for p in g.nodes]
        ys = [p.y for p in g.nodes]
        boxes.append((min(xs), min(ys), max(xs), max(ys)))
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[j]
            overlap = not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])
            assert not overlap


def test_generated_alpha_in_unit_interval():
    inst_e = gen(seed=11, mode="edge")
    for g in inst_e.graphs:
        for e in g.edges:
            assert 0.0 < e.alpha_edge <= 1.0
    inst_g = gen(seed=11, mode="graph")
    for g in inst_g.graphs:
        assert 0.0 < g.alpha_graph <= 1.0


def test_save_load_round_trip():
    for mode in ("edge", "graph"):
        inst = gen(seed=2, mode=mode)
        text = save_instance(inst)
        again = load_instance(text)
        assert save_instance(again) == text
        assert again == inst


def test_load_missing_vd_names_field():
    inst = gen(seed=2)
    text = save_instance(inst).replace(" vd ", " xx ")
    with pytest.raises(FormatError, match="vd"):
        load_instance(text)


def test_load_rejects_bad_header():
    with pytest.raises(FormatError, match="header"):
        load_instance("something-else v9\n")


def test_case_study_shape_loads():
    # six targets, three drones, fast fleet, two-hour endurance, full coverage
    graphs = []
    for gid in range(6):
        x = 10.0 * gid
        graphs.append(make_graph(gid, [(x, 10.0), (x + 4.0, 10.0), (x + 4.0, 14.0)],
                                 [(0, 1, 1.0), (1, 2, 1.0)]))
    inst = Instance(Point(0, 0), Point(60, 0), tuple(graphs),
                    n_drones=3, v_m=50.0, v_d=100.0, endurance=2.0,
                    visit_mode=VisitMode.PerEdge)
    assert validate_instance(inst) == []
    again = load_instance(save_instance(inst))
    assert again == inst
    assert again.n_drones == 3 and again.v_d == 100.0 and again.endurance == 2.0


def test_validate_codes():
    g_ok = make_graph(0, [(0.0, 0.0), (1.0, 0.0)], [(0, 1, 0.5)])
    ok = Instance(Point(0, 0), Point(5, 0), (g_ok,), 1, 1.0, 2.0, 5.0,
                  VisitMode.PerEdge)
    assert validate_instance(ok) == []

    g_zero = make_graph(0, [(0.0, 0.0), (0.0, 0.0)], [(0, 1, 0.5)])
    bad = Instance(Point(0, 0), Point(5, 0), (g_zero,), 1, 1.0, 2.0, 5.0,
                   VisitMode.PerEdge)
    codes = validate_instance(bad)
    assert any(c.startswith("ZeroLengthEdge") for c in codes)

    empty_fleet = Instance(Point(0, 0), Point(5, 0), (g_ok,), 0, 1.0, 2.0, 5.0,
                           VisitMode.PerEdge)
    assert "EmptyFleet" in validate_instance(empty_fleet)

    g_disc = make_graph(0, [(0.0, 0.0), (1.0, 0.0), (5.0, 5.0), (6.0, 5.0)],
                        [(0, 1, 0.5), (2, 3, 0.5)])
    disc = Instance(Point(0, 0), Point(5, 0), (g_disc,), 1, 1.0, 2.0, 5.0,
                    VisitMode.PerEdge)
    assert any(c.startswith("DisconnectedGraph") for c in validate_instance(disc))

    alpha_bad = make_graph(0, [(0.0, 0.0), (1.0, 0.0)], [(0, 1, 1.5)])
    inst_a = Instance(Point(0, 0), Point(5, 0), (alpha_bad,), 1, 1.0, 2.0, 5.0,
                      VisitMode.PerEdge)
    assert any(c.startswith("AlphaOutOfRange") for c in validate_instance(inst_a))


def test_bbox_and_lookup():
    inst = gen(seed=4, n_graphs=2)
    x0, y0, x1, y1 = inst.bounding_box()
    assert x0 <= inst.origin.x <= x1 and y0 <= inst.origin.y <= y1
    g = inst.graphs[1]
    assert inst.graph(g.id) is g
    with pytest.raises(KeyError):
        inst.graph(999)
