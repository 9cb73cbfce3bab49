"""Builder census, big-M tables, McCormick rows, SEC separation, emission."""

import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ammdrpg.geometry import Point, dist
from ammdrpg.instance import Instance, VisitMode, make_graph, generate_grid_instance
from ammdrpg.model_ir import (
    BINARY,
    CONTINUOUS,
    _Build,
    big_m_bounds,
    build_async_model,
    build_sync_model,
    emit_lp,
    model_stats,
    parse_lp,
    separate_sec,
)


def census_instance():
    g = make_graph(0, [(10.0, -1.0), (10.0, 1.0), (12.0, 1.0)],
                   [(0, 1, 1.0), (1, 2, 1.0)])
    return Instance(origin=Point(0, 0), destination=Point(20, 0), graphs=(g,),
                    n_drones=1, v_m=1.0, v_d=2.0, endurance=10.0,
                    visit_mode=VisitMode.PerEdge)


def two_graph_instance(n_drones=1, visit_mode=VisitMode.PerEdge):
    g0 = make_graph(0, [(2.0, 2.0), (2.0, 3.0), (3.0, 3.0)],
                    [(0, 1, 0.5), (1, 2, 0.5)], alpha_graph=0.5)
    g1 = make_graph(1, [(6.0, 2.0), (6.0, 3.0)], [(0, 1, 1.0)],
                    alpha_graph=1.0)
    return Instance(origin=Point(0, 0), destination=Point(9, 0),
                    graphs=(g0, g1), n_drones=n_drones, v_m=1.0, v_d=2.0,
                    endurance=8.0, visit_mode=visit_mode)


# ---------------------------------------------------------------- census

def test_census_variable_count_frozen():
    st_ = model_stats(build_sync_model(census_instance()))
    assert st_["totals"] == {"variables": 61, "linear": 77, "soc": 11}


def test_census_per_family_frozen():
    st_ = model_stats(build_sync_model(census_instance()))
    assert st_["variables"] == {
        "u": 2, "v": 2, "z": 2, "mu": 2, "entry": 2, "s": 2,
        "rho": 2, "lam": 2, "numin": 2, "numax": 2,
        "xL": 6, "xR": 6, "R": 4, "L": 4,
        "dL": 2, "dE": 2, "dP": 2, "dR": 2, "dRL": 2, "dLR": 1,
        "pL": 2, "pR": 2, "pP": 2, "pMu": 2, "q": 2,
    }
    assert st_["linear"] == {
        "asg1": 1, "asg2": 1, "asg3": 1, "asg4": 1, "asg5": 1,
        "asg6": 2, "asg7": 2, "mtz": 2,
        "cov_abs": 2, "cov_dir": 4, "cov_mc": 8, "cov_req": 2,
        "param": 8, "dcw": 1,
        "mc_launch": 8, "mc_retrieve": 8, "mc_pair": 8, "mc_edge": 8,
        "cap": 1, "boundary": 8,
    }
    assert st_["soc"] == {
        "dist_launch": 2, "dist_edge": 2, "dist_pair": 2,
        "dist_retrieve": 2, "dist_bridge": 2, "dist_stage": 1,
    }


def test_objective_is_every_leg_once():
    m = build_sync_model(two_graph_instance())
    names = {m.var_name(v) for v, c in m.objective}
    assert all(c == 1.0 for _, c in m.objective)
    assert names == {"dRL_t0", "dRL_t1", "dRL_t2", "dLR_t1", "dLR_t2"}


def test_empty_instance_builds_degenerate_model():
    i = Instance(origin=Point(0, 0), destination=Point(3, 4), graphs=(),
                 n_drones=1, v_m=1.0, v_d=2.0, endurance=1.0,
                 visit_mode=VisitMode.PerEdge)
    m = build_sync_model(i)
    st_ = model_stats(m)
    assert st_["totals"] == {"variables": 9, "linear": 8, "soc": 1}
    assert [m.var_name(v) for v, _ in m.objective] == ["dRL_t0"]


def test_sec_mode_drops_ordering_rows_and_vars():
    m = build_sync_model(census_instance(), subtour="sec")
    st_ = model_stats(m)
    assert "s" not in st_["variables"]
    assert "mtz" not in st_["linear"]
    assert st_["totals"]["variables"] == 59
    assert st_["totals"]["linear"] == 75


def test_bad_subtour_flag_rejected():
    with pytest.raises(ValueError):
        build_sync_model(census_instance(), subtour="dfj")


def test_boundary_rows_pin_depots():
    i = two_graph_instance()
    m = build_sync_model(i)
    pins = {r.name: r.rhs for r in m.linear if r.tag == "boundary"}
    assert pins["bnd_orig_xL_x"] == i.origin.x
    assert pins["bnd_orig_xR_y"] == i.origin.y
    assert pins["bnd_dest_xL_x"] == i.destination.x
    assert pins["bnd_dest_xR_y"] == i.destination.y
    assert len(pins) == 8


# ---------------------------------------------------------------- big-M

def test_m_launch_is_point_diameter():
    g = make_graph(0, [(0.0, 0.0), (3.0, 4.0)], [(0, 1, 1.0)])
    i = Instance(origin=Point(0, 0), destination=Point(0, 0), graphs=(g,),
                 n_drones=1, v_m=1.0, v_d=1.0, endurance=1.0,
                 visit_mode=VisitMode.PerEdge)
    bm = big_m_bounds(i)
    assert bm.m_launch == pytest.approx(5.0)
    assert bm.m_retrieve == pytest.approx(5.0)


def test_pair_bounds_parallel_unit_edges():
    g = make_graph(0, [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
                   [(0, 1, 1.0), (2, 3, 1.0)])
    i = Instance(origin=Point(0, 0), destination=Point(1, 1), graphs=(g,),
                 n_drones=1, v_m=1.0, v_d=1.0, endurance=1.0,
                 visit_mode=VisitMode.PerEdge)
    bm = big_m_bounds(i)
    assert bm.m_pair[(0, 0, 1)] == pytest.approx(math.sqrt(2.0))
    assert bm.m_pair_lo[(0, 0, 1)] == pytest.approx(1.0)
    assert bm.m_pair[(0, 1, 0)] == pytest.approx(math.sqrt(2.0))


def test_pair_lo_never_exceeds_pair_hi_on_generated_instances():
    for seed in range(6):
        i = generate_grid_instance(seed, 4, (0.0, 0.0, 100.0, 100.0), 2, 30.0,
                                   VisitMode.PerEdge)
        bm = big_m_bounds(i)
        for key, hi in bm.m_pair.items():
            assert bm.m_pair_lo[key] <= hi + 1e-12
        for g in i.graphs:
            assert bm.m_op[g.id] >= g.total_length


# ------------------------------------------------------------- McCormick

def _p_interval(rows, pvid, assign):
    lo, hi = -math.inf, math.inf
    for r in rows:
        coef = dict(r.terms)
        rest = sum(c * assign[v] for v, c in r.terms if v != pvid)
        bound = (r.rhs - rest) / coef[pvid]
        if r.sense == "<=":
            hi = min(hi, bound)
        elif r.sense == ">=":
            lo = max(lo, bound)
    return lo, hi


def _mccormick_rows(lo, hi):
    B = _Build()
    p = B.var("p", 0, "p_0", CONTINUOUS, -math.inf, math.inf)
    b = B.var("b", 0, "b_0", BINARY, 0.0, 1.0)
    d = B.var("d", 0, "d_0", CONTINUOUS, lo, hi)
    B.mccormick("mc", "mc_0", p, b, d, lo, hi)
    return B.linear, p, b, d


@given(st.floats(-5, 5), st.floats(0, 10), st.floats(0, 1),
       st.booleans())
@settings(max_examples=300, deadline=None)
def test_mccormick_rows_pin_product_at_binary_b(lo, width, frac, bit):
    hi = lo + width
    d_val = lo + frac * width
    rows, p, b, d = _mccormick_rows(lo, hi)
    assert len(rows) == 4
    plo, phi = _p_interval(rows, p, {b: 1.0 if bit else 0.0, d: d_val})
    want = d_val if bit else 0.0
    # rows are evaluated as floating dot products, so allow roundoff slack
    tol = 1e-12 * (1.0 + abs(lo) + abs(hi) + abs(d_val))
    assert plo - tol <= want <= phi + tol
    assert phi - plo <= tol


def test_mccormick_exact_at_endpoints():
    rows, p, b, d = _mccormick_rows(2.0, 7.0)
    lo, hi = _p_interval(rows, p, {b: 1.0, d: 3.5})
    assert lo == 3.5 and hi == 3.5
    lo, hi = _p_interval(rows, p, {b: 0.0, d: 6.0})
    assert lo == 0.0 and hi == 0.0


# ------------------------------------------------------- mode and flag axes

def test_async_single_stage_matches_sync_structure():
    i = census_instance()
    ms, ma = build_sync_model(i), build_async_model(i)
    ss, sa = model_stats(ms), model_stats(ma)
    assert ss["variables"] == sa["variables"]
    assert ss["soc"] == sa["soc"]
    rename = dict(sa["linear"])
    rename["asg5"] = rename.pop("asg8")
    rename["dcw"] = rename.pop("dcws")
    assert rename == ss["linear"]
    assert "win_u" not in sa["linear"] and "win_v" not in sa["linear"]


def test_async_has_more_coordination_rows_with_two_stages():
    i = two_graph_instance()
    ss = model_stats(build_sync_model(i))
    sa = model_stats(build_async_model(i))
    assert ss["linear"]["dcw"] == 4          # 2 graphs x 2 stages x 1 drone
    assert sa["linear"]["dcws"] == 6         # 2 graphs x {(1,1),(1,2),(2,2)}
    assert sa["linear"]["dcws"] > ss["linear"]["dcw"]
    assert sa["linear"]["win_u"] == 2        # (t1,t2)=(1,2) per graph
    assert sa["linear"]["win_v"] == 2


def test_async_launch_retrieve_coupling_row():
    m = build_async_model(two_graph_instance())
    rows = [r for r in m.linear if r.tag == "asg8"]
    assert len(rows) == 4
    r = next(r for r in rows if r.name == "asg8_g0_t1_d1")
    assert r.sense == "<="
    coefs = {m.var_name(v): c for v, c in r.terms}
    assert coefs["u_g0_e0_t1_d1"] == 1.0
    assert coefs["v_g0_e0_t1_d1"] == -1.0
    assert coefs["v_g0_e0_t2_d1"] == -1.0


def test_airborne_window_blocks_relaunch():
    m = build_async_model(two_graph_instance())
    r = next(r for r in m.linear if r.name == "win_u_g0_d1_t1_t2")
    coefs = {m.var_name(v): c for v, c in r.terms}
    # launch@1 retrieve@2 on g0 active -> no launch for any graph at stage 2
    assert coefs["u_g0_e0_t1_d1"] == 2.0     # big-M |T| on the activation
    assert coefs["v_g0_e0_t2_d1"] == 2.0
    assert coefs["u_g1_e0_t2_d1"] == 1.0
    assert r.sense == "<=" and r.rhs == 4.0


def test_vi_rows_present_and_indexed_from_second_drone():
    i = two_graph_instance(n_drones=2)
    st_ = model_stats(build_sync_model(i, valid_inequalities=True))
    assert st_["linear"]["vi3"] == 2         # d=2 at each of 2 stages
    assert st_["linear"]["vi4"] == 2
    assert st_["linear"]["vi_mono"] == 1
    assert st_["linear"]["vi1"] == 2
    assert st_["linear"]["vi2"] == 2
    assert st_["linear"]["vi_kdef"] == 2
    assert st_["variables"]["beta"] == 2
    assert st_["variables"]["k"] == 2


def test_vi_off_means_no_vi_rows():
    st_ = model_stats(build_sync_model(two_graph_instance(n_drones=2)))
    assert not any(t.startswith("vi") for t in st_["linear"])
    assert "beta" not in st_["variables"]


def test_single_drone_has_no_symmetry_rows():
    st_ = model_stats(build_sync_model(two_graph_instance(n_drones=1),
                                       valid_inequalities=True))
    assert "vi3" not in st_["linear"]
    assert "vi4" not in st_["linear"]
    assert st_["linear"]["vi1"] == 2


def test_stage_cap_flag_restores_displayed_rows():
    i = two_graph_instance(n_drones=2)
    canonical = build_sync_model(i)
    literal = build_sync_model(i, paper_literal_stage_cap=True)
    cs, ls = model_stats(canonical), model_stats(literal)
    assert cs["linear"]["asg1"] == 4         # per (t,d)
    assert ls["linear"]["asg1"] == 2         # per t, summed over drones
    row = next(r for r in literal.linear if r.tag == "asg1")
    assert len(row.terms) == 6               # 3 edges x 2 drones
    assert row.rhs == 1.0


def test_capacity_flag_changes_units():
    g = make_graph(0, [(1.0, 1.0), (1.0, 2.0)], [(0, 1, 1.0)])
    i = Instance(origin=Point(0, 0), destination=Point(3, 0), graphs=(g,),
                 n_drones=1, v_m=2.0, v_d=4.0, endurance=3.0,
                 visit_mode=VisitMode.PerEdge)
    cap = next(r for r in build_sync_model(i).linear if r.tag == "cap")
    lit = next(r for r in build_sync_model(i, paper_literal_cap=True).linear
               if r.tag == "cap")
    assert cap.rhs == pytest.approx(6.0)     # v_m * endurance
    assert lit.rhs == pytest.approx(3.0)     # endurance as plain bound


def test_zero_alpha_edge_mode_makes_coverage_vacuous():
    g = make_graph(0, [(1.0, 1.0), (1.0, 2.0), (2.0, 2.0)],
                   [(0, 1, 0.0), (1, 2, 0.0)])
    i = Instance(origin=Point(0, 0), destination=Point(3, 0), graphs=(g,),
                 n_drones=1, v_m=1.0, v_d=2.0, endurance=5.0,
                 visit_mode=VisitMode.PerEdge)
    m = build_sync_model(i)
    req = [r for r in m.linear if r.tag == "cov_req"]
    assert all(r.rhs == 0.0 and r.sense == ">=" for r in req)


def test_graph_mode_coverage_is_one_length_weighted_row_per_graph():
    i = two_graph_instance(visit_mode=VisitMode.WholeGraph)
    m = build_sync_model(i)
    req = [r for r in m.linear if r.tag == "cov_req"]
    assert len(req) == 2
    g0 = i.graph(0)
    row = next(r for r in req if r.name == "cov_req_g0")
    assert row.rhs == pytest.approx(g0.alpha_graph * g0.total_length)
    assert sorted(c for _, c in row.terms) == pytest.approx(
        sorted(e.length for e in g0.edges))


# ---------------------------------------------------------------- emission

def test_emit_twice_is_byte_identical():
    i = two_graph_instance(n_drones=2)
    assert emit_lp(build_sync_model(i)) == emit_lp(build_sync_model(i))
    assert emit_lp(build_async_model(i)) == emit_lp(build_async_model(i))


def test_emit_round_trips_through_self_parser():
    m = build_sync_model(two_graph_instance(n_drones=2),
                         valid_inequalities=True)
    parsed = parse_lp(emit_lp(m))
    names = {v.name for v in m.variables}
    assert parsed["n_variables"] == len(m.variables)
    assert parsed["n_linear"] == len(m.linear)
    assert parsed["n_soc"] == len(m.soc)
    assert parsed["objective_terms"] == len(m.objective)
    assert parsed["variables"] == names
    assert parsed["referenced"] <= names
    assert parsed["binaries"] == {v.name for v in m.variables
                                  if v.kind == BINARY}


def test_emitted_census_file_has_golden_line_count():
    # 2 objective + 1 header + 77 linear + 11 quadratic + 1 Bounds
    # + 51 bound lines + 1 Binaries + 2 name lines + 1 End = 147
    text = emit_lp(build_sync_model(census_instance()))
    assert len(text.splitlines()) == 147


def test_every_emitted_name_resolves():
    m = build_async_model(two_graph_instance(n_drones=2))
    parsed = parse_lp(emit_lp(m))
    names = {v.name for v in m.variables}
    assert parsed["referenced"] <= names


# ---------------------------------------------------------- SEC separation

def path_graph(n):
    nodes = [(float(k), 0.0) for k in range(n + 1)]
    return make_graph(0, nodes, [(k, k + 1, 1.0) for k in range(n)])


def zmap(pairs, n):
    z = {(a, b): 0 for a in range(n) for b in range(n) if a != b}
    for a, b in pairs:
        z[(a, b)] = 1
    return z


def test_sec_planted_two_cycle_beside_path():
    g = path_graph(4)
    cut = separate_sec(zmap([(0, 1), (1, 0), (2, 3)], 4), g)
    assert cut is not None
    assert cut.rhs == 1.0
    assert {k for k, _ in cut.terms} == {(0, 1), (1, 0)}


def test_sec_all_zero_and_hamiltonian_path_return_nothing():
    g = path_graph(4)
    assert separate_sec(zmap([], 4), g) is None
    assert separate_sec(zmap([(0, 1), (1, 2), (2, 3)], 4), g) is None


def test_sec_full_cycle_has_no_strict_subset_cut():
    g = path_graph(3)
    assert separate_sec(zmap([(0, 1), (1, 2), (2, 0)], 3), g) is None


def test_sec_partial_cycle_is_cut_with_minimal_cardinality():
    g = path_graph(5)
    cut = separate_sec(zmap([(0, 1), (1, 2), (2, 0), (3, 4), (4, 3)], 5), g)
    assert cut is not None
    assert {k for k, _ in cut.terms} == {(3, 4), (4, 3)}
    assert cut.rhs == 1.0


def test_sec_cut_is_violated_by_at_least_one():
    g = path_graph(4)
    z = zmap([(0, 1), (1, 0), (2, 3)], 4)
    cut = separate_sec(z, g)
    lhs = sum(c * z[k] for k, c in cut.terms)
    assert lhs >= cut.rhs + 1.0


def _brute_min_violated(z, n):
    best = None
    for size in range(1, n):
        for combo in itertools.combinations(range(n), size):
            inside = sum(z[(a, b)] for a in combo for b in combo if a != b)
            if inside >= size:
                best = combo
                break
        if best is not None:
            break
    return best


def test_sec_matches_subset_brute_force_exhaustively_small():
    for n in (2, 3, 4):
        g = path_graph(n)
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        for bits in range(2 ** len(pairs)):
            z = {p: (bits >> k) & 1 for k, p in enumerate(pairs)}
            cut = separate_sec(z, g)
            brute = _brute_min_violated(z, n)
            if brute is None:
                assert cut is None
            else:
                assert cut is not None
                got = {k for k, _ in cut.terms}
                want_size = len(brute)
                got_edges = {e for pair in got for e in pair}
                assert len(got_edges) == want_size
                lhs = sum(c * z[k] for k, c in cut.terms)
                assert lhs >= cut.rhs + 1.0
