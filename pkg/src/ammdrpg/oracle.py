"""Brute-force grid oracle, independent of the model/solver stack.

Everything here is direct arithmetic over instance data: candidate launch and
retrieve points live on a grid that is refined coarse-to-fine down to the
requested resolution, entry/exit parameters live on a fixed 1/50 lattice, and
every constraint family (coverage, drone coordination, per-stage capacity,
assignment structure) is checked by evaluation, never through the model IR.

Error model: the returned value is exact up to O(resolution) around the basin
the refinement locates (the objective is piecewise smooth with a small
Lipschitz constant), plus the O(total length / 50) entry/exit lattice effect
and, in graph-coverage mode, a conservative coverage-bucket quantization of
requirement/250. Infeasible instances return inf.

This module must import nothing from the package beyond geometry and the
instance data model (a layering test enforces it).
"""

import itertools
import math

import numpy as np

from .geometry import Point, dist, edge_length, point_on_segment
from .instance import Instance, VisitMode

LATTICE = np.linspace(0.0, 1.0, 51)     # rho/lambda lattice, 1/50 steps
COVER_BUCKETS = 200                     # graph-mode coverage quantization
BIG = 1e9                               # penalty offset for infeasible cells

ORACLE_MAX_GRAPHS = 2
ORACLE_MAX_EDGES = 3
ORACLE_MAX_DRONES = 2


class LimitsExceeded(ValueError):
    pass


# ------------------------------------------------------------- chain metrics

def _chains(graph, visit_mode):
    """All (edges, directions) drone chains consistent with the coverage mode.

    A chain is an ordered tuple of edge ids with a +1/-1 direction each; the
    drone enters the first edge, walks each edge between its entry and exit
    parameters, and hops edge to edge in order. In edge mode every edge with a
    positive requirement must appear; in graph mode any nonempty subset whose
    total length can meet the requirement is allowed.
    """
    edges = list(graph.edges)
    if visit_mode is VisitMode.PerEdge:
        required = [e.id for e in edges if e.alpha_edge > 0]
        subsets = [tuple(required)] if required else [(e.id,) for e in edges]
    else:
        need = graph.alpha_graph * graph.total_length
        subsets = []
        for r in range(1, len(edges) + 1):
            for combo in itertools.combinations([e.id for e in edges], r):
                if sum(graph.edges[i].length for i in combo) >= need - 1e-12:
                    subsets.append(combo)
    out = []
    for sub in subsets:
        for order in itertools.permutations(sub):
            for dirs in itertools.product((1, -1), repeat=len(order)):
                out.append((order, dirs))
    return out


def _edge_points(edge, direction):
    """Lattice points along the edge in travel orientation: row k is the
    point at entry-side parameter k/50."""
    seg = edge.segment if direction == 1 else type(edge.segment)(edge.segment.b,
                                                                 edge.segment.a)
    return np.array([[p.x, p.y] for p in (point_on_segment(seg, t) for t in LATTICE)])


def _leg_matrix(pts_from, pts_to):
    d = pts_from[:, None, :] - pts_to[None, :, :]
    return np.sqrt((d * d).sum(-1))


def _sweep_edge(state, length, min_steps, unit):
    """Within-edge transition: advance the position index by d lattice steps
    (d >= min_steps), paying d*length/50 travel. With coverage buckets (unit
    > 0) the walked length is also credited, floor-quantized, clipped at the
    top bucket. The lattice is uniform so everything is a slice shift."""
    nb = state.shape[2]
    new = np.full_like(state, np.inf)
    for d in range(min_steps, 51):
        cost = d * length / 50.0
        src = state[:, :51 - d, :]
        dst = new[:, d:, :]
        if unit == 0.0 or nb == 1:
            np.minimum(dst, src + cost, out=dst)
            continue
        g = min(int(math.floor(cost / unit + 1e-9)), nb - 1)
        if g == 0:
            np.minimum(dst, src + cost, out=dst)
            continue
        np.minimum(dst[:, :, g:], src[:, :, :nb - g] + cost, out=dst[:, :, g:])
        tail = (src[:, :, nb - g:] + cost).min(axis=2)
        np.minimum(dst[:, :, nb - 1], tail, out=dst[:, :, nb - 1])
    return new


def _hop(state, hop_matrix):
    """Junction transition between consecutive edges: min-plus over the exit
    position of the previous edge."""
    out = np.empty_like(state)
    for e in range(state.shape[0]):
        out[e] = np.min(state[e][:, None, :] + hop_matrix[:, :, None], axis=0)
    return out


def _inner_matrix(graph, order, dirs, visit_mode):
    """51x51 matrix: minimal interior drone travel from entry parameter index
    (on the first edge, in travel orientation) to exit parameter index (on the
    last edge), meeting the coverage requirement."""
    m = len(order)
    pts = [_edge_points(graph.edges[i], d) for i, d in zip(order, dirs)]
    lens = [graph.edges[i].length for i in order]

    if visit_mode is VisitMode.PerEdge:
        need = 0.0
    else:
        need = graph.alpha_graph * graph.total_length
    unit = need / COVER_BUCKETS if need > 1e-12 else 0.0
    nb = COVER_BUCKETS + 1 if unit > 0.0 else 1

    state = np.full((51, 51, nb), np.inf)
    idx = np.arange(51)
    state[idx, idx, 0] = 0.0        # enter edge 1 at any parameter, no travel yet
    for k in range(m):
        if visit_mode is VisitMode.PerEdge:
            alpha = graph.edges[order[k]].alpha_edge
            min_steps = min(50, int(math.ceil(50.0 * alpha - 1e-9)))
        else:
            min_steps = 0
        if k > 0:
            state = _hop(state, _leg_matrix(pts[k - 1], pts[k]))
        state = _sweep_edge(state, lens[k], min_steps, unit)
    return state[:, :, nb - 1]


def _graph_trip_groups(graph, visit_mode):
    """Chains grouped by (entry edge, entry dir, exit edge, exit dir) with
    elementwise-min inner matrices, so the point-grid stage only sees groups.
    A chain walked backwards costs the same, so reversed chains reuse the
    computed matrix with both lattice axes flipped."""
    cache = {}
    groups = {}
    for order, dirs in _chains(graph, visit_mode):
        rev = (order[::-1], tuple(-d for d in dirs[::-1]))
        if rev in cache:
            inner = cache[rev][::-1, ::-1].T
        else:
            inner = _inner_matrix(graph, order, dirs, visit_mode)
            cache[(order, dirs)] = inner
        key = (order[0], dirs[0], order[-1], dirs[-1])
        if key in groups:
            groups[key] = np.minimum(groups[key], inner)
        else:
            groups[key] = inner
    return groups


def _trip_matrix(groups, graph, launch_pts, retrieve_pts):
    """Minimal drone trip length launch -> chain -> retrieve for every
    (launch, retrieve) candidate pair."""
    nl, nr = len(launch_pts), len(retrieve_pts)
    best = np.full((nl, nr), np.inf)
    for (e_in, d_in, e_out, d_out), inner in groups.items():
        entry = _edge_points(graph.edges[e_in], d_in)
        exit_ = _edge_points(graph.edges[e_out], d_out)
        a = _leg_matrix(launch_pts, entry)            # nl x 51
        b = _leg_matrix(retrieve_pts, exit_)          # nr x 51
        t1 = np.min(a[:, :, None] + inner[None, :, :], axis=1)   # nl x 51
        cand = np.min(t1[:, None, :] + b[None, :, :], axis=2)    # nl x nr
        np.minimum(best, cand, out=best)
    return best


# -------------------------------------------------------------- stage layout

def _stage_layouts(graph_ids, n_drones):
    """Ordered partitions of the graphs into stages of size <= n_drones."""
    if not graph_ids:
        yield []
        return
    ids = sorted(graph_ids)
    first = ids[0]
    rest = ids[1:]
    for r in range(0, min(n_drones - 1, len(rest)) + 1):
        for mates in itertools.combinations(rest, r):
            head = (first,) + mates
            remaining = [i for i in rest if i not in mates]
            for tail in _stage_layouts(remaining, n_drones):
                # head stage may appear at any position among the stages
                for pos in range(len(tail) + 1):
                    yield tail[:pos] + [head] + tail[pos:]


def _dedupe_layouts(layouts):
    seen = set()
    for lay in layouts:
        key = tuple(tuple(sorted(s)) for s in lay)
        if key not in seen:
            seen.add(key)
            yield [tuple(sorted(s)) for s in lay]


# --------------------------------------------------------------- main search

def _axis(lo, hi, step):
    n = max(1, int(math.floor((hi - lo) / step + 1e-9)) + 1)
    return [lo + k * step for k in range(n)] + ([hi] if lo + (n - 1) * step < hi - 1e-12 else [])


def _candidates(center, half, step, bbox):
    x0, y0, x1, y1 = bbox
    lx = max(x0, center[0] - half)
    hx = min(x1, center[0] + half)
    ly = max(y0, center[1] - half)
    hy = min(y1, center[1] + half)
    xs = _axis(lx, hx, step)
    ys = _axis(ly, hy, step)
    return np.array([[x, y] for x in xs for y in ys])


def _layout_value(inst, layout, groups_by_graph, resolution):
    """Coarse-to-fine search of all launch/retrieve points for one layout.

    Returns the best penalized objective: values >= BIG/2 mean no feasible
    point assignment was found at the final resolution.
    """
    x0, y0, x1, y1 = inst.bounding_box()
    span = max(x1 - x0, y1 - y0, resolution)
    bbox = (x0, y0, x1, y1)
    k_ratio = inst.v_m / inst.v_d
    cap_d = inst.v_m * inst.endurance
    orig = np.array([inst.origin.x, inst.origin.y])
    dest = np.array([inst.destination.x, inst.destination.y])
    K = len(layout)
    if K == 0:
        return float(np.linalg.norm(orig - dest))

    step = max(span / 12.0, resolution)
    centers = [((x0 + x1) / 2.0, (y0 + y1) / 2.0)] * (2 * K)
    half = span / 2.0
    best_val = np.inf
    best_pts = None

    while True:
        cands = [_candidates(c, half, step, bbox) for c in centers]
        # stage cost matrices with capacity/coordination penalties
        stage_cost = []
        for t, stage in enumerate(layout):
            L, R = cands[2 * t], cands[2 * t + 1]
            d = L[:, None, :] - R[None, :, :]
            disp = np.sqrt((d * d).sum(-1))
            need = disp.copy()
            for gid in stage:
                trip = _trip_matrix(groups_by_graph[gid], inst.graph(gid), L, R)
                np.maximum(need, k_ratio * trip, out=need)
            viol = np.maximum(need - cap_d, 0.0)
            # violations dominate lexicographically so refinement chases
            # feasibility first and only then path length
            cost = np.where(viol > 0, BIG * (1.0 + viol), need)
            stage_cost.append(cost)

        # DP across stages: val[j] = best cost reaching launch candidate j
        val = np.linalg.norm(cands[0] - orig, axis=1)
        back = []
        for t in range(K):
            tot = val[:, None] + stage_cost[t]
            arg_in = np.argmin(tot, axis=0)
            val = tot[arg_in, np.arange(tot.shape[1])]
            back.append(arg_in)
            if t + 1 < K:
                bridge = _leg_matrix(cands[2 * t + 1], cands[2 * t + 2])
                tot = val[:, None] + bridge
                arg_r = np.argmin(tot, axis=0)
                val = tot[arg_r, np.arange(tot.shape[1])]
                back.append(arg_r)
        tot = val + np.linalg.norm(cands[2 * K - 1] - dest, axis=1)
        k_star = int(np.argmin(tot))
        round_val = float(tot[k_star])

        # walk backpointers to recover the argmin point chain
        idx = [0] * (2 * K)
        idx[2 * K - 1] = k_star
        pos = 2 * K - 2
        for arr in reversed(back):
            idx[pos] = int(arr[idx[pos + 1]])
            pos -= 1
        pts = [tuple(cands[p][idx[p]]) for p in range(2 * K)]

        if round_val < best_val:
            best_val = round_val
            best_pts = pts
        centers = best_pts if best_pts is not None else pts
        if step <= resolution:
            break
        half = max(step * 1.25, resolution)
        step = max(step / 2.0, resolution)
    return best_val


def grid_oracle(i: Instance, resolution: float) -> float:
    """Best objective found by exhaustive discretized search; inf when no
    feasible assignment exists on the final grid."""
    if len(i.graphs) > ORACLE_MAX_GRAPHS:
        raise LimitsExceeded(f"oracle handles <= {ORACLE_MAX_GRAPHS} graphs")
    if any(len(g.edges) > ORACLE_MAX_EDGES for g in i.graphs):
        raise LimitsExceeded(f"oracle handles <= {ORACLE_MAX_EDGES} edges per graph")
    if i.n_drones > ORACLE_MAX_DRONES:
        raise LimitsExceeded(f"oracle handles <= {ORACLE_MAX_DRONES} drones")
    if resolution <= 0:
        raise ValueError("resolution must be positive")

    groups_by_graph = {g.id: _graph_trip_groups(g, i.visit_mode) for g in i.graphs}
    best = np.inf
    for layout in _dedupe_layouts(_stage_layouts([g.id for g in i.graphs],
                                                 i.n_drones)):
        best = min(best, _layout_value(i, layout, groups_by_graph, resolution))
    return float(best) if best < BIG / 2 else math.inf
