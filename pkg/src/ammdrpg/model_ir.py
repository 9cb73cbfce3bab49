"""Typed intermediate representation of the routing program.

The builders produce a Model holding a variable table, linear rows, and
second-order-cone rows, ready for LP emission. Variable names are structured
labels (family tag plus indices) and both variables and rows are created in a
fixed family order, so two builds of the same instance are identical object
for object and emit byte-identical text.

Stage indexing: operations happen at stages 1..T with T = number of graphs.
Point variables x_L^t / x_R^t exist for t = 0..T+1; stage 0 and stage T+1 are
pinned to the origin and destination by the boundary rows. The between-stage
legs d_RL^t run for t = 0..T (t = 0 is the lead-in leg origin -> x_L^1) and
the within-stage legs d_LR^t for t = 1..T. The objective is the sum of all of
them.

Variable census for the synchronous edge-mode build with MTZ (G graphs, E_g
edges each, D drones, T = G stages, P_g = E_g(E_g-1) ordered edge pairs):

    binaries     u,v: 2*D*T*sum(E_g)   z: sum(P_g)   mu, entry: 2*sum(E_g)
    ordering     s: sum(E_g)                              (MTZ only)
    parameters   rho, lam, numin, numax: 4*sum(E_g)
    points       x_L, x_R: 2*2*(T+2)   R, L: 2*2*sum(E_g)
    distances    d_L, d_R: 2*D*T*sum(E_g)   d_edge: sum(E_g)   d_pair: sum(P_g)
                 d_RL: T+1   d_LR: T
    products     p_L, p_R: 2*D*T*sum(E_g)   p_pair: sum(P_g)
                 p_mu: sum(E_g)   q: sum(E_g)

For one graph with two edges and one drone this gives 61 variables, 77 linear
rows and 11 cone rows; the counts are frozen in the tests.
"""

import itertools
import math
import re
from dataclasses import dataclass, field

from .geometry import Point, dist
from .instance import Instance, VisitMode

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

INF = math.inf


@dataclass(frozen=True)
class VarMeta:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    tag: str
    terms: tuple          # ((vid, coef), ...)
    sense: str            # "<=", "=", ">="
    rhs: float


@dataclass(frozen=True)
class SocConstraint:
    """Euclidean norm row: |point_a - point_b| <= bound."""
    name: str
    tag: str
    point_a: tuple        # (vid_x, vid_y)
    point_b: object       # (vid_x, vid_y) or Point
    bound: int            # vid


@dataclass(frozen=True)
class BigMTable:
    m_launch: float
    m_retrieve: float
    m_pair: dict          # (g, e, e') -> upper bound on the hop distance
    m_pair_lo: dict       # (g, e, e') -> lower bound
    m_op: dict            # g -> coordination-window big-M
    diameter: float


@dataclass
class Model:
    variables: list
    linear: list
    soc: list
    objective: tuple
    mode: str
    subtour: str
    visit_mode: VisitMode
    valid_inequalities: bool
    n_stages: int
    index: dict
    bigm: BigMTable

    def var_name(self, vid: int) -> str:
        return self.variables[vid].name

    def vid(self, family: str, key) -> int:
        return self.index[family][key]


def big_m_bounds(i: Instance) -> BigMTable:
    """Distance bounds used to deactivate rows and to box the products.

    The point diameter includes origin and destination, not just graph
    vertices: launch/retrieve points can sit anywhere on the carrier path, so
    a vertex-only diameter would not dominate the launch legs when the depot
    lies outside the hull of the targets.
    """
    pts = i.all_points()
    diameter = 0.0
    for a, b in itertools.combinations(pts, 2):
        diameter = max(diameter, dist(a, b))
    m_pair, m_pair_lo = {}, {}
    m_op = {}
    for g in i.graphs:
        pair_sum = 0.0
        for e, f in itertools.permutations(g.edges, 2):
            ds = [dist(p, q)
                  for p in (e.segment.a, e.segment.b)
                  for q in (f.segment.a, f.segment.b)]
            m_pair[(g.id, e.id, f.id)] = max(ds)
            m_pair_lo[(g.id, e.id, f.id)] = min(ds)
            pair_sum += max(ds)
        m_op[g.id] = g.total_length + 2.0 * diameter + pair_sum
    return BigMTable(m_launch=diameter, m_retrieve=diameter, m_pair=m_pair,
                     m_pair_lo=m_pair_lo, m_op=m_op, diameter=diameter)


class _Build:
    def __init__(self):
        self.variables = []
        self.linear = []
        self.soc = []
        self.index = {}

    def var(self, family, key, name, kind, lower, upper):
        vid = len(self.variables)
        self.variables.append(VarMeta(name, kind, lower, upper))
        self.index.setdefault(family, {})[key] = vid
        return vid

    def point(self, family, key, name, lower=-INF, upper=INF):
        vx = self.var(family, key, f"{name}_x", CONTINUOUS, lower, upper)
        vy = len(self.variables)
        self.variables.append(VarMeta(f"{name}_y", CONTINUOUS, lower, upper))
        self.index[family][key] = (vx, vy)
        return (vx, vy)

    def lin(self, name, tag, terms, sense, rhs):
        terms = tuple((v, float(c)) for v, c in terms if c != 0.0)
        seen = set()
        for v, _ in terms:
            if v in seen:
                raise ValueError(f"duplicate variable in row {name}")
            seen.add(v)
        self.linear.append(LinearConstraint(name, tag, terms, sense, float(rhs)))

    def cone(self, name, tag, point_a, point_b, bound):
        if self.variables[bound].lower < 0:
            raise ValueError(f"cone bound {name} must be nonnegative")
        self.soc.append(SocConstraint(name, tag, point_a, point_b, bound))

    def mccormick(self, tag, stem, p, b, d, lo, hi):
        """Four-row exact linearization of p = b*d with binary b, d in [lo, hi]:
        b=0 pins p to 0-ish [lo*0, hi*0], b=1 pins p to d."""
        self.lin(f"{stem}_ub", tag, [(p, 1.0), (b, -hi)], "<=", 0.0)
        self.lin(f"{stem}_lb", tag, [(p, 1.0), (b, -lo)], ">=", 0.0)
        self.lin(f"{stem}_du", tag, [(p, 1.0), (d, -1.0), (b, -lo)], "<=", -lo)
        self.lin(f"{stem}_dl", tag, [(p, 1.0), (d, -1.0), (b, -hi)], ">=", -hi)


def _edge_pairs(g):
    return [(e.id, f.id) for e in g.edges for f in g.edges if e.id != f.id]


def _build(i: Instance, mode, subtour, valid_inequalities,
           paper_literal_stage_cap, paper_literal_cap):
    if subtour not in ("mtz", "sec"):
        raise ValueError("subtour must be 'mtz' or 'sec'")
    bigm = big_m_bounds(i)
    T = len(i.graphs)
    D = i.n_drones
    stages = range(1, T + 1)
    drones = range(1, D + 1)
    B = _Build()
    guard = max(1.0, 1.0 / i.v_d)

    # ---- variables, fixed family order
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("u", (g.id, e.id, t, d),
                          f"u_g{g.id}_e{e.id}_t{t}_d{d}", BINARY, 0.0, 1.0)
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("v", (g.id, e.id, t, d),
                          f"v_g{g.id}_e{e.id}_t{t}_d{d}", BINARY, 0.0, 1.0)
    for g in i.graphs:
        for e, f in _edge_pairs(g):
            B.var("z", (g.id, e, f), f"z_g{g.id}_e{e}_e{f}", BINARY, 0.0, 1.0)
    for g in i.graphs:
        for e in g.edges:
            B.var("mu", (g.id, e.id), f"mu_g{g.id}_e{e.id}", BINARY, 0.0, 1.0)
    for g in i.graphs:
        for e in g.edges:
            B.var("entry", (g.id, e.id), f"entry_g{g.id}_e{e.id}", BINARY, 0.0, 1.0)
    if subtour == "mtz":
        for g in i.graphs:
            for e in g.edges:
                B.var("s", (g.id, e.id), f"s_g{g.id}_e{e.id}", CONTINUOUS,
                      0.0, max(0.0, len(g.edges) - 1.0))
    if valid_inequalities:
        for t in stages:
            B.var("beta", t, f"beta_t{t}", BINARY, 0.0, 1.0)
        for t in stages:
            B.var("k", t, f"k_t{t}", CONTINUOUS, 0.0, float(D))
    for fam in ("rho", "lam", "numin", "numax"):
        for g in i.graphs:
            for e in g.edges:
                B.var(fam, (g.id, e.id), f"{fam}_g{g.id}_e{e.id}",
                      CONTINUOUS, 0.0, 1.0)
    for t in range(0, T + 2):
        B.point("xL", t, f"xL_t{t}")
    for t in range(0, T + 2):
        B.point("xR", t, f"xR_t{t}")
    for g in i.graphs:
        for e in g.edges:
            B.point("R", (g.id, e.id), f"R_g{g.id}_e{e.id}")
    for g in i.graphs:
        for e in g.edges:
            B.point("L", (g.id, e.id), f"L_g{g.id}_e{e.id}")
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("dL", (g.id, e.id, t, d),
                          f"dL_g{g.id}_e{e.id}_t{t}_d{d}", CONTINUOUS,
                          0.0, bigm.m_launch)
    for g in i.graphs:
        for e in g.edges:
            B.var("dE", (g.id, e.id), f"dE_g{g.id}_e{e.id}", CONTINUOUS,
                  0.0, e.length)
    for g in i.graphs:
        for e, f in _edge_pairs(g):
            B.var("dP", (g.id, e, f), f"dP_g{g.id}_e{e}_e{f}", CONTINUOUS,
                  bigm.m_pair_lo[(g.id, e, f)], bigm.m_pair[(g.id, e, f)])
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("dR", (g.id, e.id, t, d),
                          f"dR_g{g.id}_e{e.id}_t{t}_d{d}", CONTINUOUS,
                          0.0, bigm.m_retrieve)
    for t in range(0, T + 1):
        B.var("dRL", t, f"dRL_t{t}", CONTINUOUS, 0.0, INF)
    for t in stages:
        B.var("dLR", t, f"dLR_t{t}", CONTINUOUS, 0.0, INF)
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("pL", (g.id, e.id, t, d),
                          f"pL_g{g.id}_e{e.id}_t{t}_d{d}", CONTINUOUS,
                          0.0, bigm.m_launch)
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.var("pR", (g.id, e.id, t, d),
                          f"pR_g{g.id}_e{e.id}_t{t}_d{d}", CONTINUOUS,
                          0.0, bigm.m_retrieve)
    for g in i.graphs:
        for e, f in _edge_pairs(g):
            B.var("pP", (g.id, e, f), f"pP_g{g.id}_e{e}_e{f}", CONTINUOUS,
                  0.0, bigm.m_pair[(g.id, e, f)])
    for g in i.graphs:
        for e in g.edges:
            B.var("pMu", (g.id, e.id), f"pMu_g{g.id}_e{e.id}", CONTINUOUS,
                  0.0, e.length)
    for g in i.graphs:
        for e in g.edges:
            B.var("q", (g.id, e.id), f"q_g{g.id}_e{e.id}", CONTINUOUS, 0.0, 1.0)

    ix = B.index
    all_u = [(g.id, e.id) for g in i.graphs for e in g.edges]

    # ---- assignment
    if paper_literal_stage_cap:
        for t in stages:
            B.lin(f"asg1_t{t}", "asg1",
                  [(ix["u"][(g, e, t, d)], 1.0) for g, e in all_u for d in drones],
                  "<=", 1.0)
        for t in stages:
            B.lin(f"asg2_t{t}", "asg2",
                  [(ix["v"][(g, e, t, d)], 1.0) for g, e in all_u for d in drones],
                  "<=", 1.0)
    else:
        # one operation start and one recovery per drone per stage; the
        # displayed per-stage cap would forbid parallel launches entirely
        for t in stages:
            for d in drones:
                B.lin(f"asg1_t{t}_d{d}", "asg1",
                      [(ix["u"][(g, e, t, d)], 1.0) for g, e in all_u], "<=", 1.0)
        for t in stages:
            for d in drones:
                B.lin(f"asg2_t{t}_d{d}", "asg2",
                      [(ix["v"][(g, e, t, d)], 1.0) for g, e in all_u], "<=", 1.0)
    for g in i.graphs:
        B.lin(f"asg3_g{g.id}", "asg3",
              [(ix["u"][(g.id, e.id, t, d)], 1.0)
               for e in g.edges for t in stages for d in drones], "=", 1.0)
    for g in i.graphs:
        B.lin(f"asg4_g{g.id}", "asg4",
              [(ix["v"][(g.id, e.id, t, d)], 1.0)
               for e in g.edges for t in stages for d in drones], "=", 1.0)
    if mode == "sync":
        for g in i.graphs:
            for t in stages:
                for d in drones:
                    terms = [(ix["u"][(g.id, e.id, t, d)], 1.0) for e in g.edges]
                    terms += [(ix["v"][(g.id, e.id, t, d)], -1.0) for e in g.edges]
                    B.lin(f"asg5_g{g.id}_t{t}_d{d}", "asg5", terms, "=", 0.0)
    else:
        # launched drones come back at the same or a later stage; the
        # equality form would break every schedule that actually spans stages
        for g in i.graphs:
            for t in stages:
                for d in drones:
                    terms = [(ix["u"][(g.id, e.id, t, d)], 1.0) for e in g.edges]
                    terms += [(ix["v"][(g.id, e.id, tp, d)], -1.0)
                              for e in g.edges for tp in range(t, T + 1)]
                    B.lin(f"asg8_g{g.id}_t{t}_d{d}", "asg8", terms, "<=", 0.0)
    for g in i.graphs:
        for e in g.edges:
            terms = [(ix["u"][(g.id, e.id, t, d)], 1.0)
                     for t in stages for d in drones]
            terms += [(ix["z"][(g.id, f.id, e.id)], 1.0)
                      for f in g.edges if f.id != e.id]
            terms.append((ix["mu"][(g.id, e.id)], -1.0))
            B.lin(f"asg6_g{g.id}_e{e.id}", "asg6", terms, "=", 0.0)
    for g in i.graphs:
        for e in g.edges:
            terms = [(ix["v"][(g.id, e.id, t, d)], 1.0)
                     for t in stages for d in drones]
            terms += [(ix["z"][(g.id, e.id, f.id)], 1.0)
                      for f in g.edges if f.id != e.id]
            terms.append((ix["mu"][(g.id, e.id)], -1.0))
            B.lin(f"asg7_g{g.id}_e{e.id}", "asg7", terms, "=", 0.0)

    # ---- subtour ordering (SEC mode ships no rows; the solve loop must call
    # separate_sec until it returns nothing)
    if subtour == "mtz":
        for g in i.graphs:
            n = len(g.edges)
            for e, f in _edge_pairs(g):
                B.lin(f"mtz_g{g.id}_e{e}_e{f}", "mtz",
                      [(ix["s"][(g.id, e)], 1.0), (ix["s"][(g.id, f)], -1.0),
                       (ix["z"][(g.id, e, f)], float(n))], "<=", n - 1.0)

    # ---- coverage
    for g in i.graphs:
        for e in g.edges:
            gid, eid = g.id, e.id
            B.lin(f"cov_abs_g{gid}_e{eid}", "cov_abs",
                  [(ix["rho"][(gid, eid)], 1.0), (ix["lam"][(gid, eid)], -1.0),
                   (ix["numax"][(gid, eid)], -1.0), (ix["numin"][(gid, eid)], 1.0)],
                  "=", 0.0)
            B.lin(f"cov_dirmax_g{gid}_e{eid}", "cov_dir",
                  [(ix["numax"][(gid, eid)], 1.0), (ix["entry"][(gid, eid)], 1.0)],
                  "<=", 1.0)
            B.lin(f"cov_dirmin_g{gid}_e{eid}", "cov_dir",
                  [(ix["numin"][(gid, eid)], 1.0), (ix["entry"][(gid, eid)], -1.0)],
                  "<=", 0.0)
    for g in i.graphs:
        for e in g.edges:
            gid, eid = g.id, e.id
            # q = mu * (numax + numin): expand the sum through an equality-free
            # scheme by treating d := numax + numin via the rows directly
            q = ix["q"][(gid, eid)]
            b = ix["mu"][(gid, eid)]
            nmx, nmn = ix["numax"][(gid, eid)], ix["numin"][(gid, eid)]
            B.lin(f"cov_mc_g{gid}_e{eid}_ub", "cov_mc", [(q, 1.0), (b, -1.0)],
                  "<=", 0.0)
            B.lin(f"cov_mc_g{gid}_e{eid}_lb", "cov_mc", [(q, 1.0)], ">=", 0.0)
            B.lin(f"cov_mc_g{gid}_e{eid}_du", "cov_mc",
                  [(q, 1.0), (nmx, -1.0), (nmn, -1.0)], "<=", 0.0)
            B.lin(f"cov_mc_g{gid}_e{eid}_dl", "cov_mc",
                  [(q, 1.0), (nmx, -1.0), (nmn, -1.0), (b, -1.0)], ">=", -1.0)
    if i.visit_mode is VisitMode.PerEdge:
        for g in i.graphs:
            for e in g.edges:
                B.lin(f"cov_req_g{g.id}_e{e.id}", "cov_req",
                      [(ix["q"][(g.id, e.id)], 1.0)], ">=", e.alpha_edge)
    else:
        for g in i.graphs:
            B.lin(f"cov_req_g{g.id}", "cov_req",
                  [(ix["q"][(g.id, e.id)], e.length) for e in g.edges],
                  ">=", g.alpha_graph * g.total_length)

    # ---- entry/exit points pinned to their edges
    for g in i.graphs:
        for e in g.edges:
            gid, eid = g.id, e.id
            bx, by = e.segment.a.x, e.segment.a.y
            cx, cy = e.segment.b.x, e.segment.b.y
            Rx, Ry = ix["R"][(gid, eid)]
            Lx, Ly = ix["L"][(gid, eid)]
            rho, lam = ix["rho"][(gid, eid)], ix["lam"][(gid, eid)]
            B.lin(f"param_R_g{gid}_e{eid}_x", "param",
                  [(Rx, 1.0), (rho, -(cx - bx))], "=", bx)
            B.lin(f"param_R_g{gid}_e{eid}_y", "param",
                  [(Ry, 1.0), (rho, -(cy - by))], "=", by)
            B.lin(f"param_L_g{gid}_e{eid}_x", "param",
                  [(Lx, 1.0), (lam, -(cx - bx))], "=", bx)
            B.lin(f"param_L_g{gid}_e{eid}_y", "param",
                  [(Ly, 1.0), (lam, -(cy - by))], "=", by)

    # ---- cone rows
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.cone(f"dist_launch_g{g.id}_e{e.id}_t{t}_d{d}", "dist_launch",
                           ix["xL"][t], ix["R"][(g.id, e.id)],
                           ix["dL"][(g.id, e.id, t, d)])
    for g in i.graphs:
        for e in g.edges:
            B.cone(f"dist_edge_g{g.id}_e{e.id}", "dist_edge",
                   ix["R"][(g.id, e.id)], ix["L"][(g.id, e.id)],
                   ix["dE"][(g.id, e.id)])
    for g in i.graphs:
        for e, f in _edge_pairs(g):
            B.cone(f"dist_pair_g{g.id}_e{e}_e{f}", "dist_pair",
                   ix["L"][(g.id, e)], ix["R"][(g.id, f)],
                   ix["dP"][(g.id, e, f)])
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    B.cone(f"dist_retrieve_g{g.id}_e{e.id}_t{t}_d{d}",
                           "dist_retrieve",
                           ix["L"][(g.id, e.id)], ix["xR"][t],
                           ix["dR"][(g.id, e.id, t, d)])
    for t in range(0, T + 1):
        B.cone(f"dist_bridge_t{t}", "dist_bridge",
               ix["xR"][t], ix["xL"][t + 1], ix["dRL"][t])
    for t in stages:
        B.cone(f"dist_stage_t{t}", "dist_stage",
               ix["xL"][t], ix["xR"][t], ix["dLR"][t])

    # ---- coordination windows with linearized products
    kd = 1.0 / i.v_d
    km = 1.0 / i.v_m
    if mode == "sync":
        for g in i.graphs:
            mg = bigm.m_op[g.id] * guard
            for t in stages:
                for d in drones:
                    terms = [(ix["pL"][(g.id, e.id, t, d)], kd) for e in g.edges]
                    terms += [(ix["pP"][(g.id, e, f)], kd)
                              for e, f in _edge_pairs(g)]
                    terms += [(ix["pMu"][(g.id, e.id)], kd) for e in g.edges]
                    terms += [(ix["pR"][(g.id, e.id, t, d)], kd) for e in g.edges]
                    terms.append((ix["dLR"][t], -km))
                    terms += [(ix["u"][(g.id, e.id, t, d)], mg) for e in g.edges]
                    B.lin(f"dcw_g{g.id}_t{t}_d{d}", "dcw", terms, "<=", mg)
    else:
        for g in i.graphs:
            for d in drones:
                for t1 in stages:
                    for t2 in range(t1, T + 1):
                        mg = (bigm.m_op[g.id]
                              + (t2 - t1 + 1) * bigm.diameter) * guard
                        terms = [(ix["pL"][(g.id, e.id, t1, d)], kd)
                                 for e in g.edges]
                        terms += [(ix["pP"][(g.id, e, f)], kd)
                                  for e, f in _edge_pairs(g)]
                        terms += [(ix["pMu"][(g.id, e.id)], kd) for e in g.edges]
                        terms += [(ix["pR"][(g.id, e.id, t2, d)], kd)
                                  for e in g.edges]
                        terms += [(ix["dLR"][t], -km)
                                  for t in range(t1, t2 + 1)]
                        terms += [(ix["dRL"][t], -km) for t in range(t1, t2)]
                        terms += [(ix["u"][(g.id, e.id, t1, d)], mg)
                                  for e in g.edges]
                        terms += [(ix["v"][(g.id, e.id, t2, d)], mg)
                                  for e in g.edges]
                        B.lin(f"dcws_g{g.id}_d{d}_t{t1}_t{t2}", "dcws",
                              terms, "<=", 2.0 * mg)
        # a drone airborne between launch and retrieval serves nothing else
        for d in drones:
            for t1 in stages:
                for t2 in range(t1 + 1, T + 1):
                    for g in i.graphs:
                        act = [(ix["u"][(g.id, e.id, t1, d)], float(T))
                               for e in g.edges]
                        act += [(ix["v"][(g.id, e.id, t2, d)], float(T))
                                for e in g.edges]
                        lhs_u = [(ix["u"][(gg.id, e.id, t, d)], 1.0)
                                 for gg in i.graphs for e in gg.edges
                                 for t in range(t1 + 1, t2 + 1)
                                 if not (gg.id == g.id and t == t1)]
                        B.lin(f"win_u_g{g.id}_d{d}_t{t1}_t{t2}", "win_u",
                              _merge(lhs_u + act), "<=", 2.0 * T)
                        lhs_v = [(ix["v"][(gg.id, e.id, t, d)], 1.0)
                                 for gg in i.graphs for e in gg.edges
                                 for t in range(t1, t2)]
                        B.lin(f"win_v_g{g.id}_d{d}_t{t1}_t{t2}", "win_v",
                              _merge(lhs_v + act), "<=", 2.0 * T)

    # ---- product linearizations
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    key = (g.id, e.id, t, d)
                    stem = f"mc_launch_g{g.id}_e{e.id}_t{t}_d{d}"
                    B.mccormick("mc_launch", stem, ix["pL"][key],
                                ix["u"][key], ix["dL"][key], 0.0, bigm.m_launch)
    for g in i.graphs:
        for e in g.edges:
            for t in stages:
                for d in drones:
                    key = (g.id, e.id, t, d)
                    stem = f"mc_retrieve_g{g.id}_e{e.id}_t{t}_d{d}"
                    B.mccormick("mc_retrieve", stem, ix["pR"][key],
                                ix["v"][key], ix["dR"][key], 0.0, bigm.m_retrieve)
    for g in i.graphs:
        for e, f in _edge_pairs(g):
            key = (g.id, e, f)
            stem = f"mc_pair_g{g.id}_e{e}_e{f}"
            B.mccormick("mc_pair", stem, ix["pP"][key], ix["z"][key],
                        ix["dP"][key], bigm.m_pair_lo[key], bigm.m_pair[key])
    for g in i.graphs:
        for e in g.edges:
            key = (g.id, e.id)
            stem = f"mc_edge_g{g.id}_e{e.id}"
            B.mccormick("mc_edge", stem, ix["pMu"][key], ix["mu"][key],
                        ix["dE"][key], 0.0, e.length)

    # ---- per-stage capacity
    cap = i.endurance if paper_literal_cap else i.v_m * i.endurance
    for t in stages:
        B.lin(f"cap_t{t}", "cap", [(ix["dLR"][t], 1.0)], "<=", cap)

    # ---- boundary pins
    for nm, t, p in (("orig", 0, i.origin), ("dest", T + 1, i.destination)):
        for fam in ("xL", "xR"):
            vx, vy = ix[fam][t]
            B.lin(f"bnd_{nm}_{fam}_x", "boundary", [(vx, 1.0)], "=", p.x)
            B.lin(f"bnd_{nm}_{fam}_y", "boundary", [(vy, 1.0)], "=", p.y)

    # ---- optional strengthening block
    if valid_inequalities:
        for t in stages:
            B.lin(f"vi_kdef_t{t}", "vi_kdef",
                  [(ix["k"][t], 1.0)]
                  + [(ix["u"][(g, e, t, d)], -1.0) for g, e in all_u
                     for d in drones], "=", 0.0)
        for t in range(1, T):
            B.lin(f"vi_mono_t{t}", "vi_mono",
                  [(ix["beta"][t], 1.0), (ix["beta"][t + 1], -1.0)], "<=", 0.0)
        for t in stages:
            B.lin(f"vi1_t{t}", "vi1",
                  [(ix["k"][tp], 1.0) for tp in range(1, t)]
                  + [(ix["beta"][t], -float(T))], ">=", 0.0)
        for t in stages:
            B.lin(f"vi2_t{t}", "vi2",
                  [(ix["k"][t], 1.0), (ix["beta"][t], 1.0)], ">=", 1.0)
        for t in stages:
            for d in range(2, D + 1):
                B.lin(f"vi3_t{t}_d{d}", "vi3",
                      [(ix["u"][(g, e, t, d)], 1.0) for g, e in all_u]
                      + [(ix["u"][(g, e, t, d - 1)], -1.0) for g, e in all_u],
                      "<=", 0.0)
        for t in stages:
            for d in range(2, D + 1):
                B.lin(f"vi4_t{t}_d{d}", "vi4",
                      [(ix["v"][(g, e, t, d)], 1.0) for g, e in all_u]
                      + [(ix["v"][(g, e, t, d - 1)], -1.0) for g, e in all_u],
                      "<=", 0.0)

    objective = tuple((ix["dRL"][t], 1.0) for t in range(0, T + 1)) + \
        tuple((ix["dLR"][t], 1.0) for t in stages)
    return Model(variables=B.variables, linear=B.linear, soc=B.soc,
                 objective=objective, mode=mode, subtour=subtour,
                 visit_mode=i.visit_mode, valid_inequalities=valid_inequalities,
                 n_stages=T, index=B.index, bigm=bigm)


def _merge(terms):
    out = {}
    for v, c in terms:
        out[v] = out.get(v, 0.0) + c
    return sorted(out.items())


def build_sync_model(i: Instance, subtour="mtz", valid_inequalities=False,
                     paper_literal_stage_cap=False,
                     paper_literal_cap=False) -> Model:
    """Synchronous formulation: drones return in the stage they left."""
    return _build(i, "sync", subtour, valid_inequalities,
                  paper_literal_stage_cap, paper_literal_cap)


def build_async_model(i: Instance, subtour="mtz", valid_inequalities=False,
                      paper_literal_stage_cap=False,
                      paper_literal_cap=False) -> Model:
    """Asynchronous formulation: retrieval may happen at a later stage, with
    airborne-window exclusion rows and stage-spanning coordination windows."""
    return _build(i, "async", subtour, valid_inequalities,
                  paper_literal_stage_cap, paper_literal_cap)


# ------------------------------------------------------------ SEC separation

def separate_sec(z_values, g):
    """Smallest-cardinality violated subtour cut, or None.

    A subset S of the edge set (strict: the full set has no cut in the
    family) is violated when the arcs inside S number at least |S|. For the
    partial-permutation inputs a solve loop produces (each edge has at most
    one incoming and one outgoing arc) the violated subsets are exactly the
    directed cycles, and the smallest cycle is returned. Arbitrary inputs
    fall back to subset enumeration by size.
    """
    edges = [e.id for e in g.edges]
    arcs = [(a, b) for (a, b), val in sorted(z_values.items()) if val]
    if not arcs:
        return None
    out_deg, in_deg = {}, {}
    succ = {}
    for a, b in arcs:
        out_deg[a] = out_deg.get(a, 0) + 1
        in_deg[b] = in_deg.get(b, 0) + 1
        succ.setdefault(a, []).append(b)

    best = None
    if all(c <= 1 for c in out_deg.values()) and \
            all(c <= 1 for c in in_deg.values()):
        seen = set()
        for start in sorted(succ):
            if start in seen:
                continue
            path = []
            node = start
            index = {}
            while node is not None and node not in index:
                index[node] = len(path)
                path.append(node)
                seen.add(node)
                nxt = succ.get(node)
                node = nxt[0] if nxt else None
            if node is not None and node in index:
                cycle = tuple(sorted(path[index[node]:]))
                if len(cycle) < len(edges):
                    if best is None or (len(cycle), cycle) < (len(best), best):
                        best = cycle
    else:
        present = set(arcs)
        nodes = sorted(set(out_deg) | set(in_deg))
        for size in range(2, len(edges)):
            for combo in itertools.combinations(nodes, size):
                inside = sum(1 for a in combo for b in combo
                             if a != b and (a, b) in present)
                if inside >= size:
                    best = tuple(combo)
                    break
            if best is not None:
                break
    if best is None:
        return None
    terms = tuple(((e, f), 1.0) for e in best for f in best if e != f)
    return LinearConstraint(
        name=f"sec_g{g.id}_" + "_".join(str(e) for e in best),
        tag="sec", terms=terms, sense="<=", rhs=len(best) - 1.0)


# ----------------------------------------------------------------- emission

def _num(x: float) -> str:
    return "%.17g" % (x + 0.0 if x != 0 else 0.0)


def _expr(parts):
    """parts: iterable of (coef, name); renders '+ c n - c n ...'"""
    toks = []
    for coef, name in parts:
        sign = "-" if coef < 0 else "+"
        toks.append(f"{sign} {_num(abs(coef))} {name}")
    if not toks:
        return "+ 0"
    text = " ".join(toks)
    return text[2:] if text.startswith("+ ") else text


def emit_lp(m: Model) -> str:
    """Deterministic LP text: objective, linear rows, cone rows expanded as
    quadratic bracket constraints, bounds, integrality sections."""
    names = [v.name for v in m.variables]
    out = ["Minimize"]
    out.append(" obj: " + _expr((c, names[v]) for v, c in m.objective))
    out.append("Subject To")
    for row in m.linear:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[row.sense]
        out.append(f" {row.name}: " + _expr((c, names[v]) for v, c in row.terms)
                   + f" {sense} {_num(row.rhs)}")
    for sc in m.soc:
        ax, ay = sc.point_a
        quad = []
        lin = []
        const = 0.0
        if isinstance(sc.point_b, tuple):
            bx, by = sc.point_b
            for a, b in ((ax, bx), (ay, by)):
                quad.append(f"+ {names[a]} ^ 2")
                quad.append(f"- 2 {names[a]} * {names[b]}")
                quad.append(f"+ {names[b]} ^ 2")
        else:
            px, py = sc.point_b.x, sc.point_b.y
            for a, p in ((ax, px), (ay, py)):
                quad.append(f"+ {names[a]} ^ 2")
                lin.append((-2.0 * p, names[a]))
                const -= p * p
        quad.append(f"- {names[sc.bound]} ^ 2")
        qtext = " ".join(quad)
        if qtext.startswith("+ "):
            qtext = qtext[2:]
        prefix = ""
        if lin:
            prefix = _expr(lin) + " + "
        out.append(f" {sc.name}: {prefix}[ {qtext} ] <= {_num(const)}")
    out.append("Bounds")
    for v in m.variables:
        if v.kind == BINARY:
            continue
        if v.lower == -INF and v.upper == INF:
            out.append(f" {v.name} free")
        elif v.upper == INF:
            out.append(f" {v.name} >= {_num(v.lower)}")
        else:
            out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    binaries = [v.name for v in m.variables if v.kind == BINARY]
    if binaries:
        out.append("Binaries")
        for chunk in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[chunk:chunk + 8]))
    generals = [v.name for v in m.variables if v.kind == INTEGER]
    if generals:
        out.append("Generals")
        for chunk in range(0, len(generals), 8):
            out.append(" " + " ".join(generals[chunk:chunk + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def parse_lp(text: str):
    """Census-oriented self-parser for emitted text: returns variable names,
    row counts and objective term count so round trips can be compared."""
    section = None
    objective_terms = 0
    n_linear = 0
    n_quad = 0
    bounds_names = set()
    binaries = set()
    generals = set()
    referenced = set()
    name_re = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
    skip = {"free", "e", "E"}

    def is_name(tok):
        return bool(name_re.fullmatch(tok)) and tok not in skip

    def ref_names(s):
        for tok in s.split():
            if is_name(tok):
                referenced.add(tok)

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            section = "obj"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "binaries":
            section = "bin"
            continue
        if low == "generals":
            section = "gen"
            continue
        if low == "end":
            section = None
            continue
        if section == "obj":
            body = line.split(":", 1)[1] if ":" in line else line
            objective_terms += sum(1 for tok in body.split() if is_name(tok))
            ref_names(body)
        elif section == "rows":
            body = line.split(":", 1)[1] if ":" in line else line
            if "[" in body:
                n_quad += 1
            else:
                n_linear += 1
            ref_names(body)
        elif section == "bounds":
            for tok in line.split():
                if is_name(tok):
                    bounds_names.add(tok)
        elif section == "bin":
            binaries.update(line.split())
        elif section == "gen":
            generals.update(line.split())
    variables = bounds_names | binaries | generals
    return {
        "variables": variables,
        "n_variables": len(variables),
        "n_linear": n_linear,
        "n_soc": n_quad,
        "objective_terms": objective_terms,
        "referenced": referenced,
        "binaries": binaries,
    }


def model_stats(m: Model):
    """Census of variables and rows keyed by family tag."""
    vars_by = {}
    for v in m.variables:
        fam = v.name.split("_", 1)[0]
        vars_by[fam] = vars_by.get(fam, 0) + 1
    lin_by = {}
    for row in m.linear:
        lin_by[row.tag] = lin_by.get(row.tag, 0) + 1
    soc_by = {}
    for row in m.soc:
        soc_by[row.tag] = soc_by.get(row.tag, 0) + 1
    return {
        "variables": vars_by,
        "linear": lin_by,
        "soc": soc_by,
        "totals": {
            "variables": len(m.variables),
            "linear": len(m.linear),
            "soc": len(m.soc),
        },
    }
