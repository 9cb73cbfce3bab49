"""Independent feasibility checking for route solutions.

Everything here recomputes quantities from raw coordinates with plain
arithmetic. The module deliberately imports nothing from the model builder or
the solvers, so a passing report is evidence about the solution, not about
shared code paths.

A Solution carries the stage travel allowances explicitly (stage_lengths for
the within-stage legs, bridge_lengths for the between-stage legs). They are
decision quantities, not derived ones: the carrier may stretch a leg beyond
the straight line to buy flight time for a drone, and that stretch is paid in
the objective. The norm rows only bound them from below.
"""

from dataclasses import dataclass, field

from .geometry import Point, dist, point_on_segment
from .instance import (
    FormatError,
    Instance,
    VisitMode,
    _Cursor,
    _f,
    _float,
    _int,
    _want,
)

SOLUTION_HEADER = "ammdrpg-solution v1"
REPORT_HEADER = "ammdrpg-report v1"

FAMILIES = ("assignment", "subtour", "coverage", "distances", "dcw",
            "capacity", "boundary")


@dataclass(frozen=True)
class EdgeVisit:
    edge: int
    rho: float                  # entry parameter on the edge
    lam: float                  # exit parameter
    direction: int              # +1 when lam >= rho, else -1

    @property
    def covered(self) -> float:
        return abs(self.lam - self.rho)


@dataclass(frozen=True)
class Operation:
    graph: int
    drone: int
    visits: tuple
    launch_stage: int           # 1-based
    retrieve_stage: int


@dataclass(frozen=True)
class Stage:
    launch: Point
    retrieve: Point
    operations: tuple = ()


@dataclass(frozen=True)
class Solution:
    mode: str
    stages: tuple
    objective: float
    origin: Point
    destination: Point
    stage_lengths: tuple        # one per stage
    bridge_lengths: tuple       # len(stages) + 1 entries


def build_solution(i: Instance, mode, stages, stage_lengths=None,
                   bridge_lengths=None, objective=None) -> Solution:
    """Fill allowance defaults (straight-line norms) and the objective sum."""
    stages = tuple(stages)
    chain = [i.origin] + [p for s in stages for p in (s.launch, s.retrieve)] \
        + [i.destination]
    if stage_lengths is None:
        stage_lengths = tuple(dist(s.launch, s.retrieve) for s in stages)
    else:
        stage_lengths = tuple(float(x) for x in stage_lengths)
    if bridge_lengths is None:
        bridge_lengths = tuple(dist(chain[2 * t], chain[2 * t + 1])
                               for t in range(len(stages) + 1))
    else:
        bridge_lengths = tuple(float(x) for x in bridge_lengths)
    if len(stage_lengths) != len(stages):
        raise ValueError("stage_lengths must match the stage count")
    if len(bridge_lengths) != len(stages) + 1:
        raise ValueError("bridge_lengths must have one entry per gap")
    if objective is None:
        objective = sum(stage_lengths) + sum(bridge_lengths)
    return Solution(mode=mode, stages=stages, objective=float(objective),
                    origin=i.origin, destination=i.destination,
                    stage_lengths=stage_lengths, bridge_lengths=bridge_lengths)


@dataclass
class ValidationReport:
    tol: float
    residuals: dict
    violations: list            # (family, location, amount)
    diagnostics: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def _op_flight_length(i: Instance, s: Solution, op: Operation) -> float:
    g = i.graph(op.graph)
    launch = s.stages[op.launch_stage - 1].launch
    retrieve = s.stages[op.retrieve_stage - 1].retrieve
    legs = 0.0
    prev_exit = launch
    for v in op.visits:
        e = g.edges[v.edge]
        entry = point_on_segment(e.segment, v.rho)
        exitp = point_on_segment(e.segment, v.lam)
        legs += dist(prev_exit, entry) + v.covered * e.length
        prev_exit = exitp
    legs += dist(prev_exit, retrieve)
    return legs


def check_solution(i: Instance, s: Solution, tol: float,
                   mode=None) -> ValidationReport:
    """Re-evaluate every constraint family by direct arithmetic."""
    mode = mode or s.mode
    res = {fam: 0.0 for fam in FAMILIES}
    bad = []

    def hit(fam, location, amount):
        if amount > res[fam]:
            res[fam] = amount
        if amount > tol:
            bad.append((fam, location, amount))

    T = len(s.stages)
    ops = [(k + 1, op) for k, st in enumerate(s.stages)
           for op in st.operations]

    # assignment: one operation per graph, sane ids, drone exclusivity
    counts = {g.id: 0 for g in i.graphs}
    for _, op in ops:
        if op.graph in counts:
            counts[op.graph] += 1
        else:
            hit("assignment", f"op_g{op.graph}", 1.0)
        if not (1 <= op.drone <= i.n_drones):
            hit("assignment", f"op_g{op.graph}_d{op.drone}", 1.0)
    for gid, c in counts.items():
        hit("assignment", f"g{gid}", float(abs(c - 1)))
    for k, op in ops:
        if op.launch_stage != k:
            hit("assignment", f"op_g{op.graph}_stage", 1.0)
        if not (1 <= op.retrieve_stage <= T):
            hit("assignment", f"op_g{op.graph}_retrieve", 1.0)
        elif mode == "sync" and op.retrieve_stage != op.launch_stage:
            hit("assignment", f"op_g{op.graph}_retrieve", 1.0)
        elif op.retrieve_stage < op.launch_stage:
            hit("assignment", f"op_g{op.graph}_retrieve", 1.0)
    per_drone = {}
    for k, op in ops:
        per_drone.setdefault(op.drone, []).append(op)
    for d, missions in per_drone.items():
        missions.sort(key=lambda o: (o.launch_stage, o.graph))
        for a, b in zip(missions, missions[1:]):
            if b.launch_stage <= a.retrieve_stage:
                hit("assignment", f"d{d}_overlap_t{b.launch_stage}", 1.0)

    # subtour: visits form a simple open walk (distinct edges, valid ids)
    for k, op in ops:
        g = i.graph(op.graph) if op.graph in counts else None
        if g is None:
            continue
        if not op.visits:
            hit("subtour", f"op_g{op.graph}_empty", 1.0)
            continue
        seen = set()
        for v in op.visits:
            if not (0 <= v.edge < len(g.edges)):
                hit("subtour", f"op_g{op.graph}_e{v.edge}", 1.0)
            elif v.edge in seen:
                hit("subtour", f"op_g{op.graph}_e{v.edge}_repeat", 1.0)
            seen.add(v.edge)

    # coverage: parameter boxes, direction signs, alpha requirements
    visited = {}
    for k, op in ops:
        if op.graph not in counts:
            continue
        g = i.graph(op.graph)
        for v in op.visits:
            if not (0 <= v.edge < len(g.edges)):
                continue
            for val, nm in ((v.rho, "rho"), (v.lam, "lam")):
                excess = max(0.0, -val, val - 1.0)
                hit("coverage", f"g{op.graph}_e{v.edge}_{nm}", excess)
            hit("coverage", f"g{op.graph}_e{v.edge}_dir",
                max(0.0, -v.direction * (v.lam - v.rho)))
            visited[(op.graph, v.edge)] = v
    if i.visit_mode is VisitMode.PerEdge:
        for g in i.graphs:
            for e in g.edges:
                v = visited.get((g.id, e.id))
                got = v.covered if v is not None else 0.0
                hit("coverage", f"g{g.id}_e{e.id}_alpha",
                    max(0.0, e.alpha_edge - got))
    else:
        for g in i.graphs:
            got = sum(v.covered * g.edges[v.edge].length
                      for (gid, _), v in visited.items() if gid == g.id)
            hit("coverage", f"g{g.id}_alpha",
                max(0.0, g.alpha_graph * g.total_length - got))

    # distances: allowances dominate the straight-line legs; objective adds up
    chain = [i.origin] + [p for st in s.stages
                          for p in (st.launch, st.retrieve)] + [i.destination]
    for t in range(1, T + 1):
        norm = dist(s.stages[t - 1].launch, s.stages[t - 1].retrieve)
        hit("distances", f"stage_{t}", max(0.0, norm - s.stage_lengths[t - 1]))
    for t in range(T + 1):
        norm = dist(chain[2 * t], chain[2 * t + 1])
        hit("distances", f"bridge_{t}", max(0.0, norm - s.bridge_lengths[t]))
    total = sum(s.stage_lengths) + sum(s.bridge_lengths)
    hit("distances", "objective", abs(s.objective - total))

    # coordination: drone flight time fits inside its carrier window
    worst_rl_variant = 0.0
    for k, op in ops:
        if op.graph not in counts or not op.visits:
            continue
        if not (1 <= op.retrieve_stage <= T) or op.retrieve_stage < k:
            continue
        n_edges = len(i.graph(op.graph).edges)
        if any(not (0 <= v.edge < n_edges) for v in op.visits):
            continue
        flight = _op_flight_length(i, s, op)
        t1, t2 = op.launch_stage, op.retrieve_stage
        budget = sum(s.stage_lengths[t1 - 1:t2]) \
            + sum(s.bridge_lengths[t1:t2])
        hit("dcw", f"op_g{op.graph}",
            max(0.0, (i.v_m / i.v_d) * flight - budget))
        alt = max(0.0, (i.v_m / i.v_d) * flight - s.bridge_lengths[t1])
        worst_rl_variant = max(worst_rl_variant, alt)

    # capacity: per-stage allowance against endurance
    cap = i.v_m * i.endurance
    for t in range(1, T + 1):
        hit("capacity", f"stage_{t}", max(0.0, s.stage_lengths[t - 1] - cap))

    # boundary: the solution's depots echo the instance's
    hit("boundary", "origin", dist(s.origin, i.origin))
    hit("boundary", "destination", dist(s.destination, i.destination))

    bad.sort(key=lambda x: (-x[2], x[0], x[1]))
    return ValidationReport(tol=tol, residuals=res, violations=bad,
                            diagnostics={"dcw_rl_variant": worst_rl_variant})


# --------------------------------------------------- theorem witness search

def _witness_violation(xL, xR, p1, p2, v_m, v_d, endurance, three_leg):
    direct = dist(xL, xR)
    f1 = (dist(xL, p1) + dist(p1, xR)) / v_d - direct / v_m
    f2 = (dist(xL, p2) + dist(p2, xR)) / v_d - direct / v_m
    f3 = direct / v_m - endurance
    f4 = direct - three_leg
    return max(f1, f2, f3, f4)


def check_sync_reducible(p1: Point, p2: Point, xL1: Point, xL2: Point,
                         xR1: Point, xR2: Point, v_m: float, v_d: float,
                         endurance: float):
    """Single-stage launch/retrieve pair replacing an interleaved two-drone
    schedule, or None.

    The four conditions on the pair (in time units where relevant): each
    drone's round trip fits in the straight-line carrier time, that time fits
    the endurance, and the straight line is no longer than the three-leg
    carrier path of the interleaved schedule. The displayed source of the
    first two conditions reads with the carrier time on the small side, which
    would make any coincident pair a witness and can never fail; the flight
    side must be the small one for the reduction to produce a feasible stage,
    so that is what is enforced. Any returned witness is re-verified against
    all four inequalities at 1e-9.
    """
    if v_m <= 0 or v_d <= 0:
        raise ValueError("speeds must be positive")
    pts = [p1, p2, xL1, xL2, xR1, xR2]
    three_leg = dist(xL1, xL2) + dist(xL2, xR1) + dist(xR1, xR2)

    def viol(a, b):
        return _witness_violation(a, b, p1, p2, v_m, v_d, endurance,
                                  three_leg)

    best = None
    for a in pts:
        for b in pts:
            v = viol(a, b)
            if best is None or v < best[0]:
                best = (v, a, b)
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    lo_x, hi_x, lo_y, hi_y = min(xs), max(xs), min(ys), max(ys)
    n = 7
    def axis(lo, hi):
        if hi <= lo:
            return [lo]
        return [lo + (hi - lo) * k / (n - 1) for k in range(n)]
    grid = [Point(x, y) for x in axis(lo_x, hi_x) for y in axis(lo_y, hi_y)]
    for a in grid:
        for b in grid:
            v = viol(a, b)
            if v < best[0]:
                best = (v, a, b)

    # pattern descent on the max violation from the best grid pair
    v, a, b = best
    span = max(hi_x - lo_x, hi_y - lo_y, 1.0)
    step = span / (n - 1)
    while step > 1e-9 * span:
        improved = False
        for dx, dy, which in ((step, 0, 0), (-step, 0, 0), (0, step, 0),
                              (0, -step, 0), (step, 0, 1), (-step, 0, 1),
                              (0, step, 1), (0, -step, 1)):
            ca = Point(a.x + dx, a.y + dy) if which == 0 else a
            cb = Point(b.x + dx, b.y + dy) if which == 1 else b
            cv = viol(ca, cb)
            if cv < v - 1e-15:
                v, a, b = cv, ca, cb
                improved = True
        if not improved:
            step *= 0.5

    if v <= 1e-9 and _witness_violation(a, b, p1, p2, v_m, v_d, endurance,
                                        three_leg) <= 1e-9:
        return (a, b)
    return None


# ------------------------------------------------------------------- files

def save_solution(s: Solution) -> str:
    lines = [SOLUTION_HEADER]
    lines.append(f"mode {s.mode}")
    lines.append(f"origin {_f(s.origin.x)} {_f(s.origin.y)}")
    lines.append(f"destination {_f(s.destination.x)} {_f(s.destination.y)}")
    lines.append(f"objective {_f(s.objective)}")
    lines.append(f"stages {len(s.stages)}")
    for k, st in enumerate(s.stages, start=1):
        lines.append(f"stage {k}")
        lines.append(f"launch {_f(st.launch.x)} {_f(st.launch.y)}")
        lines.append(f"retrieve {_f(st.retrieve.x)} {_f(st.retrieve.y)}")
        lines.append(f"length {_f(s.stage_lengths[k - 1])}")
        lines.append(f"operations {len(st.operations)}")
        for op in st.operations:
            lines.append(f"operation {op.graph} {op.drone} "
                         f"{op.launch_stage} {op.retrieve_stage}")
            lines.append(f"visits {len(op.visits)}")
            for v in op.visits:
                lines.append(f"visit {v.edge} {_f(v.rho)} {_f(v.lam)} "
                             f"{v.direction}")
        lines.append("end")
    lines.append(f"bridges {len(s.bridge_lengths)}")
    for t, b in enumerate(s.bridge_lengths):
        lines.append(f"bridge {t} {_f(b)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _fields(toks, n, where):
    if len(toks) != n:
        raise FormatError(f"{where}: expected {n} fields")
    return toks


def load_solution(text: str) -> Solution:
    cur = _Cursor(text)
    head = cur.next("header")
    if " ".join(head) != SOLUTION_HEADER:
        raise FormatError(f"header: expected '{SOLUTION_HEADER}'")
    toks = _want(cur.next("mode"), "mode", "mode")
    if len(toks) != 1 or toks[0] not in ("sync", "async"):
        raise FormatError("mode: expected sync or async")
    mode = toks[0]
    toks = _fields(_want(cur.next("origin"), "origin", "origin"), 2, "origin")
    origin = Point(_float(toks[0], "origin"), _float(toks[1], "origin"))
    toks = _fields(_want(cur.next("destination"), "destination",
                         "destination"), 2, "destination")
    destination = Point(_float(toks[0], "destination"),
                        _float(toks[1], "destination"))
    toks = _fields(_want(cur.next("objective"), "objective", "objective"),
                   1, "objective")
    objective = _float(toks[0], "objective")
    toks = _fields(_want(cur.next("stages"), "stages", "stages"), 1, "stages")
    n_stages = _int(toks[0], "stages")
    stages, stage_lengths = [], []
    for k in range(1, n_stages + 1):
        where = f"stage {k}"
        toks = _fields(_want(cur.next(where), "stage", where), 1, where)
        if _int(toks[0], where) != k:
            raise FormatError(f"{where}: stages must appear in order")
        toks = _fields(_want(cur.next(where), "launch", where), 2, where)
        launch = Point(_float(toks[0], where), _float(toks[1], where))
        toks = _fields(_want(cur.next(where), "retrieve", where), 2, where)
        retrieve = Point(_float(toks[0], where), _float(toks[1], where))
        toks = _fields(_want(cur.next(where), "length", where), 1, where)
        stage_lengths.append(_float(toks[0], where))
        toks = _fields(_want(cur.next(where), "operations", where), 1, where)
        ops = []
        for _ in range(_int(toks[0], where)):
            toks = _fields(_want(cur.next(where), "operation", where),
                           4, where)
            gid, drone = _int(toks[0], where), _int(toks[1], where)
            t1, t2 = _int(toks[2], where), _int(toks[3], where)
            toks = _fields(_want(cur.next(where), "visits", where), 1, where)
            visits = []
            for _ in range(_int(toks[0], where)):
                toks = _fields(_want(cur.next(where), "visit", where),
                               4, where)
                visits.append(EdgeVisit(edge=_int(toks[0], where),
                                        rho=_float(toks[1], where),
                                        lam=_float(toks[2], where),
                                        direction=_int(toks[3], where)))
            ops.append(Operation(graph=gid, drone=drone,
                                 visits=tuple(visits),
                                 launch_stage=t1, retrieve_stage=t2))
        toks = cur.next(where)
        if toks != ["end"]:
            raise FormatError(f"{where}: expected 'end'")
        stages.append(Stage(launch=launch, retrieve=retrieve,
                            operations=tuple(ops)))
    toks = _fields(_want(cur.next("bridges"), "bridges", "bridges"),
                   1, "bridges")
    n_bridges = _int(toks[0], "bridges")
    if n_bridges != n_stages + 1:
        raise FormatError("bridges: expected one entry per gap")
    bridges = []
    for t in range(n_bridges):
        toks = _fields(_want(cur.next("bridge"), "bridge", "bridge"),
                       2, "bridge")
        if _int(toks[0], "bridge") != t:
            raise FormatError("bridge: entries must appear in order")
        bridges.append(_float(toks[1], "bridge"))
    if cur.next("end") != ["end"]:
        raise FormatError("end: expected final 'end'")
    return Solution(mode=mode, stages=tuple(stages), objective=objective,
                    origin=origin, destination=destination,
                    stage_lengths=tuple(stage_lengths),
                    bridge_lengths=tuple(bridges))


def report_to_text(r: ValidationReport) -> str:
    width = max(len(f) for f in FAMILIES)
    lines = [f"{'family':<{width}}  residual"]
    for fam in FAMILIES:
        lines.append(f"{fam:<{width}}  {r.residuals[fam]:.3e}")
    verdict = "PASS" if r.verdict else "FAIL"
    lines.append(f"{'overall':<{width}}  {verdict} (tol {r.tol:g})")
    for fam, loc, amount in r.violations:
        lines.append(f"  violation {fam} {loc} {amount:.3e}")
    return "\n".join(lines) + "\n"


def save_report(r: ValidationReport) -> str:
    lines = [REPORT_HEADER]
    lines.append(f"tol {_f(r.tol)}")
    lines.append(f"verdict {'pass' if r.verdict else 'fail'}")
    for fam in FAMILIES:
        lines.append(f"family {fam} {_f(r.residuals[fam])}")
    for key in sorted(r.diagnostics):
        lines.append(f"diagnostic {key} {_f(r.diagnostics[key])}")
    lines.append(f"violations {len(r.violations)}")
    for fam, loc, amount in r.violations:
        lines.append(f"violation {fam} {loc} {_f(amount)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def load_report(text: str) -> ValidationReport:
    cur = _Cursor(text)
    if " ".join(cur.next("header")) != REPORT_HEADER:
        raise FormatError(f"header: expected '{REPORT_HEADER}'")
    toks = _fields(_want(cur.next("tol"), "tol", "tol"), 1, "tol")
    tol = _float(toks[0], "tol")
    toks = _fields(_want(cur.next("verdict"), "verdict", "verdict"),
                   1, "verdict")
    stated = toks[0]
    residuals = {}
    for fam in FAMILIES:
        toks = _fields(_want(cur.next("family"), "family", "family"),
                       2, "family")
        if toks[0] != fam:
            raise FormatError(f"family: expected {fam}, got {toks[0]}")
        residuals[fam] = _float(toks[1], f"family {fam}")
    diagnostics = {}
    toks = cur.next("violations")
    while toks and toks[0] == "diagnostic":
        toks = _fields(toks, 3, "diagnostic")
        diagnostics[toks[1]] = _float(toks[2], "diagnostic")
        toks = cur.next("violations")
    toks = _fields(_want(toks, "violations", "violations"), 1, "violations")
    violations = []
    for _ in range(_int(toks[0], "violations")):
        toks = _fields(_want(cur.next("violation"), "violation",
                             "violation"), 3, "violation")
        violations.append((toks[0], toks[1], _float(toks[2], "violation")))
    if cur.next("end") != ["end"]:
        raise FormatError("end: expected final 'end'")
    r = ValidationReport(tol=tol, residuals=residuals, violations=violations,
                         diagnostics=diagnostics)
    if ("pass" if r.verdict else "fail") != stated:
        raise FormatError("verdict: inconsistent with residuals")
    return r
