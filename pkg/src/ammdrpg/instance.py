"""Instance data model, the grid-graph generator, and bit-exact persistence.

Instance file format v1 (plain text, one token-separated record per line):

    ammdrpg-instance v1
    origin <x> <y>
    destination <x> <y>
    fleet drones <n> vm <v> vd <v> endurance <N>
    visit <edge|graph>
    graphs <count>
    graph <id>
    nodes <count>
    node <idx> <x> <y>
    edges <count>
    edge <id> <a> <b> [alpha <f>]     # per-edge alpha only in edge mode
    alpha <f>                          # graph alpha, graph mode only
    end

Floats are written with 17 significant digits so save/load round-trips exactly.
"""

import enum
import random
from dataclasses import dataclass, field

from .geometry import Point, Segment, dist, edge_length

FORMAT_HEADER = "ammdrpg-instance v1"

# Node counts cycle through this mix in graph-id order (20% each for
# multiples of five graphs).
NODE_COUNT_MIX = (4, 6, 8, 10, 12)

# rows x cols grid shapes realizing each node count
_GRID_SHAPES = {4: (2, 2), 6: (2, 3), 8: (2, 4), 10: (2, 5), 12: (3, 4)}


class VisitMode(enum.Enum):
    PerEdge = "edge"
    WholeGraph = "graph"


@dataclass(frozen=True)
class TargetEdge:
    id: int
    a: int                      # node index of endpoint B
    b: int                      # node index of endpoint C
    segment: Segment
    alpha_edge: float = 0.0     # required fraction, edge mode only

    @property
    def length(self) -> float:
        return edge_length(self.segment)


@dataclass(frozen=True)
class TargetGraph:
    id: int
    nodes: tuple
    edges: tuple
    alpha_graph: float = 0.0    # required fraction of total length, graph mode only

    @property
    def total_length(self) -> float:
        return sum(e.length for e in self.edges)


@dataclass(frozen=True)
class Instance:
    origin: Point
    destination: Point
    graphs: tuple
    n_drones: int
    v_m: float
    v_d: float
    endurance: float
    visit_mode: VisitMode

    def graph(self, gid: int) -> TargetGraph:
        for g in self.graphs:
            if g.id == gid:
                return g
        raise KeyError(f"no graph with id {gid}")

    def all_points(self) -> list:
        pts = [self.origin, self.destination]
        for g in self.graphs:
            pts.extend(g.nodes)
        return pts

    def bounding_box(self):
        pts = self.all_points()
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))


def make_graph(gid, nodes, edge_specs, alpha_graph=0.0):
    """Build a TargetGraph from node points and (a, b, alpha_edge) index triples."""
    node_t = tuple(p if isinstance(p, Point) else Point(p[0], p[1]) for p in nodes)
    edges = []
    for eid, spec in enumerate(edge_specs):
        a, b = spec[0], spec[1]
        alpha = spec[2] if len(spec) > 2 else 0.0
        edges.append(TargetEdge(eid, a, b, Segment(node_t[a], node_t[b]), alpha))
    return TargetGraph(gid, node_t, tuple(edges), alpha_graph)


# ---------------------------------------------------------------- validation

def validate_instance(i: Instance) -> list:
    """Machine-readable violation codes; empty list iff the instance is well formed."""
    out = []
    if i.n_drones < 1:
        out.append("EmptyFleet")
    if not i.v_m > 0:
        out.append("NonPositiveMothershipSpeed")
    if not i.v_d > 0:
        out.append("NonPositiveDroneSpeed")
    if not i.endurance > 0:
        out.append("NonPositiveEndurance")
    seen = set()
    for g in i.graphs:
        if g.id in seen:
            out.append(f"DuplicateGraphId:{g.id}")
        seen.add(g.id)
        if not g.edges:
            out.append(f"EmptyGraph:{g.id}")
            continue
        adj = {}
        for e in g.edges:
            if e.a == e.b:
                out.append(f"SelfLoopEdge:{g.id}.{e.id}")
            if not (0 <= e.a < len(g.nodes)) or not (0 <= e.b < len(g.nodes)):
                out.append(f"DanglingEdge:{g.id}.{e.id}")
                continue
            if e.length <= 0:
                out.append(f"ZeroLengthEdge:{g.id}.{e.id}")
            if i.visit_mode is VisitMode.PerEdge and not (0 <= e.alpha_edge <= 1):
                out.append(f"AlphaOutOfRange:{g.id}.{e.id}")
            adj.setdefault(e.a, set()).add(e.b)
            adj.setdefault(e.b, set()).add(e.a)
        if i.visit_mode is VisitMode.WholeGraph and not (0 <= g.alpha_graph <= 1):
            out.append(f"AlphaOutOfRange:{g.id}")
        # connectivity over the edge set (nodes untouched by edges count as disconnection)
        if adj:
            start = next(iter(adj))
            seen_n = {start}
            stack = [start]
            while stack:
                for m in adj.get(stack.pop(), ()):
                    if m not in seen_n:
                        seen_n.add(m)
                        stack.append(m)
            if len(seen_n) != len(g.nodes):
                out.append(f"DisconnectedGraph:{g.id}")
    return out


# ----------------------------------------------------------------- generator

def generate_grid_instance(seed, n_graphs, bbox, n_drones, endurance,
                           visit_mode, v_m=1.0):
    """Seeded instance in the survey recipe: connected grid subgraphs placed
    in disjoint cells of bbox, node counts cycling 4,6,8,10,12, alpha uniform
    in (0,1], drone speed twice the mothership speed. Origin and destination
    sit at the lower-left and lower-right corners of bbox."""
    if n_graphs < 1:
        raise ValueError("n_graphs must be >= 1")
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bbox is degenerate")
    rng = random.Random(seed)
    if isinstance(visit_mode, str):
        visit_mode = VisitMode(visit_mode)

    # disjoint cells: the smallest square grid of cells that fits n_graphs
    per_side = 1
    while per_side * per_side < n_graphs:
        per_side += 1
    cell_w = (x1 - x0) / per_side
    cell_h = (y1 - y0) / per_side
    if cell_w <= 0 or cell_h <= 0:
        raise ValueError("bbox too small to host the requested cells")

    graphs = []
    for gid in range(n_graphs):
        n_nodes = NODE_COUNT_MIX[gid % len(NODE_COUNT_MIX)]
        rows, cols = _GRID_SHAPES[n_nodes]
        cx = x0 + (gid % per_side) * cell_w
        cy = y0 + (gid // per_side) * cell_h
        # fit the grid into the cell with a 15% margin, jittered placement
        margin_x, margin_y = 0.15 * cell_w, 0.15 * cell_h
        avail_w, avail_h = cell_w - 2 * margin_x, cell_h - 2 * margin_y
        sx = avail_w / (cols - 1) if cols > 1 else 0.0
        sy = avail_h / (rows - 1) if rows > 1 else 0.0
        step = min(sx or sy, sy or sx)
        used_w, used_h = step * (cols - 1), step * (rows - 1)
        ox = cx + margin_x + rng.uniform(0, avail_w - used_w)
        oy = cy + margin_y + rng.uniform(0, avail_h - used_h)
        nodes = [Point(ox + c * step, oy + r * step)
                 for r in range(rows) for c in range(cols)]

        def nid(r, c):
            return r * cols + c

        # all grid edges, then a random spanning tree plus a random extra subset
        candidates = []
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols:
                    candidates.append((nid(r, c), nid(r, c + 1)))
                if r + 1 < rows:
                    candidates.append((nid(r, c), nid(r + 1, c)))
        order = list(range(len(candidates)))
        rng.shuffle(order)
        parent = list(range(len(nodes)))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        chosen = set()
        for idx in order:
            a, b = candidates[idx]
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                chosen.add(idx)
        for idx in order:
            if idx not in chosen and rng.random() < 0.5:
                chosen.add(idx)

        edge_specs = []
        for idx in sorted(chosen):
            a, b = candidates[idx]
            alpha = 1.0 - rng.random() if visit_mode is VisitMode.PerEdge else 0.0
            edge_specs.append((a, b, alpha))
        alpha_graph = 1.0 - rng.random() if visit_mode is VisitMode.WholeGraph else 0.0
        graphs.append(make_graph(gid, nodes, edge_specs, alpha_graph))

    return Instance(
        origin=Point(x0, y0),
        destination=Point(x1, y0),
        graphs=tuple(graphs),
        n_drones=n_drones,
        v_m=v_m,
        v_d=2.0 * v_m,
        endurance=endurance,
        visit_mode=visit_mode,
    )


# ---------------------------------------------------------------- persistence

def _f(x: float) -> str:
    return "%.17g" % (x + 0.0 if x != 0 else 0.0)  # normalize -0.0


def save_instance(i: Instance) -> str:
    lines = [FORMAT_HEADER]
    lines.append(f"origin {_f(i.origin.x)} {_f(i.origin.y)}")
    lines.append(f"destination {_f(i.destination.x)} {_f(i.destination.y)}")
    lines.append(f"fleet drones {i.n_drones} vm {_f(i.v_m)} vd {_f(i.v_d)}"
                 f" endurance {_f(i.endurance)}")
    lines.append(f"visit {i.visit_mode.value}")
    lines.append(f"graphs {len(i.graphs)}")
    for g in i.graphs:
        lines.append(f"graph {g.id}")
        lines.append(f"nodes {len(g.nodes)}")
        for k, p in enumerate(g.nodes):
            lines.append(f"node {k} {_f(p.x)} {_f(p.y)}")
        lines.append(f"edges {len(g.edges)}")
        for e in g.edges:
            row = f"edge {e.id} {e.a} {e.b}"
            if i.visit_mode is VisitMode.PerEdge:
                row += f" alpha {_f(e.alpha_edge)}"
            lines.append(row)
        if i.visit_mode is VisitMode.WholeGraph:
            lines.append(f"alpha {_f(g.alpha_graph)}")
        lines.append("end")
    return "\n".join(lines) + "\n"


class FormatError(ValueError):
    """Malformed instance/solution document; message names the field path."""


class _Cursor:
    def __init__(self, text):
        self.lines = [ln for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def next(self, where):
        if self.pos >= len(self.lines):
            raise FormatError(f"{where}: unexpected end of document")
        ln = self.lines[self.pos]
        self.pos += 1
        return ln.split()


def _want(tokens, key, where):
    if not tokens or tokens[0] != key:
        raise FormatError(f"{where}: expected '{key}', got '{' '.join(tokens)}'")
    return tokens[1:]


def _float(tok, where):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"{where}: not a number: '{tok}'") from None


def _int(tok, where):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"{where}: not an integer: '{tok}'") from None


def _kv(tokens, keys, where):
    """Parse 'k1 v1 k2 v2 ...' requiring exactly the given keys in order."""
    vals = []
    for k in keys:
        if len(tokens) < 2 or tokens[0] != k:
            raise FormatError(f"{where}: missing field {k}")
        vals.append(tokens[1])
        tokens = tokens[2:]
    if tokens:
        raise FormatError(f"{where}: trailing tokens {' '.join(tokens)}")
    return vals


def load_instance(text: str) -> Instance:
    cur = _Cursor(text)
    header = " ".join(cur.next("header"))
    if header != FORMAT_HEADER:
        raise FormatError(f"header: expected '{FORMAT_HEADER}', got '{header}'")
    t = _want(cur.next("origin"), "origin", "origin")
    if len(t) != 2:
        raise FormatError("origin: expected two coordinates")
    origin = Point(_float(t[0], "origin.x"), _float(t[1], "origin.y"))
    t = _want(cur.next("destination"), "destination", "destination")
    if len(t) != 2:
        raise FormatError("destination: expected two coordinates")
    destination = Point(_float(t[0], "destination.x"), _float(t[1], "destination.y"))
    t = _want(cur.next("fleet"), "fleet", "fleet")
    drones_s, vm_s, vd_s, end_s = _kv(t, ["drones", "vm", "vd", "endurance"], "fleet")
    n_drones = _int(drones_s, "fleet.drones")
    v_m = _float(vm_s, "fleet.vm")
    v_d = _float(vd_s, "fleet.vd")
    endurance = _float(end_s, "fleet.endurance")
    t = _want(cur.next("visit"), "visit", "visit")
    if len(t) != 1 or t[0] not in ("edge", "graph"):
        raise FormatError("visit: expected 'edge' or 'graph'")
    visit_mode = VisitMode(t[0])
    t = _want(cur.next("graphs"), "graphs", "graphs")
    n_graphs = _int(t[0], "graphs")

    graphs = []
    for k in range(n_graphs):
        where = f"graph[{k}]"
        t = _want(cur.next(where), "graph", where)
        gid = _int(t[0], f"{where}.id")
        t = _want(cur.next(f"{where}.nodes"), "nodes", f"{where}.nodes")
        n_nodes = _int(t[0], f"{where}.nodes")
        nodes = []
        for j in range(n_nodes):
            w = f"{where}.node[{j}]"
            t = _want(cur.next(w), "node", w)
            if len(t) != 3 or _int(t[0], w) != j:
                raise FormatError(f"{w}: expected 'node {j} x y'")
            nodes.append(Point(_float(t[1], f"{w}.x"), _float(t[2], f"{w}.y")))
        t = _want(cur.next(f"{where}.edges"), "edges", f"{where}.edges")
        n_edges = _int(t[0], f"{where}.edges")
        edge_specs = []
        for j in range(n_edges):
            w = f"{where}.edge[{j}]"
            t = _want(cur.next(w), "edge", w)
            if visit_mode is VisitMode.PerEdge:
                if len(t) != 5 or t[3] != "alpha":
                    raise FormatError(f"{w}: expected 'edge id a b alpha f'")
                alpha = _float(t[4], f"{w}.alpha")
            else:
                if len(t) != 3:
                    raise FormatError(f"{w}: expected 'edge id a b'")
                alpha = 0.0
            if _int(t[0], w) != j:
                raise FormatError(f"{w}: edge ids must be consecutive from 0")
            edge_specs.append((_int(t[1], f"{w}.a"), _int(t[2], f"{w}.b"), alpha))
        alpha_graph = 0.0
        if visit_mode is VisitMode.WholeGraph:
            w = f"{where}.alpha"
            t = _want(cur.next(w), "alpha", w)
            alpha_graph = _float(t[0], w)
        _want(cur.next(f"{where}.end"), "end", f"{where}.end")
        for a, b, _ in edge_specs:
            if not (0 <= a < n_nodes and 0 <= b < n_nodes):
                raise FormatError(f"{where}: edge endpoint out of range")
        graphs.append(make_graph(gid, nodes, edge_specs, alpha_graph))

    inst = Instance(origin, destination, tuple(graphs), n_drones,
                    v_m, v_d, endurance, visit_mode)
    bad = validate_instance(inst)
    if bad:
        raise FormatError("invariant violations: " + ", ".join(bad))
    return inst
