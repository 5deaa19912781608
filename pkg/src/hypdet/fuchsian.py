"""Fuchsian surface groups from Fenchel-Nielsen gluing data.

A closed orientable hyperbolic surface of genus g >= 2 is encoded by a
trivalent pants graph with 2g-2 vertices and 3g-3 edges, a positive length
for every edge and a real twist for every edge.  This module realizes the
corresponding discrete cocompact subgroup of SL(2,R) acting on the upper
half-plane: each vertex becomes an explicit pair of pants with geodesic
boundary, and pants are glued along their boundary axes by isometries that
implement the prescribed twists.

Matrices are kept in SL(2,R) throughout; group elements are only ever
meaningful up to sign (PSL), and consumers canonicalize signs when hashing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EllipticElement, HypdetError, InvalidDecomposition

INF = math.inf

# Tolerance for the parabolic/identity boundary |trace| = 2.  Composite
# matrices drift by ~1e-13 per multiplication, so anything this close to the
# line is treated as length zero rather than elliptic.
_TRACE_TOL = 1e-12

# Internal consistency checks on the pants construction (frame conjugation,
# orientation side tests).  These fire only on construction bugs, never on
# user input, but are kept as hard errors because everything downstream
# silently depends on them.
_FRAME_TOL = 1e-8


class MobiusMatrix:
    """A real Moebius transformation of the upper half-plane.

    Stored as a 2x2 numpy array normalized to determinant one.  The class is
    deliberately thin; bulk enumeration works on raw numpy stacks and only
    wraps single elements on the way in and out.
    """

    __slots__ = ("mat",)

    def __init__(self, a, b, c, d):
        det = a * d - b * c
        if not (math.isfinite(det) and det > 0.0):
            raise DomainError(
                "Moebius matrix needs a positive finite determinant, got det=%r" % (det,)
            )
        s = 1.0 / math.sqrt(det)
        self.mat = np.array([[a * s, b * s], [c * s, d * s]], dtype=float)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1])

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def a(self):
        return float(self.mat[0, 0])

    @property
    def b(self):
        return float(self.mat[0, 1])

    @property
    def c(self):
        return float(self.mat[1, 0])

    @property
    def d(self):
        return float(self.mat[1, 1])

    def __matmul__(self, other):
        return MobiusMatrix.from_array(self.mat @ other.mat)

    def inverse(self):
        a, b, c, d = self.a, self.b, self.c, self.d
        return MobiusMatrix(d, -b, -c, a)

    def trace(self):
        return self.a + self.d

    def apply(self, z):
        """Act on a point of the (closed) upper half-plane."""
        z = complex(z)
        num = self.a * z + self.b
        den = self.c * z + self.d
        return num / den

    def apply_real(self, x):
        """Act on a boundary point; math.inf denotes the point at infinity."""
        if x == INF or x == -INF:
            if self.c == 0.0:
                return INF
            return self.a / self.c
        den = self.c * x + self.d
        if den == 0.0:
            return INF
        return (self.a * x + self.b) / den

    def canonical(self):
        """Sign-normalized copy: the entry of largest magnitude is positive."""
        m = self.mat
        flat = m.reshape(-1)
        k = int(np.argmax(np.abs(flat)))
        if flat[k] < 0.0:
            m = -m
        out = MobiusMatrix.__new__(MobiusMatrix)
        out.mat = np.array(m, dtype=float)
        return out

    def translation_length(self):
        return trace_to_length(self.trace())

    def __repr__(self):
        return "MobiusMatrix([[%r, %r], [%r, %r]])" % (self.a, self.b, self.c, self.d)


def trace_to_length(trace):
    """Translation length 2*arccosh(|tr|/2) of a hyperbolic element.

    |trace| < 2 raises EllipticElement; the boundary |trace| = 2
    (identity or parabolic, which cannot occur in a cocompact torsion-free
    group) maps to length 0.0.
    """
    t = abs(float(trace))
    if t < 2.0 - _TRACE_TOL:
        raise EllipticElement("|trace| = %.17g < 2: element is elliptic" % t)
    if t <= 2.0:
        return 0.0
    return 2.0 * math.acosh(t / 2.0)


def translation_matrix(length):
    """diag(e^{l/2}, e^{-l/2}): translation by `length` along the imaginary
    axis, upward for positive argument."""
    h = 0.5 * float(length)
    return MobiusMatrix(math.exp(h), 0.0, 0.0, math.exp(-h))


def circle_translation(dist):
    """Translation by `dist` along the unit half-circle, from -1 toward +1.

    The unit half-circle passes through i orthogonally to the imaginary
    axis, so this transports the imaginary axis to disjoint geodesics at
    perpendicular distance |dist|.
    """
    h = 0.5 * float(dist)
    return MobiusMatrix(math.cosh(h), math.sinh(h), math.sinh(h), math.cosh(h))


#: Quarter turn around i; conjugation by J inverts diagonal translations.
J_FLIP = MobiusMatrix(0.0, -1.0, 1.0, 0.0)


def fixed_points(m):
    """Boundary fixed points (repelling, attracting) of a hyperbolic element.

    math.inf stands for the point at infinity.
    """
    a, b, c, d = m.a, m.b, m.c, m.d
    tr = a + d
    if abs(tr) <= 2.0:
        raise EllipticElement("fixed points need |trace| > 2, got %.17g" % tr)
    sq = math.sqrt(tr * tr - 4.0)
    lam_big = 0.5 * (tr + math.copysign(sq, tr))
    lam_small = 1.0 / lam_big
    if c == 0.0:
        finite = b / (d - a)
        if abs(a) > abs(d):
            return finite, INF
        return INF, finite
    att = (lam_big - d) / c
    rep = (lam_small - d) / c
    return rep, att


def frame_from_axis(rep, att):
    """SL(2,R) element mapping the upward imaginary axis onto the oriented
    geodesic rep -> att (0 to rep, infinity to att)."""
    if att == INF:
        return MobiusMatrix(1.0, rep, 0.0, 1.0)
    if rep == INF:
        return MobiusMatrix(att, -1.0, 1.0, 0.0)
    if att > rep:
        return MobiusMatrix(att, rep, 1.0, 1.0)
    return MobiusMatrix(-att, rep, -1.0, 1.0)


def foot_to_axis(rep, att, z):
    """Foot on the geodesic (rep, att) of the perpendicular from point z,
    together with the distance from z to the axis."""
    fr = frame_from_axis(rep, att)
    w = fr.inverse().apply(z)
    if w.imag <= 0.0:
        raise DomainError("point %r is not in the upper half-plane" % (z,))
    foot = fr.apply(1j * abs(w))
    dist = math.asinh(abs(w.real) / w.imag)
    return foot, dist


def common_perp_foot(axis_a, axis_b):
    """Foot on axis_a of the common perpendicular between two disjoint axes.

    Axes are (repelling, attracting) endpoint pairs.
    """
    fr = frame_from_axis(*axis_a)
    inv = fr.inverse()
    p = inv.apply_real(axis_b[0])
    q = inv.apply_real(axis_b[1])
    if not (math.isfinite(p) and math.isfinite(q)) or p * q <= 0.0:
        raise DomainError("axes intersect or share an endpoint; no common perpendicular")
    return fr.apply(1j * math.sqrt(p * q))


def point_distance(z, w):
    """Hyperbolic distance between two points of the upper half-plane."""
    z = complex(z)
    w = complex(w)
    if z.imag <= 0.0 or w.imag <= 0.0:
        raise DomainError("points must lie in the open upper half-plane")
    q = 1.0 + (abs(z - w) ** 2) / (2.0 * z.imag * w.imag)
    return math.acosh(q)


def displacement_cosh(m):
    """cosh of the displacement d(i, m i); equals half the squared Frobenius
    norm for determinant-one matrices."""
    return 0.5 * float(np.sum(m.mat * m.mat))


# ---------------------------------------------------------------------------
# Pairs of pants


@dataclass
class PantsGeometry:
    """A hyperbolic pair of pants with geodesic boundary, realized in the
    upper half-plane with slot 0 on the imaginary axis.

    generators[k] translates by lengths[k] along its own axis and the three
    satisfy generators[0] @ generators[1] @ generators[2] = identity exactly.
    frames[k] maps the imaginary axis to axis k so that the conjugated
    generator is diag(e^{l/2}, e^{-l/2}), frames[k](i) is the marker point
    (the foot of the seam toward axis k+1), and the pants interior lies on
    the positive-real side in frame coordinates.
    """

    lengths: tuple
    generators: list
    frames: list
    markers: list
    seam_01: float


def _axis01_distance(lengths):
    """Perpendicular distance between boundary axes 0 and 1; the
    right-angled hexagon relation makes the acosh argument > 1 always."""
    x0, x1, x2 = (math.cosh(0.5 * l) for l in lengths)
    s0, s1 = math.sinh(0.5 * lengths[0]), math.sinh(0.5 * lengths[1])
    return math.acosh((x2 + x0 * x1) / (s0 * s1))


def pants_generators(l0, l1, l2):
    """Boundary-curve matrices (X0, X1, X2) of a pair of pants with the
    given boundary lengths; X0 X1 X2 is the identity exactly.

    X0 translates upward along the imaginary axis, and |tr Xk| equals
    2 cosh(lk / 2) for each k.
    """
    lengths = (float(l0), float(l1), float(l2))
    for l in lengths:
        if not (math.isfinite(l) and l > 0.0):
            raise DomainError("pants boundary lengths must be positive, got %r" % (l,))
    b = _axis01_distance(lengths)
    x0m = translation_matrix(lengths[0])
    shift = circle_translation(b)
    x1m = shift @ translation_matrix(-lengths[1]) @ shift.inverse()
    x2m = (x0m @ x1m).inverse()
    return x0m, x1m, x2m


def build_pants(l0, l1, l2):
    """Construct a PantsGeometry with slot frames and seam markers."""
    gens = pants_generators(l0, l1, l2)
    lengths = (float(l0), float(l1), float(l2))
    b = _axis01_distance(lengths)
    axes = [fixed_points(g) for g in gens]
    markers = [common_perp_foot(axes[k], axes[(k + 1) % 3]) for k in range(3)]
    frames = []
    for k in range(3):
        base = frame_from_axis(*axes[k])
        w = base.inverse().apply(markers[k])
        frames.append(base @ translation_matrix(math.log(abs(w))))

    # A point in the open interior of the pants: the midpoint of the seam
    # between axes 0 and 1 sits strictly between all three axes.
    interior = circle_translation(0.5 * b).apply(1j)
    for k in range(3):
        inv = frames[k].inverse()
        # frame must conjugate the slot generator to a pure diagonal
        # (up to the PSL sign: boundary elements may have negative trace)
        conj = (inv @ gens[k] @ frames[k]).mat
        target = translation_matrix(lengths[k]).mat
        if not (
            np.allclose(conj, target, atol=_FRAME_TOL, rtol=_FRAME_TOL)
            or np.allclose(conj, -target, atol=_FRAME_TOL, rtol=_FRAME_TOL)
        ):
            raise HypdetError("pants frame failed to diagonalize slot %d" % k)
        w = inv.apply(interior)
        if not w.real > 1e-12:
            raise HypdetError("pants orientation invariant violated at slot %d" % k)
        if abs(inv.apply(markers[k]) - 1j) > _FRAME_TOL:
            raise HypdetError("pants marker normalization failed at slot %d" % k)
    return PantsGeometry(lengths, list(gens), frames, markers, b)


# ---------------------------------------------------------------------------
# Fenchel-Nielsen data


@dataclass
class FenchelNielsen:
    """Gluing data: a trivalent pants graph with a length and twist per edge.

    Vertices are 0..2g-3; edges is a sequence of (u, v) pairs, loops
    allowed.  lengths[e] is the geodesic length of the curve for edge e and
    twists[e] the Fenchel-Nielsen twist along it, in length units.
    """

    genus: int
    edges: tuple
    lengths: tuple
    twists: tuple

    def __post_init__(self):
        self.edges = tuple((int(u), int(v)) for (u, v) in self.edges)
        self.lengths = tuple(float(x) for x in self.lengths)
        self.twists = tuple(float(x) for x in self.twists)

    def validate(self):
        g = self.genus
        if not (isinstance(g, int) and g >= 2):
            raise InvalidDecomposition("genus must be an integer >= 2, got %r" % (g,))
        n_v, n_e = 2 * g - 2, 3 * g - 3
        if len(self.edges) != n_e:
            raise InvalidDecomposition(
                "genus %d needs %d edges, got %d" % (g, n_e, len(self.edges))
            )
        if len(self.lengths) != n_e or len(self.twists) != n_e:
            raise InvalidDecomposition(
                "lengths and twists must each have %d entries" % n_e
            )
        degree = [0] * n_v
        for (u, v) in self.edges:
            for w in (u, v):
                if not (0 <= w < n_v):
                    raise InvalidDecomposition(
                        "vertex %d out of range 0..%d" % (w, n_v - 1)
                    )
            degree[u] += 1
            degree[v] += 1
        for v, d in enumerate(degree):
            if d != 3:
                raise InvalidDecomposition(
                    "pants graph must be trivalent; vertex %d has degree %d" % (v, d)
                )
        # connectivity
        adj = {v: set() for v in range(n_v)}
        for (u, v) in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != n_v:
            raise InvalidDecomposition("pants graph is not connected")
        for l in self.lengths:
            # the 1e-4 floor guards arccosh conditioning in the gluing,
            # which degenerates toward the cusp
            if not (math.isfinite(l) and 1e-4 <= l <= 100.0):
                raise InvalidDecomposition(
                    "curve lengths must lie in [1e-4, 100], got %r" % (l,)
                )
        for t in self.twists:
            if not math.isfinite(t):
                raise InvalidDecomposition("twists must be finite, got %r" % (t,))
        return self


def fn_to_json(fn):
    """Serialize Fenchel-Nielsen data to a JSON string."""
    return json.dumps(
        {
            "genus": fn.genus,
            "edges": [list(e) for e in fn.edges],
            "lengths": list(fn.lengths),
            "twists": list(fn.twists),
        },
        indent=2,
    )


def fn_from_json(text):
    """Parse Fenchel-Nielsen data from a JSON string and validate it."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDecomposition("invalid JSON: %s" % exc) from exc
    try:
        fn = FenchelNielsen(
            genus=int(obj["genus"]),
            edges=tuple((int(u), int(v)) for (u, v) in obj["edges"]),
            lengths=tuple(obj["lengths"]),
            twists=tuple(obj["twists"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDecomposition("malformed Fenchel-Nielsen record: %s" % exc) from exc
    return fn.validate()


def standard_pants_graph(genus):
    """A fixed trivalent pants graph for each genus >= 2.

    Genus 2 is two vertices joined by three parallel edges; higher genus is
    a chain with a loop ("handle") at each end and alternating double and
    single connections in between.
    """
    if not (isinstance(genus, int) and genus >= 2):
        raise DomainError("genus must be an integer >= 2, got %r" % (genus,))
    if genus == 2:
        return ((0, 1), (0, 1), (0, 1))
    edges = [(0, 0), (0, 1)]
    for i in range(1, genus - 1):
        a, b = 2 * i - 1, 2 * i
        edges.append((a, b))
        edges.append((a, b))
        if i < genus - 2:
            edges.append((b, b + 1))
    last = 2 * genus - 4
    edges.append((last, last + 1))
    edges.append((last + 1, last + 1))
    return tuple(edges)

# ---------------------------------------------------------------------------
# Gluing


@dataclass
class SurfaceGroup:
    """A cocompact Fuchsian group realizing a genus-g surface.

    generators holds two boundary elements per pants plus one handle element
    per non-tree edge of the pants graph (5g-4 matrices in total; the third
    boundary element of each pants is redundant).  curve_elements[e] is the
    group element translating along the core geodesic of pants edge e, and
    curve_words[e] a witness word for it over the generators (signed
    one-based letters).  relator_residual measures the accumulated floating
    point drift of the gluing relations and is exactly zero in exact
    arithmetic.
    """

    genus: int
    fn: FenchelNielsen
    generators: list
    curve_elements: list
    curve_words: list
    relator_residual: float
    area: float
    basepoint: complex = 1j
    pants: list = field(default_factory=list, repr=False)
    placements: list = field(default_factory=list, repr=False)
    slots: dict = field(default_factory=dict, repr=False)
    tree_edges: tuple = ()
    stable_letter_edges: tuple = ()

    def generator_stack(self):
        """(2n, 2, 2) array of all generators followed by their inverses.

        Row k (0-based) is generator k+1; row n+k is its inverse, i.e. the
        letter -(k+1).  This is the alphabet used for word enumeration.
        """
        n = len(self.generators)
        out = np.empty((2 * n, 2, 2), dtype=float)
        for k, gmat in enumerate(self.generators):
            out[k] = gmat.mat
            out[n + k] = gmat.inverse().mat
        return out

    def min_generator_trace(self):
        return min(abs(g.trace()) for g in self.generators)


def _slot_tables(fn, root):
    """Assign each half-edge to a pants slot.

    Every vertex gets exactly three (edge, end) slots in edge order; the
    root's slot list is rotated so its longest incident edge sits at slot 0,
    which puts the group basepoint on that curve's axis.
    """
    slots = {v: [] for v in range(2 * fn.genus - 2)}
    for e, (u, v) in enumerate(fn.edges):
        slots[u].append((e, 0))
        slots[v].append((e, 1))
    best = max(range(3), key=lambda k: fn.lengths[slots[root][k][0]])
    slots[root] = slots[root][best:] + slots[root][:best]
    return slots


def build_surface_group(fn):
    """Realize Fenchel-Nielsen data as an explicit matrix group.

    Pants are positioned by walking a spanning tree of the pants graph from
    a root vertex; each remaining edge (including every loop) contributes
    one handle generator.  All gluings insert the edge twist followed by a
    half-turn that reverses the boundary orientation, so the two sides of
    each edge carry inverse core-curve elements.
    """
    fn.validate()
    g = fn.genus
    n_v = 2 * g - 2

    longest = max(range(len(fn.edges)), key=lambda e: fn.lengths[e])
    root = min(fn.edges[longest])
    slots = _slot_tables(fn, root)

    pants = []
    for v in range(n_v):
        l0, l1, l2 = (fn.lengths[e] for (e, _) in slots[v])
        pants.append(build_pants(l0, l1, l2))

    # position of each half-edge inside its vertex slot list
    half_slot = {}
    for v in range(n_v):
        for k, (e, end) in enumerate(slots[v]):
            half_slot[(e, end)] = k

    # spanning tree over non-loop edges, BFS from the root in edge order
    adj = {v: [] for v in range(n_v)}
    for e, (u, v) in enumerate(fn.edges):
        if u != v:
            adj[u].append((e, u, v))
            adj[v].append((e, v, u))
    placements = [None] * n_v
    placements[root] = MobiusMatrix.identity()
    tree = []
    parent_of = {}
    frontier = [root]
    visited = {root}
    while frontier:
        nxt = []
        for u in frontier:
            for (e, _, v) in sorted(adj[u]):
                if v in visited:
                    continue
                visited.add(v)
                tree.append(e)
                parent_of[v] = (e, u)
                nxt.append(v)
        frontier = nxt

    def glue_map(e, u, v):
        """Isometry g with placement_v = placement_u @ g for edge e crossed
        from side u to side v."""
        if u == v or fn.edges[e] == (u, v):
            end_u, end_v = 0, 1
        else:
            end_u, end_v = 1, 0
        i = half_slot[(e, end_u)]
        j = half_slot[(e, end_v)]
        fu = pants[u].frames[i]
        fv = pants[v].frames[j]
        return fu @ translation_matrix(fn.twists[e]) @ J_FLIP @ fv.inverse()

    done = {root}
    changed = True
    while changed:
        changed = False
        for v, (e, u) in parent_of.items():
            if v in done or u not in done:
                continue
            placements[v] = placements[u] @ glue_map(e, u, v)
            done.add(v)
            changed = True

    tree_set = set(tree)
    non_tree = [e for e in range(len(fn.edges)) if e not in tree_set]

    stable = {}
    for e in non_tree:
        u, v = fn.edges[e]
        stable[e] = (
            placements[u]
            @ glue_map(e, u, v)
            @ placements[v].inverse()
        )

    # conjugated boundary elements; two per pants generate each vertex group
    def side_element(e, end):
        u = fn.edges[e][end]
        k = half_slot[(e, end)]
        return placements[u] @ pants[u].generators[k] @ placements[u].inverse()

    generators = []
    for v in range(n_v):
        gv = placements[v]
        gvi = gv.inverse()
        generators.append(gv @ pants[v].generators[0] @ gvi)
        generators.append(gv @ pants[v].generators[1] @ gvi)
    for e in non_tree:
        generators.append(stable[e])

    curve_elements = []
    curve_words = []
    for e in range(len(fn.edges)):
        u = fn.edges[e][0]
        k = half_slot[(e, 0)]
        curve_elements.append(side_element(e, 0))
        if k < 2:
            curve_words.append((2 * u + k + 1,))
        else:
            curve_words.append((-(2 * u + 2), -(2 * u + 1)))

    # gluing-relation drift, evaluated on the stored generator letters: a
    # tree edge identifies far with near^{-1} outright, a non-tree edge via
    # its stable letter.  Conjugated letters have norms up to e^{O(graph
    # diameter)} and roundoff injected at any factor propagates through the
    # rest, so the honest measure is backward error: distance from +-I over
    # the product of the factor norms.  The checker itself runs in extended
    # precision so only the stored letters contribute.
    def vertex_letter(w, slot):
        if slot < 2:
            return generators[2 * w + slot]
        return (generators[2 * w] @ generators[2 * w + 1]).inverse()

    stable_index = {e: 2 * n_v + i for i, e in enumerate(non_tree)}
    eye = np.eye(2, dtype=np.longdouble)
    residual = 0.0
    for e in range(len(fn.edges)):
        u, v = fn.edges[e]
        near = vertex_letter(u, half_slot[(e, 0)])
        far = vertex_letter(v, half_slot[(e, 1)])
        if e in stable_index:
            s = generators[stable_index[e]]
            factors = [s, far, s.inverse(), near]
        else:
            factors = [far, near]
        r = eye
        scale = 1.0
        for f in factors:
            r = r @ f.mat.astype(np.longdouble)
            scale *= float(np.linalg.norm(f.mat))
        residual = max(
            residual,
            min(
                float(np.linalg.norm((r - eye).astype(float))),
                float(np.linalg.norm((r + eye).astype(float))),
            )
            / scale,
        )

    return SurfaceGroup(
        genus=g,
        fn=fn,
        generators=generators,
        curve_elements=curve_elements,
        curve_words=curve_words,
        relator_residual=residual,
        area=4.0 * math.pi * (g - 1),
        pants=pants,
        placements=placements,
        slots=slots,
        tree_edges=tuple(sorted(tree_set)),
        stable_letter_edges=tuple(non_tree),
    )


def group_to_json(group):
    """Serialize the generator matrices and gluing metadata."""
    return json.dumps(
        {
            "genus": group.genus,
            "area": group.area,
            "relator_residual": group.relator_residual,
            "generators": [
                {"a": m.a, "b": m.b, "c": m.c, "d": m.d} for m in group.generators
            ],
            "curve_lengths": list(group.fn.lengths),
        },
        indent=2,
    )


def _matrix_from_obj(m):
    if isinstance(m, dict):
        return MobiusMatrix(m["a"], m["b"], m["c"], m["d"])
    return MobiusMatrix(m[0][0], m[0][1], m[1][0], m[1][1])


def generators_from_json(text):
    """Load a generator list: array of {"a","b","c","d"} objects (2x2
    row-major arrays accepted too), bare or under a "generators" key."""
    obj = json.loads(text)
    mats = obj["generators"] if isinstance(obj, dict) else obj
    try:
        out = [_matrix_from_obj(m) for m in mats]
    except (KeyError, TypeError, IndexError) as exc:
        raise DomainError("malformed generator matrix: %s" % exc) from exc
    if not out:
        raise DomainError("no generators found")
    return out
