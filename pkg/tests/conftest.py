"""Shared fixtures: the golden surface and the two test fleets.

Everything here is deterministic, so session scope is purely a time saver.
The trace fleet keeps systole >= 0.2: the small-t Weyl band (t * trace
within 5% of g-1 at t = 0.01) needs t well below systole^2, and a systole
0.05 surface already overshoots that band by ~9% from its short-geodesic
terms alone.  The lower-bound fleet extends it down to systole 0.05 with
one short curve per surface, which is the regime the determinant lower
bound is about.
"""

import pytest

from hypdet.fuchsian import FenchelNielsen, build_surface_group, standard_pants_graph
from hypdet.spectrum import enumerate_geodesics


def make_fn(genus, lengths, twists):
    return FenchelNielsen(
        genus, standard_pants_graph(genus), tuple(lengths), tuple(twists)
    ).validate()


# name, genus, lengths, twists, cutoff
TRACE_FLEET_SPECS = [
    ("golden", 2, (2.0, 2.0, 2.0), (0.0, 0.0, 0.0), 8.0),
    ("golden-twisted", 2, (2.0, 2.0, 2.0), (0.3, 0.7, 1.1), 8.0),
    ("unit", 2, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), 8.0),
    ("asym", 2, (3.0, 2.0, 1.5), (0.5, 0.0, 2.0), 8.0),
    ("long", 2, (3.5, 3.0, 2.5), (0.5, 1.0, 0.2), 8.0),
    ("short-03", 2, (0.3, 2.5, 3.0), (0.7, 0.1, 1.7), 8.0),
    ("short-05", 2, (0.5, 3.0, 3.0), (0.0, 1.0, 2.0), 8.0),
    ("short-02", 2, (0.2, 3.0, 3.0), (0.0, 0.2, 0.5), 8.0),
    ("g3-flat", 3, (2.0,) * 6, (0.0,) * 6, 7.0),
    ("g3-mixed", 3, (1.5, 2.0, 2.5, 3.0, 1.0, 2.0), (0.2, 0.4, 0.0, 1.0, 0.3, 0.8), 7.0),
    ("g3-asym", 3, (2.8, 1.2, 2.0, 2.4, 3.2, 1.6), (0.0, 0.5, 1.5, 0.0, 0.7, 0.2), 7.0),
    ("g4-flat", 4, (2.5,) * 9, (0.0,) * 9, 6.0),
]

# pinched extension for the determinant lower bound: one short curve each
PINCHED_FLEET_SPECS = [
    ("pinch-005", 2, (0.05, 3.0, 3.0), (0.0, 0.5, 1.0), 8.0),
    ("pinch-007", 2, (0.07, 2.5, 3.5), (0.3, 0.0, 0.9), 8.0),
    ("pinch-010", 2, (0.10, 3.0, 2.0), (0.0, 0.0, 0.0), 8.0),
    ("pinch-012", 2, (0.12, 2.0, 3.0), (1.0, 0.4, 0.0), 8.0),
    ("pinch-015", 2, (0.15, 2.5, 2.5), (0.6, 1.2, 0.1), 8.0),
    ("pinch-018", 2, (0.18, 3.0, 2.6), (0.0, 0.2, 0.5), 8.0),
    ("g3-pinch-005", 3, (0.05, 2.0, 2.5, 3.0, 2.0, 2.2), (0.0,) * 6, 7.0),
    ("g3-pinch-010", 3, (0.10, 2.2, 2.8, 2.0, 3.0, 2.5), (0.4, 0.0, 0.9, 0.0, 0.3, 0.0), 7.0),
]


def _build(specs):
    out = []
    for name, genus, lengths, twists, cutoff in specs:
        fn = make_fn(genus, lengths, twists)
        group = build_surface_group(fn)
        spectrum = enumerate_geodesics(group, cutoff)
        out.append({"name": name, "fn": fn, "group": group, "spectrum": spectrum})
    return out


@pytest.fixture(scope="session")
def golden_fn():
    return make_fn(2, (2.0, 2.0, 2.0), (0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def golden_group(golden_fn):
    return build_surface_group(golden_fn)


@pytest.fixture(scope="session")
def golden_spectrum8(golden_group):
    return enumerate_geodesics(golden_group, 8.0)


@pytest.fixture(scope="session")
def golden_spectrum12(golden_group):
    # ~2.5 minutes; only the acceptance module asks for it
    return enumerate_geodesics(golden_group, 12.0)


@pytest.fixture(scope="session")
def trace_fleet():
    fleet = _build(TRACE_FLEET_SPECS)
    for member in fleet:
        assert member["spectrum"].systole() >= 0.2, member["name"]
    return fleet


@pytest.fixture(scope="session")
def lower_bound_fleet(trace_fleet):
    return trace_fleet + _build(PINCHED_FLEET_SPECS)
