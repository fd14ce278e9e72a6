import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verletdem.broadphase import PairList, brute_force_pairs, verlet_build
from verletdem.core import ContactParams, Particle, Particles, SimConfig, WallPlane, vec3
from verletdem.narrowphase import (
    CoincidentCenters, ParticleBehindWall, resolve_contacts, sphere_overlap,
    sphere_plane_overlap, wall_sentinel,
)

FLOOR = WallPlane(vec3(0, 0, 0), vec3(0, 0, 1))


def sphere(i, pos, radius=0.5, vel=(0, 0, 0)):
    return Particle(id=i, position=vec3(*pos), velocity=vec3(*vel),
                    radius=radius, cutoff=radius, mass=1.0)


class TestSphereOverlap:
    def test_overlapping(self):
        c = sphere_overlap(sphere(0, (0, 0, 0)), sphere(1, (0.8, 0, 0)))
        assert c.overlap == pytest.approx(0.2, abs=1e-12)

    def test_exact_touch_is_no_contact(self):
        assert sphere_overlap(sphere(0, (0, 0, 0)), sphere(1, (1.0, 0, 0))) is None

    def test_unequal_radii_contact_point(self):
        # overlap segment on the x axis runs from 0.2 (surface of b) to 0.3
        # (surface of a); its midpoint is 0.25
        a = sphere(0, (0, 0, 0), radius=0.3)
        b = sphere(1, (0.9, 0, 0), radius=0.7)
        c = sphere_overlap(a, b)
        assert c.overlap == pytest.approx(0.1, abs=1e-12)
        np.testing.assert_allclose(c.normal, [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(c.point, [0.25, 0, 0], atol=1e-12)

    def test_coincident_centers(self):
        with pytest.raises(CoincidentCenters):
            sphere_overlap(sphere(0, (1, 1, 1)), sphere(1, (1, 1, 1)))

    def test_symmetry(self):
        a = sphere(0, (0.1, 0.2, 0.3), radius=0.4)
        b = sphere(1, (0.5, 0.1, 0.4), radius=0.35)
        ab = sphere_overlap(a, b)
        ba = sphere_overlap(b, a)
        assert ab.overlap == ba.overlap
        np.testing.assert_array_equal(ab.normal, -ba.normal)

    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3),
        st.lists(st.floats(-0.01, 0.01), min_size=3, max_size=3),
    )
    @settings(max_examples=100, deadline=None)
    def test_overlap_is_lipschitz_in_center(self, pos_b, eps):
        a = sphere(0, (0, 0, 0), radius=1.2)
        b = sphere(1, pos_b, radius=1.2)
        moved = sphere(1, np.asarray(pos_b, dtype=float) + eps, radius=1.2)
        try:
            c0 = sphere_overlap(a, b)
            c1 = sphere_overlap(a, moved)
        except CoincidentCenters:
            return
        ov0 = c0.overlap if c0 else 0.0
        ov1 = c1.overlap if c1 else 0.0
        step = float(np.linalg.norm(eps))
        assert abs(ov1 - ov0) <= step * (1 + 1e-9) + 1e-12


class TestSpherePlane:
    def test_overlapping_floor(self):
        c = sphere_plane_overlap(sphere(0, (0, 0, 0.4)), FLOOR)
        assert c.overlap == pytest.approx(0.1, abs=1e-12)
        np.testing.assert_array_equal(c.normal, [0, 0, -1])
        assert c.id_b == wall_sentinel(0) == -1

    def test_exact_touch(self):
        assert sphere_plane_overlap(sphere(0, (0, 0, 0.5)), FLOOR) is None

    def test_behind_wall_raises(self):
        with pytest.raises(ParticleBehindWall):
            sphere_plane_overlap(sphere(0, (0, 0, -0.1)), FLOOR)


def random_cluster(seed, n=200, box=2.0, radius_range=(0.08, 0.16)):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, box, (n, 3))
    r = rng.uniform(*radius_range, n)
    vel = rng.normal(0, 0.5, (n, 3))
    return Particles(pos, vel, r, r, np.ones(n), np.zeros(n, bool))


class TestResolveContacts:
    def test_far_apart_candidates_resolve_to_nothing(self):
        pset = Particles.from_list([sphere(0, (0, 0, 1)), sphere(1, (5, 5, 1))])
        contacts = resolve_contacts(PairList.from_pairs([(0, 1)]), pset)
        assert len(contacts) == 0

    def test_single_particle_resting_on_floor(self):
        pset = Particles.from_list([sphere(0, (0.3, 0.3, 0.4))])
        contacts = resolve_contacts(PairList.empty(), pset, walls=(FLOOR,))
        assert len(contacts) == 1
        c = contacts[0]
        assert (c.id_a, c.id_b) == (0, -1)
        assert c.overlap == pytest.approx(0.1, abs=1e-12)

    def test_brute_list_and_buffered_list_give_identical_contacts(self):
        # the candidate list only has to be a superset of the true contact
        # set; resolving a brute-force list and an inflated buffered list
        # must produce the same contacts, bit for bit
        pset = random_cluster(99)
        cfg = SimConfig(
            dt=1e-3, k_factor=300, gravity=vec3(0, 0, 0), cell_size=0.8,
            domain_min=vec3(0, 0, 0), domain_max=vec3(2, 2, 2),
            contact=ContactParams(k_n=1.0), seed=0, steps=1,
        )
        exact = brute_force_pairs(pset, pset.cutoff)
        inflated = verlet_build(pset, cfg).list
        assert len(inflated) > len(exact)
        assert resolve_contacts(exact, pset) == resolve_contacts(inflated, pset)

    def test_superset_filter_idempotence(self):
        pset = random_cluster(5, n=60)
        exact = brute_force_pairs(pset, pset.cutoff)
        everything = brute_force_pairs(pset, np.full(len(pset), 10.0))
        assert resolve_contacts(exact, pset) == resolve_contacts(everything, pset)

    def test_output_ordered_by_ids_with_wall_sentinels_first(self):
        pset = Particles.from_list([
            sphere(0, (0.0, 0, 0.4)),
            sphere(1, (0.8, 0, 0.4)),   # overlaps particle 0 and the floor
        ])
        contacts = resolve_contacts(PairList.from_pairs([(0, 1)]), pset, walls=(FLOOR,))
        keys = [(c.id_a, c.id_b) for c in contacts]
        assert keys == [(0, -1), (0, 1), (1, -1)]
        assert keys == sorted(keys)

    def test_behind_wall_reported_not_fatal(self):
        pset = Particles.from_list([sphere(0, (0.3, 0.3, -0.2))])
        reports = []
        contacts = resolve_contacts(PairList.empty(), pset, walls=(FLOOR,),
                                    tunneling=reports)
        assert len(contacts) == 0
        assert reports == [(0, 0)]

    def test_coincident_centers_propagates_ids(self):
        pset = Particles.from_list([sphere(0, (1, 1, 1)), sphere(1, (1, 1, 1))])
        with pytest.raises(CoincidentCenters, match="0 and 1"):
            resolve_contacts(PairList.from_pairs([(0, 1)]), pset)
