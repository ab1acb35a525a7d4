import math

import numpy as np
import pytest

from hardylab.errors import DomainError, MeshError
from hardylab.geometry import (
    BULGE,
    CONE,
    Bulge,
    DomainSpec,
    PotentialSpec,
    TruncationWindow,
    WBump,
    build_domain,
    generate_mesh,
    mesh_lines,
    refine_mesh,
    write_mesh,
)


class TestDomain:
    def test_bulge_needs_ordered_band(self):
        with pytest.raises(ValueError):
            Bulge(r_a=2.0, r_b=1.0, extra_angle=0.1)

    def test_bulge_exits_ambient_cone(self, quarter_domain):
        spec = quarter_domain.model_copy(
            update={"theta_X": math.pi, "bulges": [Bulge(r_a=1.0, r_b=2.0, extra_angle=math.pi)]}
        )
        with pytest.raises(DomainError, match="bulge exits ambient cone"):
            build_domain(spec)

    def test_bulge_outside_truncation(self, quarter_domain):
        spec = quarter_domain.model_copy(update={"bulges": [Bulge(r_a=5.0, r_b=20.0, extra_angle=0.1)]})
        with pytest.raises(DomainError):
            build_domain(spec)

    def test_non_planar_rejected(self):
        with pytest.raises(DomainError):
            build_domain(DomainSpec(theta=1.0, N=3))

    def test_cone_wider_than_ambient(self):
        with pytest.raises(DomainError):
            build_domain(DomainSpec(theta=2.0, theta_X=1.5))

    def test_overlapping_bulges_merge(self, quarter_domain):
        spec = build_domain(
            quarter_domain.model_copy(
                update={
                    "bulges": [
                        Bulge(r_a=1.5, r_b=3.0, extra_angle=0.2),
                        Bulge(r_a=1.0, r_b=2.0, extra_angle=0.4),
                    ]
                }
            )
        )
        assert spec.bulges == [Bulge(r_a=1.0, r_b=3.0, extra_angle=0.4)]

    def test_truncation_helpers(self, quarter_domain):
        window = TruncationWindow.symmetric(4.0)
        assert window.r_min == pytest.approx(0.01)
        assert window.r_max == pytest.approx(100.0)
        assert window.decades == pytest.approx(4.0)
        spec = quarter_domain.truncated(window)
        assert spec.L == pytest.approx(math.log(1e4))

    def test_window_order(self):
        with pytest.raises(ValueError):
            TruncationWindow(r_min=2.0, r_max=1.0)


class TestMesh:
    def test_counts_and_boundary(self, small_mesh):
        assert small_mesh.n_vertices == 9 * 5
        assert small_mesh.n_triangles == 2 * 8 * 4
        assert small_mesh.free.size == 7 * 3
        assert small_mesh.n_cone_vertices == small_mesh.n_vertices

    def test_orientation(self, small_mesh, bulged_mesh):
        assert small_mesh.signed_areas().min() > 0.0
        assert bulged_mesh.signed_areas().min() > 0.0

    def test_geometric_layers(self, small_mesh):
        radii = np.unique(np.round(small_mesh.polar[:, 0], 12))
        ratios = radii[1:] / radii[:-1]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)
        assert small_mesh.grading.ratio == pytest.approx(100.0 ** (1 / 8))

    def test_cone_is_subcomplex_of_perturbed(self, small_mesh, bulged_mesh):
        n = small_mesh.n_vertices
        assert bulged_mesh.n_cone_vertices == n
        np.testing.assert_allclose(bulged_mesh.vertices[:n], small_mesh.vertices)
        np.testing.assert_array_equal(bulged_mesh.triangles[: small_mesh.n_triangles], small_mesh.triangles)
        assert np.all(bulged_mesh.region[: small_mesh.n_triangles] == CONE)
        assert np.all(bulged_mesh.region[small_mesh.n_triangles :] == BULGE)

    def test_bulge_band_snaps_to_layers(self, bulged_mesh):
        (band,) = bulged_mesh.bands
        assert (band.i_a, band.i_b) == (3, 5)
        assert band.columns == 4
        phi = bulged_mesh.polar[bulged_mesh.n_cone_vertices :, 1]
        assert phi.max() == pytest.approx(math.pi)

    def test_bulge_opens_the_lateral_edge(self, small_mesh, bulged_mesh):
        edge = np.flatnonzero(np.isclose(small_mesh.polar[:, 1], math.pi / 2))
        interior_edge = [v for v in edge if not bulged_mesh.dirichlet[v]]
        # layer 4 lies strictly inside the band of layers 3..5
        assert len(interior_edge) == 1
        assert small_mesh.dirichlet[edge].all()

    def test_narrow_bulge_gets_a_column(self, quarter_domain):
        spec = quarter_domain.model_copy(update={"bulges": [Bulge(r_a=1.0, r_b=2.0, extra_angle=1e-3)]})
        mesh = generate_mesh(spec, 8, 4)
        assert mesh.bands[0].columns == 1
        assert mesh.bands[0].i_b > mesh.bands[0].i_a

    def test_degenerate_resolution(self, quarter_domain):
        with pytest.raises(MeshError):
            generate_mesh(quarter_domain, 1, 4)

    def test_refinement_keeps_parent_vertices(self, small_mesh):
        fine = refine_mesh(small_mesh)
        assert fine.n_triangles == 4 * small_mesh.n_triangles
        np.testing.assert_array_equal(fine.vertices[: small_mesh.n_vertices], small_mesh.vertices)
        assert fine.grading.level == 1
        assert fine.signed_areas().sum() == pytest.approx(small_mesh.signed_areas().sum())

    def test_write_mesh(self, small_mesh, tmp_path):
        path = write_mesh(small_mesh, tmp_path / "mesh.txt")
        lines = path.read_text().splitlines()
        assert lines[0] == f"{small_mesh.n_vertices} {small_mesh.n_triangles}"
        assert len(lines) == 1 + small_mesh.n_vertices + small_mesh.n_triangles
        assert len(lines[1].split()) == 5
        assert lines[-1].split()[-1] == "cone"
        assert "".join(mesh_lines(small_mesh)) == path.read_text()


class TestPotential:
    def test_hardy_weight(self):
        pot = PotentialSpec()
        points = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(pot.evaluate(points), [1.0, 0.25, 1 / 25])

    def test_bump_is_subtracted_inside_its_window(self):
        bump = WBump(amplitude=0.2, r_c=0.5, r_d=2.0, phi1=math.pi / 8, phi2=3 * math.pi / 8)
        pot = PotentialSpec(w_bumps=[bump])
        centre = np.array([[math.cos(math.pi / 4), math.sin(math.pi / 4)]])
        outside = np.array([[3.0, 0.1]])
        assert pot.evaluate(centre)[0] < 1.0
        assert pot.evaluate(centre)[0] >= 0.8 - 1e-12
        assert pot.evaluate(outside)[0] == pytest.approx(1 / 9.01)

    def test_bump_support_checked(self, quarter_domain):
        bump = WBump(amplitude=0.1, r_c=0.5, r_d=20.0, phi1=0.2, phi2=0.4)
        with pytest.raises(DomainError):
            PotentialSpec(w_bumps=[bump]).check_support(quarter_domain)

    def test_with_amplitude(self):
        bump = WBump(amplitude=0.1, r_c=0.5, r_d=2.0, phi1=0.2, phi2=0.4)
        pot = PotentialSpec(w_bumps=[bump]).with_amplitude(0.3)
        assert pot.w_bumps[0].amplitude == 0.3
