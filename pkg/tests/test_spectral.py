import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locspec.errors import IncompleteSpectrum, TrivialBall
from locspec.fem import H0, HHAT0, Mesh, assemble, build_mesh, classify_nodes
from locspec.mmspace import BallSpec, PowerWeight, SpaceDescriptor
from locspec.spectral import (
    dirichlet_laplacian,
    dirichlet_spectrum,
    heat_bounds,
    heat_flow,
    rayleigh,
    reduced_pairs,
)

PI = math.pi
HALF = SpaceDescriptor.half_line(0.0)
EXAMPLE_BALL = BallSpec(PI / 4, PI / 4)


def spectrum(space, ball, convention, k, h, **kw):
    mesh = build_mesh(space, ball, h)
    return dirichlet_spectrum(space, mesh, ball, convention, k, **kw)


@pytest.fixture(scope="module")
def example_fine():
    return {c: spectrum(HALF, EXAMPLE_BALL, c, 3, 5e-4) for c in (H0, HHAT0)}


class TestExamples:
    def test_limit_ball_h0(self, example_fine):
        assert example_fine[H0].eigenvalues[0] == pytest.approx(4.0, rel=1e-3)

    def test_limit_ball_hat(self, example_fine):
        assert example_fine[HHAT0].eigenvalues[0] == pytest.approx(1.0, rel=1e-3)

    def test_moving_ball(self):
        s = spectrum(HALF, BallSpec(PI / 4 - 0.1, PI / 4), H0, 1, 5e-4)
        assert s.eigenvalues[0] == pytest.approx((PI / (PI - 0.2)) ** 2, rel=1e-3)
        assert s.eigenvalues[0] == pytest.approx(1.14060, rel=1e-3)

    def test_full_circle_hat_is_neumann(self):
        s = spectrum(SpaceDescriptor.circle(2 * PI), BallSpec(0.0, PI), HHAT0, 5, 1e-2)
        assert s.eigenvalues[0] <= 1e-8
        assert s.clusters()[:3] == [[0], [1, 2], [3, 4]]
        assert s.eigenvalues[1:] == pytest.approx([1, 1, 4, 4], rel=1e-3)

    def test_full_circle_h0_cuts_at_antipode(self):
        s = spectrum(SpaceDescriptor.circle(2 * PI), BallSpec(0.0, PI), H0, 3, 1e-2)
        assert s.eigenvalues == pytest.approx([0.25, 1.0, 2.25], rel=1e-3)

    def test_higher_modes(self, example_fine):
        assert example_fine[H0].eigenvalues == pytest.approx([4, 16, 36], rel=1e-3)
        assert example_fine[HHAT0].eigenvalues == pytest.approx([1, 9, 25], rel=1e-3)


class TestErrors:
    def test_k_too_large(self):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 0.2)
        with pytest.raises(ValueError):
            dirichlet_spectrum(HALF, mesh, EXAMPLE_BALL, H0, 10_000)

    def test_k_zero(self):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 0.2)
        with pytest.raises(ValueError):
            dirichlet_spectrum(HALF, mesh, EXAMPLE_BALL, H0, 0)

    def test_trivial_ball(self):
        forms = assemble(HALF, Mesh(np.array([0.0, 1.0])))
        with pytest.raises(TrivialBall):
            reduced_pairs(forms, np.array([], dtype=int), 1)

    def test_unknown_method(self):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 0.1)
        with pytest.raises(ValueError):
            dirichlet_spectrum(HALF, mesh, EXAMPLE_BALL, H0, 1, method="qr")


SPACES = [
    (HALF, EXAMPLE_BALL),
    (SpaceDescriptor.cone(3), BallSpec(0.0, 1.0)),
    (SpaceDescriptor.cone(3), BallSpec(0.4, 1.0)),
    (SpaceDescriptor.circle(2 * PI), BallSpec(0.0, 2.0)),
    (SpaceDescriptor.line(weight=PowerWeight(0.5, 0.3)), BallSpec(0.0, 1.0)),
]


class TestSpectrumInvariants:
    @pytest.mark.parametrize("space,ball", SPACES)
    @pytest.mark.parametrize("conv", [H0, HHAT0])
    def test_residual_and_orthonormality(self, space, ball, conv):
        s = spectrum(space, ball, conv, 4, 2e-3)
        assert np.all(np.diff(s.eigenvalues) >= 0)
        assert s.eigenvalues[0] >= 0
        assert np.max(s.residuals) <= 1e-9
        G = s.forms.mass(s.eigenvectors, s.eigenvectors)
        assert np.abs(G - np.eye(4)).max() <= 1e-10
        assert np.all(s.eigenvectors[np.setdiff1d(np.arange(s.mesh.n_nodes), s.free)] == 0)

    def test_residual_backward_error_on_fine_mesh(self, example_fine):
        # absolute defect grows like 1/h through A; relative to ||A|| it stays at rounding level
        s = example_fine[H0]
        a_norm = float(np.abs(s.forms.A).sum(axis=1).max())
        assert np.max(s.residuals) / a_norm <= 1e-12

    def test_dense_and_sparse_agree(self):
        mesh = build_mesh(SpaceDescriptor.circle(2 * PI), BallSpec(0.0, PI), 5e-3)
        a = dirichlet_spectrum(SpaceDescriptor.circle(2 * PI), mesh, BallSpec(0.0, PI), HHAT0, 5, method="dense")
        b = dirichlet_spectrum(SpaceDescriptor.circle(2 * PI), mesh, BallSpec(0.0, PI), HHAT0, 5, method="sparse")
        assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10, atol=1e-10)

    def test_sign_convention(self):
        s = spectrum(HALF, EXAMPLE_BALL, H0, 3, 1e-2)
        for j in range(3):
            v = s.eigenvectors[:, j]
            assert v[np.argmax(np.abs(v))] > 0

    @pytest.mark.parametrize("space,ball", SPACES)
    def test_convention_ordering(self, space, ball):
        mesh = build_mesh(space, ball, 1e-2)
        a = dirichlet_spectrum(space, mesh, ball, H0, 4)
        b = dirichlet_spectrum(space, mesh, ball, HHAT0, 4)
        assert np.all(a.eigenvalues >= b.eigenvalues - 1e-10 * np.abs(a.eigenvalues))

    @settings(max_examples=15)
    @given(c=st.floats(0.01, 100.0), conv=st.sampled_from([H0, HHAT0]))
    def test_measure_scaling(self, c, conv):
        space, ball = SpaceDescriptor.cone(3), BallSpec(0.3, 1.0)
        mesh = build_mesh(space, ball, 2e-2)
        a = dirichlet_spectrum(space, mesh, ball, conv, 3)
        b = dirichlet_spectrum(space.scaled_weight(c), mesh, ball, conv, 3)
        assert np.allclose(b.eigenvalues, a.eigenvalues, rtol=1e-12, atol=0)

    @settings(max_examples=15)
    @given(c=st.floats(0.2, 5.0), conv=st.sampled_from([H0, HHAT0]))
    def test_length_scaling(self, c, conv):
        space, ball = HALF, BallSpec(0.6, 1.0)
        mesh = build_mesh(space, ball, 2e-2)
        a = dirichlet_spectrum(space, mesh, ball, conv, 3)
        big = Mesh(c * np.asarray(mesh.nodes))
        b = dirichlet_spectrum(space, big, BallSpec(c * 0.6, c * 1.0), conv, 3)
        assert np.allclose(b.eigenvalues, a.eigenvalues / c**2, rtol=1e-10, atol=0)

    @settings(max_examples=20)
    @given(r=st.floats(0.2, 2.9))
    def test_positive_first_eigenvalue_off_full_circle(self, r):
        space, ball = SpaceDescriptor.circle(2 * PI), BallSpec(0.0, r)
        s = spectrum(space, ball, HHAT0, 1, 5e-2)
        assert s.eigenvalues[0] > 1e-6

    @pytest.mark.parametrize("r", [PI, 3.5, 5.0])
    def test_zero_first_eigenvalue_on_full_circle(self, r):
        s = spectrum(SpaceDescriptor.circle(2 * PI), BallSpec(0.0, r), HHAT0, 1, 5e-2)
        assert s.eigenvalues[0] <= 1e-8


class TestMeshConvergence:
    @pytest.mark.parametrize("conv,exact", [(H0, [4, 16, 36]), (HHAT0, [1, 9, 25])])
    def test_quadratic_rate_on_interval_ball(self, conv, exact):
        errs = [np.abs(spectrum(HALF, EXAMPLE_BALL, conv, 3, h).eigenvalues - exact) for h in (1e-2, 5e-3)]
        ratio = errs[0] / errs[1]
        assert np.all((3.5 <= ratio) & (ratio <= 4.5)), ratio

    def test_quadratic_rate_on_circle(self):
        space, ball = SpaceDescriptor.circle(2 * PI), BallSpec(0.0, PI)
        errs = [np.abs(spectrum(space, ball, HHAT0, 5, h).eigenvalues[1:] - [1, 1, 4, 4]) for h in (2e-2, 1e-2)]
        ratio = errs[0] / errs[1]
        assert np.all((3.5 <= ratio) & (ratio <= 4.5)), ratio


class TestRayleigh:
    def test_eigenvector_gives_eigenvalue(self):
        s = spectrum(HALF, EXAMPLE_BALL, H0, 1, 1e-2)
        sets = classify_nodes(HALF, s.mesh, EXAMPLE_BALL, H0)
        assert rayleigh(s.forms, sets, s.eigenvectors[:, 0]) == pytest.approx(s.eigenvalues[0], rel=1e-12)

    def test_hat_function_above_first_eigenvalue(self):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 1e-2)
        forms = assemble(HALF, mesh)
        sets = classify_nodes(HALF, mesh, EXAMPLE_BALL, H0)
        f = np.zeros(mesh.n_nodes)
        f[sets.free[len(sets.free) // 2]] = 1.0
        assert rayleigh(forms, sets, f) >= 4 * (1 - 1e-3)

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_min_max_lower_bound(self, seed):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 5e-2)
        forms = assemble(HALF, mesh)
        sets = classify_nodes(HALF, mesh, EXAMPLE_BALL, HHAT0)
        lam1 = reduced_pairs(forms, sets.free, 1)[0][0]
        f = np.zeros(mesh.n_nodes)
        f[sets.free] = np.random.default_rng(seed).standard_normal(len(sets.free))
        assert rayleigh(forms, sets, f) >= lam1 * (1 - 1e-12)

    def test_constant_on_full_circle(self):
        space, ball = SpaceDescriptor.circle(2 * PI), BallSpec(0.0, PI)
        mesh = build_mesh(space, ball, 1e-2)
        forms = assemble(space, mesh)
        sets = classify_nodes(space, mesh, ball, HHAT0)
        assert abs(rayleigh(forms, sets, np.ones(mesh.n_nodes))) <= 1e-12

    def test_rejects_bad_fields(self):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 1e-1)
        forms = assemble(HALF, mesh)
        sets = classify_nodes(HALF, mesh, EXAMPLE_BALL, H0)
        with pytest.raises(ValueError):
            rayleigh(forms, sets, np.zeros(mesh.n_nodes))
        with pytest.raises(ValueError):
            rayleigh(forms, sets, np.ones(mesh.n_nodes))


@pytest.fixture(scope="module")
def complete():
    mesh = build_mesh(HALF, EXAMPLE_BALL, 2e-2)
    sets = classify_nodes(HALF, mesh, EXAMPLE_BALL, H0)
    return dirichlet_spectrum(HALF, mesh, EXAMPLE_BALL, H0, len(sets.free))


class TestHeatFlow:
    def test_first_mode_decays_exponentially(self, complete):
        u1 = complete.eigenvectors[:, 0]
        for t in (0.0, 0.05, 0.7):
            u = heat_flow(u1, t, complete)
            assert np.abs(u - math.exp(-complete.eigenvalues[0] * t) * u1).max() <= 1e-10

    def test_identity_at_time_zero(self, complete):
        rng = np.random.default_rng(1)
        f = complete.eigenvectors @ rng.standard_normal(complete.k)
        assert np.abs(heat_flow(f, 0.0, complete) - f).max() <= 1e-10 * np.abs(f).max()

    def test_forms_and_sets_path(self, complete):
        sets = classify_nodes(HALF, complete.mesh, EXAMPLE_BALL, H0)
        f = np.sin(np.asarray(complete.mesh.nodes))
        f[sets.constrained] = 0
        a = heat_flow(f, 0.3, complete)
        b = heat_flow(f, 0.3, forms=complete.forms, sets=sets)
        assert np.abs(a - b).max() <= 1e-10

    def test_partial_spectrum_rejected(self):
        s = spectrum(HALF, EXAMPLE_BALL, H0, 2, 2e-2)
        with pytest.raises(IncompleteSpectrum):
            heat_flow(s.eigenvectors[:, 0], 0.1, s)

    def test_negative_time_rejected(self, complete):
        with pytest.raises(ValueError):
            heat_flow(complete.eigenvectors[:, 0], -1.0, complete)

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_norm_nonincreasing(self, complete, seed):
        f = np.random.default_rng(seed).standard_normal(complete.mesh.n_nodes)
        norms = [complete.forms.l2_norm(heat_flow(f, t, complete)) for t in (0, 0.01, 0.1, 0.5, 2.0)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1), t=st.sampled_from([0.01, 0.1, 1.0]))
    def test_energy_and_laplacian_bounds(self, complete, seed, t):
        f = np.random.default_rng(seed).standard_normal(complete.mesh.n_nodes)
        hb = heat_bounds(complete, f, t)
        assert hb.energy_ok and hb.laplacian_ok

    def test_laplacian_matches_operator(self, complete):
        f = np.cos(np.asarray(complete.mesh.nodes))
        hb_u = heat_flow(f, 0.2, complete)
        lap = dirichlet_laplacian(complete.forms, complete.free, hb_u)
        assert complete.forms.l2_norm(lap) == pytest.approx(heat_bounds(complete, f, 0.2).laplacian_norm, rel=1e-8)

    @settings(max_examples=20)
    @given(seed=st.integers(0, 2**32 - 1), t=st.floats(1e-3, 2.0))
    def test_markov_with_lumped_mass(self, seed, t):
        mesh = build_mesh(HALF, EXAMPLE_BALL, 5e-2)
        sets = classify_nodes(HALF, mesh, EXAMPLE_BALL, HHAT0)
        s = dirichlet_spectrum(HALF, mesh, EXAMPLE_BALL, HHAT0, len(sets.free), lumped=True)
        f = np.random.default_rng(seed).uniform(0, 1, mesh.n_nodes)
        u = heat_flow(f, t, s)
        assert u.min() >= -1e-10 and u.max() <= 1 + 1e-10


def test_csv_export():
    s = spectrum(HALF, EXAMPLE_BALL, H0, 2, 1e-1)
    lines = s.to_csv().splitlines()
    assert lines[0] == "k,lambda,residual"
    assert lines[1].startswith("1,")
    wide = s.to_csv(vectors=True).splitlines()
    assert len(wide[0].split(",")) == 3 + s.mesh.n_nodes
