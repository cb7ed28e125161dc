import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from hjbrom import linalg
from hjbrom.errors import RankDeficiencyError, StabilityError
from hjbrom.models import build_advection_diffusion, build_burgers, simulate
from hjbrom.reduction import (
    AdjointPODReducer,
    BalancedTruncationReducer,
    PODReducer,
    ReducedBasis,
    RiccatiReducer,
    bt_basis,
    make_reducer,
    pod_basis,
    project,
    riccati_basis,
    snapshot_matrix,
)


@pytest.fixture(scope="module")
def heat():
    return build_advection_diffusion(61, 0.2, 2.0, (-0.5, -0.1), (0.1, 0.6))


@pytest.fixture(scope="module")
def heat_forward(heat):
    return simulate(heat, np.zeros(61), np.sin, 1e-3, 2 * np.pi)


class TestPodBasis:
    def test_rank_one_snapshots(self):
        rng = np.random.default_rng(0)
        s = rng.standard_normal(8)
        y = np.outer(s, rng.uniform(0.5, 2.0, 12))
        basis = pod_basis(y, 1)
        direction = s / np.linalg.norm(s)
        assert abs(basis.v[:, 0] @ direction) == pytest.approx(1.0, abs=1e-12)

    def test_identity_snapshots(self):
        basis = pod_basis(np.eye(5), 3)
        assert np.allclose(basis.singular_values, 1.0)
        assert np.allclose(basis.v.T @ basis.v, np.eye(3), atol=1e-12)

    def test_projection_error_matches_svd_tail(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((10, 30))
        basis = pod_basis(y, 3)
        err = np.linalg.norm(y - basis.v @ (basis.v.T @ y), "fro") ** 2
        tail = np.sum(basis.singular_values[3:] ** 2)
        assert err == pytest.approx(tail, rel=1e-10)

    def test_rank_zero_rejected(self):
        with pytest.raises(RankDeficiencyError):
            pod_basis(np.zeros((4, 6)), 1)

    def test_order_beyond_rank_rejected(self):
        rng = np.random.default_rng(2)
        y = np.outer(rng.standard_normal(6), rng.standard_normal(9))
        with pytest.raises(RankDeficiencyError):
            pod_basis(y, 2)

    def test_optimality_against_random_frames(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((12, 40)) * np.linspace(3, 0.1, 12)[:, None]
        basis = pod_basis(y, 4)
        best = np.linalg.norm(y - basis.v @ (basis.v.T @ y), "fro")
        for _ in range(50):
            frame = np.linalg.qr(rng.standard_normal((12, 4)))[0]
            competitor = np.linalg.norm(y - frame @ (frame.T @ y), "fro")
            assert best <= competitor + 1e-12

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((7, 20))
        a = pod_basis(y, 3)
        b = pod_basis(y.copy(), 3)
        assert np.array_equal(a.v, b.v)
        for col in a.v.T:
            assert col[np.argmax(np.abs(col))] > 0


class TestBtBasis:
    def test_scalar_gramians_and_hankel_value(self):
        basis = bt_basis([[-1.0]], [[1.0]], [[1.0]], 1)
        # both Gramians solve -2x + 1 = 0
        assert basis.singular_values[0] == pytest.approx(0.5, abs=1e-12)
        assert basis.w[0, 0] * basis.v[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_zero_input_rejected(self):
        with pytest.raises(RankDeficiencyError):
            bt_basis(-np.eye(3), np.zeros((3, 1)), np.ones((1, 3)), 1)

    def test_unstable_rejected(self):
        with pytest.raises(StabilityError):
            bt_basis(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), 1)

    def test_dc_gain_within_hankel_bound(self, heat):
        order = 4
        basis = bt_basis(heat.a, heat.b, heat.c, order)
        full = heat.c @ np.linalg.solve(-heat.a, heat.b)
        a_r = basis.w.T @ heat.a @ basis.v
        b_r = basis.w.T @ heat.b
        reduced = (heat.c @ basis.v) @ np.linalg.solve(-a_r, b_r)
        bound = 2.0 * np.sum(basis.singular_values[order:])
        assert abs(full[0, 0] - reduced[0, 0]) <= bound

    def test_biorthogonality(self, heat):
        for order in range(1, 7):
            basis = bt_basis(heat.a, heat.b, heat.c, order)
            gram = basis.w.T @ basis.v
            assert np.max(np.abs(gram - np.eye(order))) < 1e-10


class TestRiccatiBasis:
    def test_diagonal_case(self):
        basis = riccati_basis(np.diag([4.0, 1.0, 0.0]), 1)
        assert np.allclose(np.abs(basis.v[:, 0]), [1.0, 0.0, 0.0], atol=1e-12)
        assert np.allclose(basis.singular_values, [4.0, 1.0, 0.0])

    def test_order_beyond_dimension_rejected(self):
        with pytest.raises(ValueError):
            riccati_basis(np.eye(3), 4)

    def test_quadratic_form_truncation_bound(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((12, 12))
        p = m @ m.T
        eigvals, eigvecs = linalg.sym_eig(p)
        for order in (1, 3, 6):
            basis = riccati_basis(p, order)
            p_trunc = (basis.v * basis.singular_values[:order]) @ basis.v.T
            for _ in range(100):
                x = rng.standard_normal(12)
                gap = abs(x @ p @ x - x @ p_trunc @ x)
                assert gap <= eigvals[order] * (x @ x) * (1 + 1e-10)

    def test_full_order_exact(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((5, 5))
        p = m @ m.T
        basis = riccati_basis(p, 5)
        rebuilt = (basis.v * basis.singular_values) @ basis.v.T
        assert np.allclose(rebuilt, p, atol=1e-10)


class TestProject:
    def test_identity_basis(self, heat):
        n = heat.dim
        basis = ReducedBasis(
            v=np.eye(n), w=np.eye(n), singular_values=np.ones(n), method="POD"
        )
        rsys = project(heat, basis, 0.2)
        assert np.allclose(rsys.a, heat.a)
        assert np.allclose(rsys.lower, -0.2)
        assert np.allclose(rsys.upper, 0.2)

    def test_bounds_match_sign_vector_enumeration(self):
        rng = np.random.default_rng(7)
        n, order = 8, 3
        w, _ = np.linalg.qr(rng.standard_normal((n, order)))
        v = w.copy()
        basis = ReducedBasis(v=v, w=w, singular_values=np.ones(order), method="POD")
        sys = build_advection_diffusion(n, 0.5, 0.0, (-0.5, -0.1), (0.1, 0.6))
        radius = 0.2
        rsys = project(sys, basis, radius)
        # oracle: maximize each (w^T x)_i over the sup-norm ball at sign vectors
        from itertools import product

        for i in range(order):
            best = max(
                abs(np.dot(w[:, i], radius * np.array(s)))
                for s in product((-1.0, 1.0), repeat=n)
            )
            assert rsys.upper[i] == pytest.approx(best, rel=1e-12)
            assert rsys.lower[i] == pytest.approx(-best, rel=1e-12)

    def test_projected_states_stay_in_bounds(self, heat):
        basis = riccati_basis(
            linalg.solve_are(heat.a, heat.b, heat.q_cost, heat.r_cost, 0.0), 4
        )
        radius = 0.2
        rsys = project(heat, basis, radius)
        rng = np.random.default_rng(8)
        x = rng.uniform(-radius, radius, (1000, heat.dim))
        y = x @ basis.w
        assert np.all(y >= rsys.lower - 1e-12)
        assert np.all(y <= rsys.upper + 1e-12)

    def test_linear_reduction_exact(self, heat):
        basis = pod_basis(np.linalg.qr(np.random.default_rng(9).standard_normal((61, 10)))[0], 3)
        rsys = project(heat, basis, 0.2)
        rng = np.random.default_rng(10)
        for _ in range(5):
            y = rng.standard_normal(3)
            u = rng.standard_normal(1)
            full = basis.w.T @ heat.dynamics(basis.v @ y, u)
            assert np.allclose(rsys.dynamics(y, u), full, atol=1e-12)

    def test_nonlinear_reduction_lifts_through_basis(self):
        sys = build_burgers(31, 0.2, 5.0, (-0.7, -0.5))
        rng = np.random.default_rng(11)
        w, _ = np.linalg.qr(rng.standard_normal((31, 2)))
        basis = ReducedBasis(v=w, w=w, singular_values=np.ones(2), method="POD")
        rsys = project(sys, basis, 0.2)
        y = rng.uniform(-0.1, 0.1, 2)
        expected = w.T @ sys.nonlinear(w @ y)
        assert np.allclose(rsys.nonlinear(y), expected, atol=1e-12)
        batch = rng.uniform(-0.1, 0.1, (6, 2))
        assert np.allclose(rsys.nonlinear(batch), sys.nonlinear(batch @ w.T) @ w)

    def test_invalid_radius(self, heat):
        basis = riccati_basis(np.eye(61), 2)
        with pytest.raises(ValueError):
            project(heat, basis, 0.0)


class TestReducers:
    def test_pod_reducer_from_trajectory(self, heat, heat_forward):
        red = PODReducer(n_components=3).fit(heat_forward)
        assert red.V_.shape == (61, 3)
        assert np.allclose(red.W_.T @ red.V_, np.eye(3), atol=1e-10)
        coords = red.transform(heat_forward.states[::500])
        lifted = red.inverse_transform(coords)
        assert lifted.shape == (coords.shape[0], 61)

    def test_pod_reducer_from_array_rows(self):
        rng = np.random.default_rng(12)
        states = rng.standard_normal((40, 9))
        red = PODReducer(n_components=2).fit(states)
        oracle = np.linalg.svd(states.T, full_matrices=False)[0][:, :2]
        overlap = np.abs(red.V_.T @ oracle)
        assert np.allclose(np.diag(overlap), 1.0, atol=1e-10)

    def test_adjoint_reducer(self, heat, heat_forward):
        red = AdjointPODReducer(n_components=3, dt=1e-3).fit(
            heat, forward=heat_forward
        )
        assert red.basis_.method == "PODadj"
        assert np.allclose(red.W_.T @ red.V_, np.eye(3), atol=1e-10)

    def test_adjoint_reducer_degenerate_input_fails(self, heat):
        quiet = simulate(heat, np.zeros(61), None, 1e-3, 0.1)
        with pytest.raises(RankDeficiencyError):
            AdjointPODReducer(n_components=2).fit(heat, forward=quiet)

    def test_adjoint_alignment_with_oracle_svd(self, heat, heat_forward):
        from hjbrom.models import simulate_adjoint

        adjoint = simulate_adjoint(heat, heat_forward)
        red = AdjointPODReducer(n_components=1).fit(heat, forward=heat_forward)
        thinned = snapshot_matrix(adjoint, 500)
        dominant = np.linalg.svd(thinned, full_matrices=False)[0][:, 0]
        assert abs(red.V_[:, 0] @ dominant) >= 0.99

    def test_bt_reducer(self, heat):
        red = BalancedTruncationReducer(n_components=4).fit(heat)
        assert red.basis_.method == "BT"
        assert np.max(np.abs(red.W_.T @ red.V_ - np.eye(4))) < 1e-10

    def test_riccati_reducer_on_nonlinear_system(self):
        sys = build_burgers(31, 0.2, 5.0, (-0.7, -0.5))
        red = RiccatiReducer(n_components=2).fit(sys)
        assert red.basis_.method == "Ricc"
        # basis comes from the zero-state linearization
        p = red.riccati_solution_
        shifted = sys.a - sys.discount * np.eye(31)
        res = (
            shifted.T @ p
            + p @ shifted
            - p @ sys.b @ np.linalg.solve(sys.r_cost, sys.b.T @ p)
            + sys.q_cost
        )
        assert np.linalg.norm(res, "fro") <= 1e-8 * (1 + np.linalg.norm(sys.q_cost, "fro"))

    def test_unfitted_transform_raises(self):
        with pytest.raises(NotFittedError):
            PODReducer(2).transform(np.zeros((3, 5)))

    def test_get_params_roundtrip(self):
        red = PODReducer(n_components=5, max_snapshots=100)
        params = red.get_params()
        assert params["n_components"] == 5
        clone = PODReducer(**params)
        assert clone.max_snapshots == 100

    def test_make_reducer_dispatch(self):
        assert isinstance(make_reducer("POD", 2), PODReducer)
        assert isinstance(make_reducer("PODadj", 2), AdjointPODReducer)
        assert isinstance(make_reducer("BT", 2), BalancedTruncationReducer)
        assert isinstance(make_reducer("Ricc", 2), RiccatiReducer)
        with pytest.raises(ValueError):
            make_reducer("nope", 2)

    def test_all_methods_biorthogonal_up_to_order_six(self, heat, heat_forward):
        reducers = {
            "POD": PODReducer(1).fit(heat_forward),
            "PODadj": AdjointPODReducer(1).fit(heat, forward=heat_forward),
            "BT": BalancedTruncationReducer(1).fit(heat),
            "Ricc": RiccatiReducer(1).fit(heat),
        }
        for name in reducers:
            for order in range(1, 7):
                red = make_reducer(name, order)
                if name == "POD":
                    red.fit(heat_forward)
                elif name == "PODadj":
                    red.fit(heat, forward=heat_forward)
                else:
                    red.fit(heat)
                gram = red.W_.T @ red.V_
                assert np.max(np.abs(gram - np.eye(order))) < 1e-10, (name, order)


class TestSnapshotMatrix:
    def test_thinning_stride(self, heat_forward):
        y = snapshot_matrix(heat_forward, max_columns=500)
        assert y.shape[0] == 61
        assert y.shape[1] <= 500

    def test_no_thinning_needed(self):
        states = np.arange(20.0).reshape(10, 2)
        y = snapshot_matrix(states, max_columns=50)
        assert y.shape == (2, 10)
        assert np.array_equal(y.T, states)


class TestBasisExport:
    def test_csv_columns(self, tmp_path, heat):
        basis = riccati_basis(
            linalg.solve_are(heat.a, heat.b, heat.q_cost, heat.r_cost, 0.0), 3
        )
        path = tmp_path / "basis.csv"
        basis.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "v_1,v_2,v_3"
        assert len(lines) == 62
