import numpy as np
import pytest

from helpers import orthonormality_error, parabola, projector_distance, random_orthonormal_rows
from mvlle.data import MultiViewDataset, synth_multiview
from mvlle.graphs import (
    ConsensusVariant,
    KernelSpec,
    consensus_matrix,
    embedding_cost,
    kernel_matrix,
    knn,
    lle_weights,
    quadratic_form,
)
from mvlle.solver import (
    FitConfig,
    ViewState,
    fit,
    init_view,
    objective,
    prepare_view,
    refresh_consensus,
    standardize,
    subproblem_matrix,
    symmetric_eig_smallest,
    update_view,
)


def _cost(X, k):
    return embedding_cost(lle_weights(X, knn(X, k)))


class TestEigSmallest:
    def test_diagonal(self):
        vals, U = symmetric_eig_smallest(np.diag([3.0, 1.0, 2.0]), 2, skip_trivial=False)
        np.testing.assert_array_equal(vals, [1.0, 2.0])
        np.testing.assert_array_equal(U, [[0, 1, 0], [0, 0, 1]])

    def test_complete_graph_skips_constant(self):
        L = consensus_matrix("unnormalized_le", np.ones((4, 4)))
        vals, U = symmetric_eig_smallest(L, 1, skip_trivial=True)
        assert vals[0] == pytest.approx(4.0, abs=1e-12)
        assert abs(U[0].sum()) < 1e-12

    def test_matches_dense_oracle(self, rng):
        B = rng.standard_normal((15, 15))
        M = B + B.T
        vals, U = symmetric_eig_smallest(M, 4)
        oracle_vals, oracle_vecs = np.linalg.eigh(M)
        np.testing.assert_allclose(vals, oracle_vals[:4], atol=1e-10)
        for lam, u in zip(vals, U):
            assert np.linalg.norm(M @ u - lam * u) <= 1e-8
        assert projector_distance(U, oracle_vecs[:, :4].T) <= 1e-8

    def test_sign_convention(self, rng):
        B = rng.standard_normal((10, 10))
        _, U = symmetric_eig_smallest(B + B.T, 5)
        for u in U:
            assert u[np.argmax(np.abs(u))] > 0

    def test_degenerate_null_space_rotated(self):
        # two disconnected triangles: the null space holds both block indicators
        A = np.zeros((6, 6))
        A[:3, :3] = 1.0
        A[3:, 3:] = 1.0
        L = consensus_matrix("unnormalized_le", A)
        vals, U = symmetric_eig_smallest(L, 1, skip_trivial=True)
        assert vals[0] == pytest.approx(0.0, abs=1e-12)
        assert abs(U[0].sum()) < 1e-10
        # the remaining null vector is the signed block indicator
        assert np.allclose(np.abs(U[0]), 1 / np.sqrt(6))
        assert np.sign(U[0][:3]).tolist() == [np.sign(U[0][0])] * 3

    def test_errors(self):
        with pytest.raises(ValueError, match="symmetric"):
            symmetric_eig_smallest(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)
        with pytest.raises(ValueError, match="d must"):
            symmetric_eig_smallest(np.eye(3), 4)
        L = consensus_matrix("unnormalized_le", np.ones((3, 3)))
        with pytest.raises(ValueError, match="no room"):
            symmetric_eig_smallest(L, 3, skip_trivial=True)


class TestInitView:
    def test_orthonormal_and_nontrivial(self, rng):
        X = rng.standard_normal((30, 3))
        U = init_view(_cost(X, 6), 3, skip_trivial=True)
        assert orthonormality_error(U) <= 1e-10
        ones = np.ones(30) / np.sqrt(30)
        assert np.all(np.abs(U @ ones) <= 0.99)

    def test_parabola_eigenvalue_sum(self):
        C = _cost(parabola(20), 4)
        U = init_view(C, 2, skip_trivial=True)
        ev = np.linalg.eigvalsh(C)
        # ev[0] is the constant direction
        assert quadratic_form(U, C) == pytest.approx(ev[1] + ev[2], abs=1e-8)


class TestSubproblem:
    def test_zero_weight(self, rng):
        C = _cost(rng.standard_normal((8, 2)), 3)
        M = subproblem_matrix(C, [np.eye(8)], 0.0)
        assert np.array_equal(M, C)

    def test_identity_shift(self, rng):
        C = _cost(rng.standard_normal((8, 2)), 3)
        np.testing.assert_allclose(subproblem_matrix(C, [np.eye(8)], 0.3), C + 0.3 * np.eye(8), atol=1e-15)

    def test_manual_accumulation(self, rng):
        C = _cost(rng.standard_normal((6, 2)), 3)
        Ls = []
        for _ in range(2):
            B = rng.standard_normal((6, 6))
            Ls.append(B + B.T)
        expected = np.empty((6, 6))
        for i in range(6):
            for j in range(6):
                expected[i, j] = C[i, j] + 0.7 * (Ls[0][i, j] + Ls[1][i, j])
        np.testing.assert_allclose(subproblem_matrix(C, Ls, 0.7), expected, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            subproblem_matrix(np.eye(3), [np.eye(4)], 1.0)


def _two_view_states(seed, n=12, d=3, k=4):
    r = np.random.default_rng(seed)
    config = FitConfig(k=k, dims=d, lambda_c=0.5, variant=ConsensusVariant("normalized_le", "input"))
    states = []
    for dim in (3, 5):
        s = prepare_view(r.standard_normal((n, dim)), k, d)
        s.U = init_view(s.C, d)
        refresh_consensus(s, config)
        states.append(s)
    return states, config


class TestUpdateView:
    def test_zero_weight_equals_init(self):
        states, config = _two_view_states(0)
        cfg = FitConfig(k=4, dims=3, lambda_c=0.0, variant=config.variant)
        U = update_view(states[0], [states[1]], cfg)
        assert np.array_equal(U, init_view(states[0].C, 3))

    def test_beats_random_orthonormal(self):
        states, config = _two_view_states(1)
        U = update_view(states[0], [states[1]], config)
        assert orthonormality_error(U) <= 1e-10
        M = subproblem_matrix(states[0].C, [states[1].L], config.lambda_c)
        best = quadratic_form(U, M)
        r = np.random.default_rng(99)
        values = [quadratic_form(random_orthonormal_rows(r, 3, 12), M) for _ in range(1000)]
        assert best <= min(values) + 1e-9


class TestObjective:
    def test_single_view(self, rng):
        s = prepare_view(rng.standard_normal((10, 2)), 3, 2)
        s.U = init_view(s.C, 2)
        s.L = np.eye(10)
        assert objective([s], 5.0) == quadratic_form(s.U, s.C)

    def test_zero_weight(self):
        states, _ = _two_view_states(2)
        assert objective(states, 0.0) == pytest.approx(sum(quadratic_form(s.U, s.C) for s in states))

    def test_scalar_expansion(self):
        S1 = np.array([[0, 0.5, 0.5, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0.3, 0.7, 0]])
        S2 = np.array([[0, 0, 0, 1], [0.2, 0, 0.8, 0], [0, 1, 0, 0], [0.5, 0.5, 0, 0]])
        K1 = np.array([[1, 0.2, 0.1, 0.4], [0.2, 1, 0.3, 0.0], [0.1, 0.3, 1, 0.6], [0.4, 0.0, 0.6, 1]])
        K2 = np.array([[1, 0.5, 0.5, 0.5], [0.5, 1, 0.1, 0.2], [0.5, 0.1, 1, 0.9], [0.5, 0.2, 0.9, 1]])
        u1 = np.array([[0.5, -0.5, 0.5, -0.5]])
        u2 = np.array([[0.1, 0.7, -0.7, 0.1]])
        states = []
        for S, K, u in ((S1, K1, u1), (S2, K2, u2)):
            states.append(ViewState(X=np.zeros((4, 1)), S=S, C=embedding_cost(S), dim=1, U=u, K=K,
                                    L=consensus_matrix("normalized_le", K)))
        lam = 0.7

        def cost(S, u):
            total = 0.0
            for i in range(4):
                r = u[0, i] - sum(S[i, j] * u[0, j] for j in range(4))
                total += r * r
            return total

        def reg(K, u):
            deg = [sum(K[i, j] for j in range(4)) for i in range(4)]
            total = 0.0
            for i in range(4):
                for j in range(4):
                    lij = (1.0 if i == j else 0.0) - K[i, j] / np.sqrt(deg[i] * deg[j])
                    total += u[0, i] * lij * u[0, j]
            return total

        expected = cost(S1, u1) + cost(S2, u2) + lam * (reg(K2, u1) + reg(K1, u2))
        assert objective(states, lam) == pytest.approx(expected, abs=1e-12)


class TestRefresh:
    def test_input_source_constant(self):
        ds = synth_multiview(40, 2, 2, 2, [3, 4], 0.2, seed=1)
        config = FitConfig(k=5, dims=2, variant=ConsensusVariant("normalized_le", "input"))
        s = prepare_view(ds.views[0], 5, 2)
        s.U = init_view(s.C, 2)
        first = refresh_consensus(s, config).copy()
        s.U = s.U[::-1].copy()
        for _ in range(2):
            again = refresh_consensus(s, config)
        assert first.tobytes() == again.tobytes()

    def test_gaussian_kernel_unit_diagonal(self, rng):
        s = prepare_view(rng.standard_normal((20, 3)), 5, 3)
        s.U = init_view(s.C, 3)
        refresh_consensus(s, FitConfig(k=5, dims=3))
        assert np.all(np.diag(s.K) == 1.0)

    def test_recomposition(self, rng):
        spec = KernelSpec("gaussian", bandwidth="median")
        config = FitConfig(k=5, dims=3, kernel=spec, variant=ConsensusVariant("normalized_le", "embedding"))
        s = prepare_view(rng.standard_normal((25, 4)), 5, 3)
        s.U = init_view(s.C, 3)
        L = refresh_consensus(s, config)
        np.testing.assert_array_equal(L, consensus_matrix("normalized_le", kernel_matrix(s.U, spec)))

    @pytest.mark.parametrize("kind", ["unnormalized_le", "hsic_centered", "reconstruction"])
    @pytest.mark.parametrize("source", ["input", "embedding"])
    def test_all_variants_symmetric(self, rng, kind, source):
        config = FitConfig(k=5, dims=2, variant=ConsensusVariant(kind, source))
        s = prepare_view(rng.standard_normal((20, 3)), 5, 2)
        s.U = init_view(s.C, 2)
        L = refresh_consensus(s, config)
        assert np.array_equal(L, L.T)

    def test_needs_embedding(self, rng):
        s = prepare_view(rng.standard_normal((10, 2)), 3, 2)
        with pytest.raises(ValueError, match="embedding"):
            refresh_consensus(s, FitConfig(k=3, dims=2))


class TestFit:
    def test_single_view_converges_immediately(self):
        ds = synth_multiview(40, 1, 2, 2, [4], 0.2, seed=3)
        config = FitConfig(k=6, dims=2)
        res = fit(ds, config)
        assert res.converged and res.sweeps == 1
        assert len(res.objective_trace) == 2
        s = prepare_view(standardize(ds.views[0]), 6, 2)
        assert np.array_equal(res.embeddings[0], init_view(s.C, 2))

    def test_decoupled_when_lambda_zero(self):
        ds = synth_multiview(60, 3, 3, 2, [4, 5, 6], 0.3, seed=8)
        config = FitConfig(k=6, dims=3, lambda_c=0.0)
        res = fit(ds, config)
        for X, U in zip(ds.views, res.embeddings):
            U0 = init_view(prepare_view(standardize(X), 6, 3).C, 3)
            assert projector_distance(U, U0) <= 1e-8

    def test_monotone_with_input_graphs(self):
        ds = synth_multiview(120, 3, 4, 2, [6, 9, 12], 0.3, seed=11)
        config = FitConfig(k=8, dims=(5, 5, 5), lambda_c=0.5, variant=ConsensusVariant("normalized_le", "input"))
        res = fit(ds, config)
        assert res.converged and res.sweeps <= 50
        assert np.all(np.diff(res.objective_trace) <= 1e-9)
        assert len(res.objective_trace) == res.sweeps + 1 == len(res.wallclock_per_sweep) + 1

    def test_frozen_subproblem_never_worsens(self):
        ds = synth_multiview(60, 2, 3, 2, [4, 6], 0.4, seed=2)
        res = fit(ds, FitConfig(k=6, dims=3, max_sweeps=10))
        for sweep in res.subproblem_values:
            for before, after in sweep:
                assert after <= before + 1e-9
        for U in res.embeddings:
            assert orthonormality_error(U) <= 1e-8

    def test_deterministic(self):
        ds = synth_multiview(50, 2, 3, 2, [4, 6], 0.4, seed=6)
        a = fit(ds, FitConfig(k=6, dims=2, max_sweeps=5))
        b = fit(ds, FitConfig(k=6, dims=2, max_sweeps=5))
        assert a.objective_trace == b.objective_trace
        for x, y in zip(a.embeddings, b.embeddings):
            assert x.tobytes() == y.tobytes()

    def test_scale_coherence(self):
        states, config = _two_view_states(4)
        M1 = subproblem_matrix(states[0].C, [states[1].L], 0.5)
        M2 = subproblem_matrix(states[0].C, [states[1].L / 4.0], 2.0)
        np.testing.assert_allclose(M1, M2, atol=1e-14)
        U1 = symmetric_eig_smallest(M1, 3, True)[1]
        U2 = symmetric_eig_smallest(M2, 3, True)[1]
        assert projector_distance(U1, U2) <= 1e-8

    def test_objective_lower_bound(self):
        ds = synth_multiview(50, 2, 3, 2, [4, 6], 0.4, seed=5)
        res = fit(ds, FitConfig(k=6, dims=2, variant=ConsensusVariant("unnormalized_le", "embedding"), max_sweeps=5))
        assert min(res.objective_trace) >= -1e-9

    def test_config_validation(self):
        ds = MultiViewDataset([np.random.default_rng(0).standard_normal((6, 2))])
        with pytest.raises(ValueError, match="embedding dim"):
            fit(ds, FitConfig(k=2, dims=5))
        with pytest.raises(ValueError, match="dims"):
            fit(ds, FitConfig(k=2, dims=(2, 2)))
        with pytest.raises(ValueError):
            FitConfig(tol=0)
        with pytest.raises(ValueError):
            FitConfig(max_sweeps=0)
        with pytest.raises(ValueError):
            FitConfig(lambda_r=-1)
        with pytest.raises(ValueError):
            FitConfig(preprocess="minmax")

    def test_lambda_r_has_no_effect(self):
        ds = synth_multiview(40, 2, 2, 2, [3, 4], 0.3, seed=0)
        a = fit(ds, FitConfig(k=5, dims=2, max_sweeps=3))
        b = fit(ds, FitConfig(k=5, dims=2, max_sweeps=3, lambda_r=10.0))
        assert a.objective_trace == b.objective_trace

    def test_different_dims_per_view(self):
        ds = synth_multiview(40, 2, 2, 2, [3, 4], 0.3, seed=0)
        res = fit(ds, FitConfig(k=5, dims=(2, 4), max_sweeps=3))
        assert [U.shape for U in res.embeddings] == [(2, 40), (4, 40)]
