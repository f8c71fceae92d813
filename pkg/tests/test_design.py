import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optdesign.criteria import d_criterion
from optdesign.design import Design, DesignError, DesignSpace, clamp_to_space, information_matrix
from optdesign.models import PROBLEMS, get_problem


def random_design(problem, rng, m=None):
    m = m or problem.n_supp
    space = problem.space
    points = rng.uniform(space.lower, space.upper, (m, space.n_factors))
    weights = rng.dirichlet(np.ones(m))
    return Design(points, weights)


class TestDesignSpace:
    def test_bounds_must_be_ordered(self):
        """Every factor needs lower < upper."""
        with pytest.raises(DesignError):
            DesignSpace([0.0, 1.0], [1.0, 1.0])

    def test_bound_lengths_must_match(self):
        """Lower and upper vectors of different length are rejected."""
        with pytest.raises(DesignError):
            DesignSpace([0.0], [1.0, 2.0])

    def test_n_factors_and_diameter(self):
        """n_factors is the bound length; the diameter is the corner-to-corner distance."""
        s = DesignSpace([0.0, 0.0], [3.0, 4.0])
        assert s.n_factors == 2
        assert s.diameter == pytest.approx(5.0)

    def test_bounds_are_immutable(self):
        """Stored bound arrays cannot be modified in place."""
        s = DesignSpace([0.0], [1.0])
        with pytest.raises(ValueError):
            s.lower[0] = -1.0

    def test_equality(self):
        """Spaces compare by value."""
        assert DesignSpace([0], [1]) == DesignSpace([0.0], [1.0])
        assert DesignSpace([0], [1]) != DesignSpace([0], [2])


class TestDesign:
    def test_point_weight_count_mismatch(self):
        """A design needs one weight per support point."""
        with pytest.raises(DesignError):
            Design([[0.0], [1.0]], [1.0])

    def test_one_dimensional_points_become_columns(self):
        """A flat point list is read as one factor."""
        d = Design([0.5, 1.0], [0.5, 0.5])
        assert d.points.shape == (2, 1)

    def test_support_and_normalized(self):
        """support() drops zero weights; normalized() rescales to unit mass."""
        d = Design([[0.0], [1.0], [2.0]], [2.0, 0.0, 2.0])
        assert d.support().n_points == 2
        np.testing.assert_allclose(d.normalized().weights, [0.5, 0.0, 0.5])

    def test_normalize_empty_mass_raises(self):
        """A design with zero total weight cannot be normalized."""
        with pytest.raises(DesignError):
            Design([[0.0]], [0.0]).normalized()

    def test_is_feasible(self):
        """Feasibility checks mass, sign and bounds."""
        space = DesignSpace([0.0], [5.0])
        assert Design([[0.7143], [5.0]], [0.5, 0.5]).is_feasible(space)
        assert not Design([[0.7143], [5.1]], [0.5, 0.5]).is_feasible(space)
        assert not Design([[0.7143], [5.0]], [0.6, 0.5]).is_feasible(space)
        assert not Design([[0.7143], [5.0]], [1.5, -0.5]).is_feasible(space)

    def test_dict_round_trip(self):
        """to_dict/from_dict reproduce points and weights exactly."""
        d = Design([[0.1, 0.2], [0.3, 0.4]], [0.25, 0.75])
        back = Design.from_dict(d.to_dict())
        np.testing.assert_array_equal(back.points, d.points)
        np.testing.assert_array_equal(back.weights, d.weights)
        assert d.to_dict()["schema_version"] == "1"

    def test_from_dict_missing_field(self):
        """A record without weights is a structural error."""
        with pytest.raises(DesignError):
            Design.from_dict({"points": [[0.0]]})


class TestClampToSpace:
    def test_inside_unchanged(self):
        """Points inside the box are returned unchanged."""
        s = DesignSpace([0.0, 0.0], [5.0, 5.0])
        np.testing.assert_array_equal(clamp_to_space([1.0, 2.0], s), [1.0, 2.0])

    def test_one_factor_projection(self):
        """-3 on [0, 3] projects to 0."""
        np.testing.assert_array_equal(clamp_to_space([-3.0], DesignSpace([0.0], [3.0])), [0.0])

    def test_componentwise_projection(self):
        """(7, -1) on [0,5]^2 projects to (5, 0)."""
        s = DesignSpace([0.0, 0.0], [5.0, 5.0])
        np.testing.assert_array_equal(clamp_to_space([7.0, -1.0], s), [5.0, 0.0])

    def test_wrong_length(self):
        """The point must have one coordinate per factor."""
        with pytest.raises(DesignError):
            clamp_to_space([1.0, 2.0], DesignSpace([0.0], [3.0]))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
    def test_result_always_inside(self, point):
        """Projection lands in the box and is idempotent."""
        s = DesignSpace([-1.0, 0.0, 2.0], [1.0, 3.0, 2.5])
        x = clamp_to_space(point, s)
        assert s.contains(x)
        np.testing.assert_array_equal(clamp_to_space(x, s), x)


class TestInformationMatrix:
    def test_michaelis_menten_single_point(self):
        """Problem 6, one point at x = 1: f = (1/2, -1/4), M = f f^T."""
        M = information_matrix(Design([[1.0]], [1.0]), get_problem(6))
        np.testing.assert_allclose(M, [[0.25, -0.125], [-0.125, 0.0625]], rtol=1e-14)

    def test_single_point_is_singular(self):
        """All mass on one point of a rank-one model gives det M = 0."""
        M = information_matrix(Design([[2.0]], [1.0]), get_problem(6))
        assert abs(np.linalg.det(M)) < 1e-15
        assert d_criterion(M) == 1e10

    def test_published_michaelis_menten_optimum(self):
        """The two-point design {0.7143, 5} with equal weights has D value 5.2528."""
        M = information_matrix(Design([[0.7143], [5.0]], [0.5, 0.5]), get_problem(6))
        assert d_criterion(M) == pytest.approx(5.2528, abs=1e-4)

    def test_zero_weight_points_skipped(self):
        """A zero-weight point contributes nothing, even if its factor is not finite."""
        p = get_problem(8)
        base = Design([[1.0, 1.0, 1.0], [2.0, 0.5, 1.5]], [0.5, 0.5])
        padded = Design([[1.0, 1.0, 1.0], [2.0, 0.5, 1.5], [0.0, 0.0, 0.0]], [0.5, 0.5, 0.0])
        np.testing.assert_array_equal(information_matrix(base, p), information_matrix(padded, p))

    def test_dimension_mismatch(self):
        """A design with the wrong number of factors is a structural error."""
        with pytest.raises(DesignError):
            information_matrix(Design([[0.0, 1.0]], [1.0]), get_problem(6))

    @pytest.mark.parametrize("pid", sorted(PROBLEMS))
    def test_permutation_invariance(self, pid, rng):
        """Reordering (point, weight) pairs leaves M unchanged."""
        p = get_problem(pid)
        d = random_design(p, rng)
        perm = rng.permutation(d.n_points)
        M1 = information_matrix(d, p)
        M2 = information_matrix(Design(d.points[perm], d.weights[perm]), p)
        np.testing.assert_allclose(M1, M2, rtol=1e-12, atol=1e-12 * np.abs(M1).max())

    @pytest.mark.parametrize("pid", sorted(PROBLEMS))
    def test_linearity_in_weights(self, pid, rng):
        """M of a weight mixture is the same mixture of the two matrices."""
        p = get_problem(pid)
        d1 = random_design(p, rng)
        w2 = rng.dirichlet(np.ones(d1.n_points))
        d2 = Design(d1.points, w2)
        a = rng.uniform()
        mix = Design(d1.points, a * d1.weights + (1 - a) * w2)
        lhs = information_matrix(mix, p)
        rhs = a * information_matrix(d1, p) + (1 - a) * information_matrix(d2, p)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())

    @pytest.mark.parametrize("pid", sorted(PROBLEMS))
    def test_symmetric_psd(self, pid, rng):
        """1000 random designs give symmetric matrices with eigenvalues >= -1e-10 ||M||."""
        p = get_problem(pid)
        for _ in range(1000):
            M = information_matrix(random_design(p, rng), p)
            np.testing.assert_array_equal(M, M.T)
            norm = np.linalg.norm(M, 2)
            assert np.linalg.eigvalsh(M).min() >= -1e-10 * norm
