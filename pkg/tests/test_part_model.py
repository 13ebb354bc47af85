import numpy as np
import pytest

from models.exceptions import BoundsError, ParameterError, PreconditionError
from models.hog import HOG_DIM, HogCellGrid
from models.part_model import (ALPHABET, CharacterMixtureSet, CharacterTreeModel, DeformationParams, Detection,
                               Edge, PartFilter, PartPlacement, appearance_response, appearance_responses,
                               default_topology, deformation_term, score_configuration)
from models.image_buffer import BoundingBox
from tests.oracles import naive_correlation


@pytest.fixture
def rng():
    return np.random.default_rng(17)


def random_model(rng, dim=4, sizes=((2, 2), (1, 2), (2, 1))):
    parts = [PartFilter(rng.normal(size=(h, w, dim)), anchor=(0, 0) if i == 0 else
                        (int(rng.integers(0, 2)), int(rng.integers(0, 2))))
             for i, (h, w) in enumerate(sizes)]
    params = DeformationParams(a=-0.5, b=-0.25, c=0.1, d=-0.1)
    edges = [Edge(0, i, params) for i in range(1, len(parts))]
    return CharacterTreeModel(parts, edges, root=0, bias=0.3, label="A")


class TestAlphabet:
    def test_thirty_three_classes(self):
        assert len(ALPHABET) == 33
        assert not set("QWX") & set(ALPHABET)


class TestCharacterTreeModel:
    def test_default_topology(self):
        model = default_topology("7")
        root = model.root_filter
        assert (root.w_cells, root.h_cells, root.dim) == (4, 8, HOG_DIM)
        assert [part.anchor for part in model.parts[1:]] == [(0, 0), (0, 4)]
        assert all(edge.params == DeformationParams(-0.1, -0.1, 0.0, 0.0) for edge in model.edges)
        assert model.postorder()[-1] == model.root

    def test_edges_must_form_a_tree(self, rng):
        parts = [PartFilter(np.zeros((1, 1, 2))) for _ in range(3)]
        params = DeformationParams(-1.0, -1.0)
        with pytest.raises(PreconditionError):
            CharacterTreeModel(parts, [Edge(0, 1, params), Edge(0, 1, params)])
        with pytest.raises(PreconditionError):
            CharacterTreeModel(parts, [Edge(0, 1, params)])

    def test_concavity_check(self):
        model = default_topology("A")
        flat = CharacterTreeModel(model.parts, [Edge(e.parent, e.child, DeformationParams(0.0, -1.0))
                                                for e in model.edges])
        with pytest.raises(ParameterError):
            flat.check_concave()

    def test_projection_restores_concavity(self):
        projected = DeformationParams(0.5, -2.0, 1.0, 1.0).projected()
        assert projected.is_concave()
        assert (projected.a, projected.b) == (-1e-3, -2.0)

    def test_mixture_set_needs_every_class(self):
        with pytest.raises(PreconditionError):
            CharacterMixtureSet("AB", {"A": [default_topology("A")]})


class TestAppearance:
    def test_matches_naive_correlation(self, rng):
        grid = HogCellGrid(rng.normal(size=(6, 7, 4)), 4)
        part = PartFilter(rng.normal(size=(3, 2, 4)))
        np.testing.assert_allclose(appearance_response(part, grid),
                                   naive_correlation(part.weights, grid.features), atol=1e-12)

    def test_bank_matches_single_filters(self, rng):
        grid = HogCellGrid(rng.normal(size=(5, 8, 3)), 4)
        bank = [rng.normal(size=(2, 3, 3)) for _ in range(4)]
        responses = appearance_responses(bank, grid)
        assert responses.shape == (4, 4, 6)
        for weights, response in zip(bank, responses):
            np.testing.assert_allclose(response, naive_correlation(weights, grid.features), atol=1e-12)

    def test_linear_in_the_weights(self, rng):
        grid = HogCellGrid(rng.normal(size=(6, 7, 4)), 4)
        first, second = rng.normal(size=(3, 2, 4)), rng.normal(size=(3, 2, 4))
        combined = appearance_response(PartFilter(2.5 * first - 0.5 * second), grid)
        expected = 2.5 * appearance_response(PartFilter(first), grid) \
            - 0.5 * appearance_response(PartFilter(second), grid)
        np.testing.assert_allclose(combined, expected, atol=1e-9)

    def test_filter_larger_than_grid(self, rng):
        grid = HogCellGrid(rng.normal(size=(2, 2, 3)), 4)
        with pytest.raises(PreconditionError):
            appearance_response(PartFilter(rng.normal(size=(3, 1, 3))), grid)


class TestDeformationTerm:
    def test_quadratic_and_linear_terms(self):
        params = DeformationParams(a=-0.1, b=-0.2, c=0.5, d=-1.0)
        assert deformation_term(params, 0, 0) == 0.0
        assert deformation_term(params, 2, 1) == pytest.approx(-0.4 - 0.2 + 1.0 - 1.0)

    def test_broadcasts_over_arrays(self):
        params = DeformationParams(a=-0.1, b=-0.1)
        dx = np.arange(-2, 3)
        np.testing.assert_allclose(deformation_term(params, dx, 0), -0.1 * dx * dx)


class TestScoreConfiguration:
    def test_sum_of_terms(self, rng):
        model = random_model(rng)
        grid = HogCellGrid(rng.normal(size=(5, 5, 4)), 4)
        placement = PartPlacement(0, ((1, 1), (2, 3), (0, 2)))
        expected = model.bias
        for part, (x, y) in zip(model.parts, placement.positions):
            expected += naive_correlation(part.weights, grid.features)[y, x]
        for edge in model.edges:
            (px, py), (cx, cy) = placement.positions[edge.parent], placement.positions[edge.child]
            ax, ay = model.parts[edge.child].anchor
            dx, dy = cx - px - ax, cy - py - ay
            p = edge.params
            expected += p.a * dx * dx + p.b * dy * dy + p.c * dx + p.d * dy
        assert score_configuration(model, grid, placement) == pytest.approx(expected, abs=1e-9)

    def test_placement_outside_grid(self, rng):
        model = random_model(rng)
        grid = HogCellGrid(rng.normal(size=(5, 5, 4)), 4)
        with pytest.raises(BoundsError):
            score_configuration(model, grid, PartPlacement(0, ((4, 4), (0, 0), (0, 0))))


class TestDetection:
    def test_digit_flag_and_json(self):
        detection = Detection(BoundingBox(1, 2, 3, 4), "7", 0.25)
        assert detection.is_digit
        assert Detection.from_json(detection.to_json()) == detection
        assert not Detection(BoundingBox(1, 2, 3, 4), "D", 0.25).is_digit
