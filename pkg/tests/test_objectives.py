import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcd import (
    Dataset,
    DesignSchema,
    DesignSpaceError,
    FeatureSpec,
    avg_gower_to_knn,
    changed_feature_ratio,
    evaluate_objectives,
    gower_distance,
)
from mcd.objectives import AuxiliaryObjectiveSpec, CHANGE_TOLERANCE, gower_matrix


@pytest.fixture
def hand_schema():
    """d=3: two continuous features (ranges 10 and 2) and one categorical."""
    return DesignSchema(features=(
        FeatureSpec(name="a", kind="continuous", lower=0.0, upper=20.0),
        FeatureSpec(name="b", kind="continuous", lower=0.0, upper=4.0),
        FeatureSpec(name="metal", kind="categorical", categories=("steel", "aluminum")),
    ))


@pytest.fixture
def hand_ranges():
    return np.array([10.0, 2.0, np.nan])


class TestGowerDistance:
    def test_identity(self, hand_schema, hand_ranges):
        q = (5.0, 1.0, "steel")
        assert gower_distance(q, q, hand_ranges, hand_schema) == 0.0

    def test_hand_computed_mixed_example(self, hand_schema, hand_ranges):
        p = (5.0, 1.0, "steel")
        q = (3.0, 1.0, "aluminum")
        # (1/3) * (|5-3|/10 + |1-1|/2 + 1)
        assert gower_distance(p, q, hand_ranges, hand_schema) == pytest.approx(0.4, abs=1e-15)

    def test_all_categorical_differ_is_one(self):
        schema = DesignSchema(features=(
            FeatureSpec(name="u", kind="categorical", categories=("a", "b")),
            FeatureSpec(name="v", kind="categorical", categories=("c", "d")),
        ))
        assert gower_distance(("a", "c"), ("b", "d"), np.array([np.nan, np.nan]), schema) == 1.0

    def test_zero_range_counts_equality(self):
        schema = DesignSchema(features=(FeatureSpec(name="x", kind="continuous", lower=0.0, upper=1.0),))
        ranges = np.array([0.0])
        assert gower_distance((0.5,), (0.5,), ranges, schema) == 0.0
        assert gower_distance((0.5,), (0.6,), ranges, schema) == 1.0

    def test_schema_mismatch_errors(self, hand_schema, hand_ranges):
        with pytest.raises(DesignSpaceError):
            gower_distance((5.0, 1.0), (3.0, 1.0, "steel"), hand_ranges, hand_schema)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_metric_axioms_on_random_triples(self, seed):
        rng = np.random.default_rng(seed)
        schema = DesignSchema(features=(
            FeatureSpec(name="a", kind="continuous", lower=0.0, upper=1.0),
            FeatureSpec(name="b", kind="continuous", lower=0.0, upper=3.0),
            FeatureSpec(name="c", kind="categorical", categories=("u", "v", "w")),
        ))
        ranges = np.array([1.0, 3.0, np.nan])

        def draw():
            return (float(rng.uniform(0, 1)), float(rng.uniform(0, 3)), ("u", "v", "w")[rng.integers(0, 3)])

        x, y, z = draw(), draw(), draw()
        dxy = gower_distance(x, y, ranges, schema)
        dyx = gower_distance(y, x, ranges, schema)
        dxz = gower_distance(x, z, ranges, schema)
        dzy = gower_distance(z, y, ranges, schema)
        assert dxy >= 0.0
        assert dxy == dyx
        assert dxy <= dxz + dzy + 1e-12


class TestChangedFeatureRatio:
    def test_identical_is_zero(self, hand_schema, hand_ranges):
        q = (5.0, 1.0, "steel")
        assert changed_feature_ratio(q, q, hand_ranges, hand_schema) == 0.0

    def test_one_of_four_changed(self, mixed_schema, mixed_dataset):
        q = (5.0, 1.0, "steel", "matte")
        p = (5.0, 1.0, "steel", "gloss")
        assert changed_feature_ratio(p, q, mixed_dataset) == 0.25

    def test_all_changed(self, hand_schema, hand_ranges):
        p = (9.0, 3.0, "steel")
        q = (1.0, 0.5, "aluminum")
        assert changed_feature_ratio(p, q, hand_ranges, hand_schema) == 1.0

    def test_sub_tolerance_drift_does_not_count(self, hand_schema, hand_ranges):
        q = (5.0, 1.0, "steel")
        p = (5.0 + 1e-13, 1.0, "steel")
        assert changed_feature_ratio(p, q, hand_ranges, hand_schema) == 0.0

    def test_zero_ratio_implies_small_gower(self, hand_schema, hand_ranges):
        q = (5.0, 1.0, "steel")
        p = (5.0 + 5e-10 * 10.0, 1.0, "steel")  # below tolerance on range 10
        assert changed_feature_ratio(p, q, hand_ranges, hand_schema) == 0.0
        assert gower_distance(p, q, hand_ranges, hand_schema) <= CHANGE_TOLERANCE


class TestAvgGowerToKnn:
    @pytest.fixture
    def line_dataset(self):
        schema = DesignSchema(features=(FeatureSpec(name="x", kind="continuous", lower=0.0, upper=1.0),))
        return Dataset(schema=schema, rows=((0.0,), (0.5,), (1.0,)))

    def test_member_with_k1_is_zero(self, line_dataset):
        assert avg_gower_to_knn((0.5,), line_dataset, 1) == 0.0

    def test_two_nearest_hand_computed(self, line_dataset):
        # distances from 0.1: {0.1, 0.4, 0.9}; mean of two smallest = 0.25
        assert avg_gower_to_knn((0.1,), line_dataset, 2) == pytest.approx(0.25, abs=1e-15)

    def test_k_equals_row_count_is_full_mean(self, line_dataset):
        expected = np.mean([0.1, 0.4, 0.9])
        assert avg_gower_to_knn((0.1,), line_dataset, 3) == pytest.approx(expected, abs=1e-15)

    def test_k_too_large_errors(self, line_dataset):
        with pytest.raises(DesignSpaceError):
            avg_gower_to_knn((0.1,), line_dataset, 4)

    def test_bounded_by_min_and_full_mean(self, mixed_dataset):
        rng = np.random.default_rng(0)
        schema = mixed_dataset.schema
        for _ in range(20):
            p = (
                float(rng.uniform(0, 10)), float(rng.uniform(-5, 5)),
                ("steel", "aluminum", "titanium")[rng.integers(0, 3)],
                ("matte", "gloss")[rng.integers(0, 2)],
            )
            distances = [gower_distance(p, row, mixed_dataset) for row in mixed_dataset.rows]
            for k in (1, 3, 10, len(mixed_dataset)):
                value = avg_gower_to_knn(p, mixed_dataset, k)
                assert min(distances) - 1e-12 <= value <= np.mean(distances) + 1e-12


class TestAffineRescalingInvariance:
    def test_objectives_invariant_under_feature_rescaling(self, mixed_dataset):
        schema = mixed_dataset.schema
        scale, shift = 3.7, -12.0

        scaled_schema = DesignSchema(features=(
            FeatureSpec(name="width", kind="continuous", lower=0.0 * scale + shift, upper=10.0 * scale + shift),
            schema.features[1],
            schema.features[2],
            schema.features[3],
        ))

        def rescale(point):
            return (point[0] * scale + shift, point[1], point[2], point[3])

        scaled_dataset = Dataset(schema=scaled_schema, rows=tuple(rescale(r) for r in mixed_dataset.rows))
        rng = np.random.default_rng(1)
        for _ in range(10):
            p = mixed_dataset.rows[rng.integers(0, len(mixed_dataset))]
            q = mixed_dataset.rows[rng.integers(0, len(mixed_dataset))]
            ps, qs = rescale(p), rescale(q)
            assert gower_distance(p, q, mixed_dataset) == pytest.approx(
                gower_distance(ps, qs, scaled_dataset), abs=1e-9)
            assert changed_feature_ratio(p, q, mixed_dataset) == pytest.approx(
                changed_feature_ratio(ps, qs, scaled_dataset), abs=1e-9)
            for k in (1, 5):
                assert avg_gower_to_knn(p, mixed_dataset, k) == pytest.approx(
                    avg_gower_to_knn(ps, scaled_dataset, k), abs=1e-9)


class TestEvaluateObjectives:
    def test_query_in_dataset_all_zero(self, mixed_dataset):
        q = mixed_dataset.rows[0]
        values = evaluate_objectives(q, q, mixed_dataset, (), {}, knn_k=1)
        assert values.proximity == 0.0
        assert values.sparsity == 0.0
        assert values.manifold_proximity == 0.0

    def test_maximize_direction_negated(self, mixed_dataset):
        q = mixed_dataset.rows[0]
        spec = AuxiliaryObjectiveSpec(name="score", direction="maximize", channel="S")
        values = evaluate_objectives(q, q, mixed_dataset, (spec,), {"S": 1.24}, knn_k=1)
        assert values.auxiliary == (-1.24,)

    def test_unresolved_channel_names_objective(self, mixed_dataset):
        q = mixed_dataset.rows[0]
        spec = AuxiliaryObjectiveSpec(name="score", direction="minimize", channel="missing")
        with pytest.raises(DesignSpaceError, match="score"):
            evaluate_objectives(q, q, mixed_dataset, (spec,), {}, knn_k=1)

    def test_expression_objective(self, mixed_dataset):
        q = mixed_dataset.rows[0]
        spec = AuxiliaryObjectiveSpec(name="combo", direction="minimize", expression="A + 2*B")
        values = evaluate_objectives(q, q, mixed_dataset, (spec,), {"A": 1.0, "B": 0.25}, knn_k=1)
        assert values.auxiliary == (1.5,)


class TestBatchAgreements:
    def test_gower_matrix_matches_scalar(self, mixed_dataset):
        schema = mixed_dataset.schema
        rows = mixed_dataset.rows[:8]
        matrix = gower_matrix(schema.encode_many(rows), schema.encode_many(rows), schema, mixed_dataset.ranges)
        for i, p in enumerate(rows):
            for j, q in enumerate(rows):
                assert matrix[i, j] == gower_distance(p, q, mixed_dataset)
