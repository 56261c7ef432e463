import numpy as np
import pytest

from mcd import Dataset, DesignSchema, FeatureSpec


@pytest.fixture
def mixed_schema() -> DesignSchema:
    """Four features: continuous x2 (one frozen), categorical x2."""
    return DesignSchema(features=(
        FeatureSpec(name="width", kind="continuous", lower=0.0, upper=10.0),
        FeatureSpec(name="height", kind="continuous", lower=-5.0, upper=5.0, actionable=False),
        FeatureSpec(name="material", kind="categorical", categories=("steel", "aluminum", "titanium")),
        FeatureSpec(name="finish", kind="categorical", categories=("matte", "gloss")),
    ))


@pytest.fixture
def mixed_dataset(mixed_schema) -> Dataset:
    rng = np.random.default_rng(7)
    rows = []
    for _ in range(40):
        rows.append((
            float(rng.uniform(0, 10)),
            float(rng.uniform(-5, 5)),
            ("steel", "aluminum", "titanium")[rng.integers(0, 3)],
            ("matte", "gloss")[rng.integers(0, 2)],
        ))
    return Dataset(schema=mixed_schema, rows=tuple(rows))


@pytest.fixture
def unit_square_dataset() -> Dataset:
    schema = DesignSchema(features=(
        FeatureSpec(name="x1", kind="continuous", lower=0.0, upper=1.0),
        FeatureSpec(name="x2", kind="continuous", lower=0.0, upper=1.0),
    ))
    rows = tuple(
        (float(a), float(b))
        for a, b in np.random.default_rng(3).random((60, 2))
    )
    return Dataset(schema=schema, rows=rows)
