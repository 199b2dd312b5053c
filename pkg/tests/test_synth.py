"""Tests for the synthetic data generator."""

from pathlib import Path

import numpy as np
import pytest

from src.core.config import load_run_config
from src.core.errors import ConfigError, SynthesisError
from src.core.models import LoadingPattern, SynthSpec
from src.services.diagnostics import ect, enc
from src.services.ingest import read_matrix
from src.services.principal_angles import principal_angles
from src.services.synth import (
    PRESETS,
    generate,
    preset,
    read_truth,
    truth_angle_table,
    write_synthetic,
)


class TestPresets:
    """Test preset lookup."""

    def test_known_presets(self):
        """Test the two presets and the seed override."""
        assert preset("paper-fig3").trait_dims == [200, 400, 10000]
        assert preset("desk", seed=9).trait_dims == [200, 400, 2000]
        assert preset("desk", seed=9).seed == 9
        assert PRESETS["desk"].seed == 0

    def test_unknown_preset(self):
        """Test that an unknown name is a configuration error."""
        with pytest.raises(ConfigError):
            preset("nope")


class TestGenerate:
    """Test generate on the default collection layout."""

    @pytest.fixture
    def spec(self):
        return SynthSpec(n=96, trait_dims=[40, 60, 200], seed=3)

    def test_pairwise_angles(self, spec):
        """Test 60° between pair structures and 90° between nested ones."""
        _, truth = generate(spec)
        s = truth.scores
        for a, b in (("1,2", "1,3"), ("1,2", "2,3"), ("1,3", "2,3")):
            assert principal_angles(s[a], s[b])[0] == pytest.approx(60.0, abs=1e-6)
        for pair in ("1,2", "1,3", "2,3"):
            assert principal_angles(s["1,2,3"], s[pair])[0] == pytest.approx(90.0, abs=1e-6)

    def test_noise_free_rank(self, spec):
        """Test that every noiseless block has rank 3."""
        blocks, truth = generate(spec.model_copy(update={"noise_scale": 0.0}))
        for k, block in enumerate(blocks):
            assert np.linalg.matrix_rank(block.values) == 3
            np.testing.assert_allclose(block.values, truth.signal(k))

    def test_reproducible(self, spec):
        """Test bit-identical regeneration from the same seed."""
        first, _ = generate(spec)
        second, _ = generate(spec)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.values, b.values)
        other, _ = generate(spec.model_copy(update={"seed": 4}))
        assert not np.array_equal(first[0].values, other[0].values)

    def test_block_names_and_shapes(self, spec):
        """Test block naming and the d x n layout."""
        blocks, truth = generate(spec)
        assert [b.block_name for b in blocks] == ["block1", "block2", "block3"]
        assert [b.values.shape for b in blocks] == [(40, 96), (60, 96), (200, 96)]
        assert len(truth.noise) == 3

    def test_flat_scores(self, spec):
        """Test that the sign-pattern scores spread evenly over all objects."""
        _, truth = generate(spec)
        for basis in truth.scores.values():
            assert enc(basis[:, 0]) == pytest.approx(96.0)

    def test_loading_norm(self, spec):
        """Test that every loadings column has norm strength·√(d ∨ n)."""
        _, truth = generate(spec)
        for component in truth.components:
            d = component.loadings.shape[0]
            expected = spec.signal_strength * np.sqrt(max(d, spec.n))
            np.testing.assert_allclose(np.linalg.norm(component.loadings, axis=0), expected)

    def test_pinstripe_ect(self):
        """Test that the leading pinstripe column covers half the traits."""
        _, truth = generate(SynthSpec(n=96, trait_dims=[2000, 2000, 2000], seed=1))
        full = [c for c in truth.components if c.collection.label == "1,2,3"]
        for component in full:
            assert ect(component.loadings[:, 0]) == pytest.approx(0.5)

    def test_random_loadings(self, spec):
        """Test the random loading layout."""
        _, truth = generate(spec.model_copy(update={"loading_pattern": LoadingPattern.RANDOM}))
        for component in truth.components:
            assert ect(component.loadings[:, 0]) > 0.15


class TestGramMixing:
    """Test the general construction used outside the sign-pattern case."""

    def test_other_angle(self):
        """Test 45° pairwise structures on n not divisible by 8."""
        spec = SynthSpec(n=50, trait_dims=[20, 20, 20], pairwise_trait_angle=45.0, seed=2)
        _, truth = generate(spec)
        assert principal_angles(truth.scores["1,2"], truth.scores["2,3"])[0] == pytest.approx(45.0, abs=1e-6)
        assert principal_angles(truth.scores["1,2,3"], truth.scores["1,3"])[0] == pytest.approx(90.0, abs=1e-6)

    def test_higher_ranks(self):
        """Test a layout with rank-2 collections and an individual one."""
        spec = SynthSpec(n=60, trait_dims=[30, 30], collection_ranks={"1,2": 2, "1": 1, "2": 1}, seed=5)
        blocks, truth = generate(spec)
        assert truth.scores["1,2"].shape == (60, 2)
        assert principal_angles(truth.scores["1"], truth.scores["2"])[0] == pytest.approx(60.0, abs=1e-6)
        assert len(blocks) == 2


class TestInfeasible:
    """Test rejected layouts."""

    def test_too_few_traits(self):
        """Test a block that cannot hold its rank."""
        with pytest.raises(SynthesisError):
            generate(SynthSpec(n=16, trait_dims=[2, 40, 40]))

    def test_unrealizable_angle(self):
        """Test that a near-zero pairwise angle is rejected."""
        with pytest.raises(SynthesisError):
            generate(SynthSpec(n=48, trait_dims=[20, 20, 20], pairwise_trait_angle=1e-4))

    def test_unknown_block(self):
        """Test a collection naming a block that does not exist."""
        with pytest.raises(SynthesisError):
            generate(SynthSpec(n=16, trait_dims=[10, 10], collection_ranks={"1,3": 1}))


class TestWriteSynthetic:
    """Test the on-disk data set."""

    def test_round_trip(self, tmp_path):
        """Test CSVs, truth files and the generated run.toml."""
        spec = SynthSpec(n=32, trait_dims=[10, 12, 14], seed=7)
        blocks, truth = generate(spec)
        root = write_synthetic(str(tmp_path / "set"), spec, blocks, truth)

        assert (root / "manifest.json").exists()
        np.testing.assert_allclose(read_matrix(root / "data" / "block1.csv"), blocks[0].values, rtol=1e-14)
        loaded = read_truth(root / "manifest.json")
        assert set(loaded.scores) == set(truth.scores)
        for label, basis in truth.scores.items():
            np.testing.assert_array_equal(loaded.scores[label], basis)
        assert len(loaded.components) == len(truth.components)

        config = load_run_config(str(root / "run.toml"))
        assert config.seed == 7
        assert [b.label for b in config.blocks] == ["block1", "block2", "block3"]
        assert Path(config.blocks[0].path) == (root / "data" / "block1.csv").resolve()
        assert Path(config.output_dir) == (root / "out").resolve()


class TestTruthAngleTable:
    """Test truth_angle_table."""

    def test_rows(self, small_synthetic, small_inferences):
        """Test the row layout and angle ranges."""
        _, truth = small_synthetic
        rows = truth_angle_table(truth, small_inferences)
        per_block = 2 + 2 * 3
        assert len(rows) == 3 * per_block
        assert {r["space"] for r in rows} == {"trait", "object"}
        for row in rows:
            assert 0.0 <= row["angle"] <= 90.0
            if row["target"] == "signal":
                assert row["bound"] is not None
            else:
                assert row["bound"] is None
