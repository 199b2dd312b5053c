"""Tests for ENC/ECT, direction diagnostics and the report."""

import json
import logging

import numpy as np
import pytest

from src.core.errors import NumericError
from src.core.models import BlockCollection, BlockInference
from src.services.diagnostics import (
    assemble_report,
    direction_diagnostics,
    ect,
    enc,
    qq_record,
    report_from_json,
    report_to_json,
)
from src.services.reconstruct import reconstruct_blocks
from src.services.signal_extract import extract_signal
from tests.conftest import make_block


class TestEnc:
    """Test the effective number of cases."""

    def test_examples(self):
        """Test a coordinate vector, the flat vector and a two-entry vector."""
        n = 50
        assert enc(np.eye(n)[0]) == pytest.approx(1.0)
        assert enc(np.full(n, 1.0 / np.sqrt(n))) == pytest.approx(n)
        assert enc(np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2.0)) == pytest.approx(2.0)

    def test_needs_unit_vector(self):
        """Test that a non-unit vector is rejected."""
        with pytest.raises(NumericError):
            enc(np.array([1.0, 1.0]))


class TestEct:
    """Test the effective contribution of traits."""

    def test_examples(self):
        """Test a single trait and equal magnitudes."""
        assert ect(np.eye(10)[0], 10) == pytest.approx(0.1)
        assert ect(np.array([2.0, -2.0, 2.0, 2.0])) == pytest.approx(1.0)

    def test_scale_free(self, rng):
        """Test homogeneity of degree zero, including tiny loadings."""
        loading = rng.standard_normal(30)
        assert ect(1e-200 * loading) == pytest.approx(ect(loading), rel=1e-12)
        assert ect(-7.0 * loading) == pytest.approx(ect(loading), rel=1e-12)

    def test_zero_loadings(self):
        """Test that a zero vector is rejected."""
        with pytest.raises(NumericError):
            ect(np.zeros(4))


class TestSummaryRanges:
    """Test the ranges of ENC and ECT."""

    def test_random_vectors(self, rng):
        """Test 1 ≤ ENC ≤ n and 1/d ≤ ECT ≤ 1 on dense and sparse vectors."""
        n = 40
        vectors = rng.standard_normal((10_000, n))
        vectors[::2] *= rng.random((5_000, n)) < 0.2
        for v in vectors:
            if not np.any(v):
                continue
            assert 1.0 - 1e-9 <= enc(v / np.linalg.norm(v)) <= n + 1e-9
            assert 1.0 / n - 1e-12 <= ect(v) <= 1.0 + 1e-12


class TestDirectionDiagnostics:
    """Test direction_diagnostics and assemble_report on synthetic data."""

    def test_included_and_excluded_blocks(self, small_inferences, small_search):
        """Test the per-block fields of an accepted direction."""
        structures, _ = small_search
        collection, structure = next(iter(structures.items()))
        v = structure.scores_basis[:, 0]
        loadings = {k: inf.block.values @ v for k, inf in enumerate(small_inferences)}
        record = direction_diagnostics(v, collection, 1, small_inferences, loadings)
        assert record.collection == collection.label
        assert 1.0 <= record.enc <= 96.0
        assert len(record.scores) == 96
        for inf, entry in zip(small_inferences, record.blocks):
            assert entry.included == collection.contains(inf.index)
            assert entry.trait_upper == pytest.approx(entry.trait_angle + entry.trait_theta2, abs=2e-4)
            if entry.included:
                assert entry.trait_angle <= inf.bounds.phi_hat + 0.05
                assert 0.0 < entry.ect <= 100.0
                assert entry.object_angle is not None
            else:
                assert entry.trait_angle > inf.bounds.phi_hat - 0.05
                assert entry.object_angle is None
                assert entry.ect is None

    def test_zero_loading_falls_back_to_projection(self, small_inferences):
        """Test that a missing loadings column is replaced by X v."""
        v = small_inferences[0].V_check.matrix[:, 0]
        record = direction_diagnostics(v, BlockCollection.of(0), 1, small_inferences, {0: np.zeros(48)})
        assert record.blocks[0].object_angle is not None

    def test_informative_direction(self, small_inferences, caplog):
        """Test that a direction inside the filtered basis is informative."""
        v = small_inferences[0].V_check.matrix[:, 0]
        with caplog.at_level(logging.WARNING):
            record = direction_diagnostics(v, BlockCollection.of(0), 1, small_inferences, {})
        entry = record.blocks[0]
        assert entry.trait_angle <= entry.phi_hat
        assert entry.trait_upper < entry.theta0
        assert not entry.non_informative
        assert "non-informative" not in caplog.text

    def test_non_informative_direction(self, small_inferences, caplog):
        """Test the flag and its warning when the upper bound reaches θ₀."""
        first = small_inferences[0]
        bounds = first.bounds.model_copy(update={"theta0": 0.0})
        shrunk = first.model_copy(update={"bootstrap": first.bootstrap.model_copy(update={"bounds": bounds})})
        inferences = [shrunk] + list(small_inferences[1:])
        v = first.V_check.matrix[:, 0]
        with caplog.at_level(logging.WARNING):
            record = direction_diagnostics(v, BlockCollection.of(0), 1, inferences, {})
        assert record.blocks[0].non_informative
        assert "non-informative for block" in caplog.text
        assert first.name in caplog.text

    def test_signal_free_blocks(self):
        """Test a report over blocks without signal."""
        blocks = [make_block(np.zeros((4, 6)), name=f"b{k}") for k in range(2)]
        inferences = [BlockInference(index=k, block=b, estimate=extract_signal(b)) for k, b in enumerate(blocks)]
        report = assemble_report({"seed": 1}, inferences, [], reconstruct_blocks(blocks, {}))
        assert [b.filtered_rank for b in report.blocks] == [0, 0]
        assert [b.final_rank for b in report.blocks] == [0, 0]
        assert all(b.signal_free for b in report.blocks)
        assert report.directions == []
        assert report.collections == []


class TestReport:
    """Test report assembly and serialization."""

    def test_full_report(self, small_inferences, small_search, small_decompositions):
        """Test block, collection and direction entries of a real report."""
        structures, history = small_search
        report = assemble_report({"seed": 11}, small_inferences, history, small_decompositions)
        assert [b.index for b in report.blocks] == [1, 2, 3]
        assert [c.label for c in report.collections] == [s.collection.label for s in history]
        assert report.collection_ranks() == {s.collection.label: s.rank for s in history}
        assert len(report.directions) == sum(s.rank for s in structures.values())
        for block in report.blocks:
            assert block.filtered_rank <= block.estimated_rank <= block.max_rank
            assert block.final_rank <= block.d

    def test_json_is_stable(self, small_inferences, small_search, small_decompositions):
        """Test sorted keys, rounding and a byte-identical round trip."""
        _, history = small_search
        report = assemble_report({"seed": 11}, small_inferences, history, small_decompositions)
        text = report_to_json(report)
        assert report_to_json(report_from_json(text)) == text
        payload = json.loads(text)
        assert list(payload) == sorted(payload)
        for block in payload["blocks"]:
            if block["phi_hat"] is not None:
                assert round(block["phi_hat"], 4) == block["phi_hat"]

    def test_qq_record(self):
        """Test the fraction of observed values inside the envelope."""
        table = {
            "rank": np.arange(1, 5),
            "observed": np.array([0.5, 1.0, 2.0, 9.0]),
            "theoretical": np.array([0.6, 1.1, 2.1, 3.0]),
            "env_min": np.array([0.4, 0.9, 1.9, 2.5]),
            "env_max": np.array([0.8, 1.3, 2.3, 3.5]),
        }
        record = qq_record("b1", table)
        assert record.fraction_inside == pytest.approx(0.75)
        assert record.naive is None
        assert record.rank == [1, 2, 3, 4]
