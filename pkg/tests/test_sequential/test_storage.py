"""Tests for saving and loading smoother states."""

import json

import numpy as np
import pytest

from lowdim.config.settings import AssimilationSpec, ReferenceSpec, TemplateSpec
from lowdim.errors import IntegrityError
from lowdim.models.stochastic_volatility import StochasticVolatilityModel
from lowdim.models.simulation import simulate
from lowdim.sequential.smoother import assimilate, sample_smoothing
from lowdim.sequential.storage import MANIFEST_NAME, load_manifest, load_state, save_state

CLOSED_FORM = AssimilationSpec(closed_form=True)


@pytest.fixture
def closed_state(lg_model, lg_observations):
    return assimilate(lg_model, lg_observations[:6], options=CLOSED_FORM)


class TestSaveLoad:
    """Test state directories."""

    def test_round_trip(self, tmp_path, closed_state):
        """Test a reloaded state samples identically."""
        manifest = save_state(closed_state, tmp_path)
        assert [r.checkpoint for r in manifest.steps][:2] == [
            "step_0000.json",
            "step_0001.json",
        ]
        loaded = load_state(tmp_path)
        assert loaded.n_steps == closed_state.n_steps
        assert loaded.model_hash == closed_state.model_hash
        assert loaded.log_evidence == pytest.approx(closed_state.log_evidence)
        assert np.array_equal(loaded.observations, closed_state.observations)
        assert np.array_equal(
            sample_smoothing(loaded, 10, seed=4), sample_smoothing(closed_state, 10, seed=4)
        )

    def test_resave_is_idempotent(self, tmp_path, closed_state):
        """Test saving the same state twice succeeds."""
        first = save_state(closed_state, tmp_path)
        second = save_state(closed_state, tmp_path)
        assert [r.sha256 for r in first.steps] == [r.sha256 for r in second.steps]

    def test_extension_keeps_checkpoints(self, tmp_path, lg_model, lg_observations):
        """Test resuming adds files without rewriting earlier ones."""
        state = assimilate(lg_model, lg_observations[:4], options=CLOSED_FORM)
        before = save_state(state, tmp_path)
        resumed = assimilate(
            lg_model, lg_observations[:7], options=CLOSED_FORM, state=load_state(tmp_path)
        )
        after = save_state(resumed, tmp_path)
        assert len(after.steps) == 6
        assert [r.sha256 for r in after.steps[:3]] == [r.sha256 for r in before.steps]

    def test_refuses_to_overwrite(self, tmp_path, lg_model, lg_observations, closed_state):
        """Test a differing checkpoint is never overwritten."""
        save_state(closed_state, tmp_path)
        other = assimilate(lg_model, lg_observations[1:7], options=CLOSED_FORM)
        with pytest.raises(IntegrityError):
            save_state(other, tmp_path)

    def test_parameter_maps(self, tmp_path):
        """Test states with static parameters store their parameter maps."""
        model = StochasticVolatilityModel()
        Y = simulate(model, 3, theta=np.array([0.0, 3.0]), seed=1)[1]
        state = assimilate(
            model,
            Y,
            template=TemplateSpec(degree=1),
            reference=ReferenceSpec(kind="gauss-hermite", order=2),
            options=AssimilationSpec(regression_samples=50),
        )
        save_state(state, tmp_path)
        assert (tmp_path / "param_map_0001.json").exists()
        loaded = load_state(tmp_path)
        x = np.zeros((1, 2))
        assert np.allclose(loaded.param_maps[1].evaluate(x), state.param_maps[1].evaluate(x))


class TestIntegrity:
    """Test detection of damaged state directories."""

    def test_missing_manifest(self, tmp_path):
        """Test an empty directory raises."""
        with pytest.raises(IntegrityError):
            load_state(tmp_path)

    def test_corrupt_manifest(self, tmp_path):
        """Test invalid manifest JSON raises."""
        (tmp_path / MANIFEST_NAME).write_text("[1, 2")
        with pytest.raises(IntegrityError):
            load_manifest(tmp_path)

    def test_unsupported_version(self, tmp_path, closed_state):
        """Test an unknown format version raises."""
        save_state(closed_state, tmp_path)
        data = json.loads((tmp_path / MANIFEST_NAME).read_text())
        data["format_version"] = 99
        (tmp_path / MANIFEST_NAME).write_text(json.dumps(data))
        with pytest.raises(IntegrityError):
            load_state(tmp_path)

    def test_tampered_checkpoint(self, tmp_path, closed_state):
        """Test a modified checkpoint fails its hash check."""
        save_state(closed_state, tmp_path)
        path = tmp_path / "step_0002.json"
        path.write_text(path.read_text().replace("\n", "\n "))
        with pytest.raises(IntegrityError):
            load_state(tmp_path)

    def test_deleted_checkpoint(self, tmp_path, closed_state):
        """Test a missing checkpoint raises."""
        save_state(closed_state, tmp_path)
        (tmp_path / "step_0001.json").unlink()
        with pytest.raises(IntegrityError):
            load_state(tmp_path)
