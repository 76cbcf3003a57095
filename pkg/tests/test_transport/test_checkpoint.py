"""Tests for map checkpoints."""

import hashlib
import json

import numpy as np
import pytest

from lowdim.errors import IntegrityError
from lowdim.graphs.elimination import inverse_sparsity
from lowdim.transport.checkpoint import dumps_map, load_map, save_map
from lowdim.transport.composition import AffineMap, MapComposition
from lowdim.transport.maps import MonotoneTriangularMap


@pytest.fixture
def sparse_map(five_vertex_graph, rng):
    template = MonotoneTriangularMap.from_sparsity(
        inverse_sparsity(five_vertex_graph), degree=2, rectifier="exp"
    )
    return template.with_coefficients(
        template.coefficients + 0.1 * rng.standard_normal(template.n_coefficients)
    )


class TestCheckpoints:
    """Test saving and loading maps."""

    def test_triangular_round_trip(self, tmp_path, sparse_map, rng):
        """Test a triangular map reloads with identical coefficients."""
        path = tmp_path / "map.json"
        digest = save_map(sparse_map, path)
        loaded = load_map(path, digest)
        assert np.array_equal(loaded.coefficients, sparse_map.coefficients)
        assert loaded.perm == sparse_map.perm
        assert loaded.active_sets() == sparse_map.active_sets()
        x = rng.standard_normal((4, 5))
        assert np.array_equal(loaded.evaluate(x), sparse_map.evaluate(x))

    def test_permuted_map(self, tmp_path, rng):
        """Test a generalized triangular map keeps its permutation."""
        m = MonotoneTriangularMap.identity(3, 2, perm=[1, 2, 0])
        save_map(m, tmp_path / "m.json")
        loaded = load_map(tmp_path / "m.json")
        assert loaded.perm == (1, 2, 0)
        x = rng.standard_normal((3, 3))
        assert np.array_equal(loaded.evaluate(x), m.evaluate(x))

    def test_affine_round_trip(self, tmp_path, rng):
        """Test an affine map reloads exactly."""
        m = AffineMap(rng.standard_normal((2, 2)) + 3.0 * np.eye(2), rng.standard_normal(2))
        save_map(m, tmp_path / "affine.json")
        loaded = load_map(tmp_path / "affine.json")
        assert np.array_equal(loaded.matrix, m.matrix)
        assert np.array_equal(loaded.offset, m.offset)

    def test_digest_matches_bytes(self, tmp_path, sparse_map):
        """Test the returned hash is the SHA-256 of the file."""
        path = tmp_path / "map.json"
        digest = save_map(sparse_map, path)
        assert digest == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_deterministic_text(self, sparse_map):
        """Test serialization is stable."""
        assert dumps_map(sparse_map) == dumps_map(sparse_map)

    def test_hash_mismatch(self, tmp_path, sparse_map):
        """Test a tampered file is rejected."""
        path = tmp_path / "map.json"
        digest = save_map(sparse_map, path)
        data = json.loads(path.read_text())
        data["components"][0]["a_coeffs"][0] += 1.0
        path.write_text(json.dumps(data, indent=2))
        with pytest.raises(IntegrityError):
            load_map(path, digest)

    def test_missing_file(self, tmp_path):
        """Test a missing checkpoint raises."""
        with pytest.raises(IntegrityError):
            load_map(tmp_path / "absent.json")

    def test_corrupt_file(self, tmp_path):
        """Test invalid JSON raises."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(IntegrityError):
            load_map(path)

    def test_unsupported_map(self):
        """Test compositions cannot be checkpointed."""
        m = AffineMap(np.eye(1), np.zeros(1))
        with pytest.raises(TypeError):
            dumps_map(MapComposition([m, m]))
