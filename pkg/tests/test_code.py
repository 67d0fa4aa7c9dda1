import json

import numpy as np
import pytest

from core import code, common
from utility import linalg


def test_orthogonality(small_code):
    report = code.verify_orthogonality(small_code, samples=48)
    assert report.ok
    assert report.violation is None
    assert report.binary_rows_checked == 48


def test_binary_images_commute(small_code):
    H_X, H_Z = code.to_binary_dense(small_code)
    assert H_X.shape == H_Z.shape == (48, 144)
    assert not np.any((H_X.astype(np.int64) @ H_Z.T.astype(np.int64)) % 2)


def test_binary_row_action_matches_dense(small_code, rng):
    H_X, H_Z = code.to_binary_dense(small_code)
    for _ in range(5):
        x = rng.integers(2, size=small_code.n).astype(np.uint8)
        expected_x = (H_X.astype(np.int64) @ x) % 2
        expected_z = (H_Z.astype(np.int64) @ x) % 2
        assert np.array_equal(code.expand_binary_row_action(small_code, "Gamma", x), expected_x)
        assert np.array_equal(code.expand_binary_row_action(small_code, "Delta", x), expected_z)
    with pytest.raises(common.DimensionMismatch):
        code.expand_binary_row_action(small_code, "Gamma", np.zeros(10))


def test_dimension_matches_binary_ranks(small_code):
    H_X, H_Z = code.to_binary_dense(small_code)
    k, rank_x, rank_z = code.compute_dimension(small_code)
    assert rank_x == linalg.gf2_rank(H_X)
    assert rank_z == linalg.gf2_rank(H_Z)
    assert k == small_code.n - rank_x - rank_z
    assert k > 0


def test_matrix_views(small_code, rng):
    H = small_code.hgamma
    dense = H.dense()
    assert np.count_nonzero(dense) == H.M * H.L
    assert H.entry(0, int(H.cols[0, 2])) == H.labels[0, 2]
    assert H.column_rows.shape == (H.N, 2)
    x = rng.integers(small_code.field.q, size=H.N)
    expected = [np.bitwise_xor.reduce(small_code.field.mul_array(row, x)) for row in dense]
    assert H.multiply(small_code.field, x).tolist() == [int(v) for v in expected]


def test_dual_membership(small_code):
    field = small_code.field
    gamma_row = small_code.hgamma.dense()[3]
    delta_row = small_code.hdelta.dense()[5]
    assert code.dual_membership(small_code, "X", field.expand(gamma_row, "w"))
    assert code.dual_membership(small_code, "Z", field.expand(delta_row, "v"))
    assert code.dual_membership(small_code, "X", np.zeros(small_code.n))

    # Rows of the other matrix are null vectors touching every column
    single = np.zeros(small_code.n, dtype=np.uint8)
    single[0] = 1
    assert not code.dual_membership(small_code, "X", single)
    assert not code.dual_membership(small_code, "Z", single)
    with pytest.raises(ValueError):
        code.dual_membership(small_code, "Y", single)


def test_code_file(small_code):
    data = code.serialize(small_code)
    assert code.serialize(code.deserialize(data)) == data
    restored = code.deserialize(data.decode("utf-8"))
    assert restored.mode == "conventional"
    assert restored.seed_info == small_code.seed_info
    assert restored.field == small_code.field
    assert np.array_equal(restored.hdelta.cols, small_code.hdelta.cols)


def test_code_file_rejects_broken_labels(small_code):
    document = json.loads(code.serialize(small_code))
    column, exponent = document["gamma_rows"][0][0]
    document["gamma_rows"][0][0] = [column, (exponent + 1) % 7]
    with pytest.raises(common.InvariantViolation):
        code.deserialize(json.dumps(document))


def test_code_file_rejects_malformed_input(small_code):
    with pytest.raises(common.FormatError):
        code.deserialize(b"not json")
    document = json.loads(code.serialize(small_code))
    document["version"] = 99
    with pytest.raises(common.FormatError):
        code.deserialize(json.dumps(document))
    document = json.loads(code.serialize(small_code))
    document["delta_rows"][0][0][1] = 7
    with pytest.raises(common.FormatError):
        code.deserialize(json.dumps(document))
    document = json.loads(code.serialize(small_code))
    document["delta_rows"][0][0][0] += 1
    with pytest.raises(common.InvariantViolation):
        code.deserialize(json.dumps(document))


def test_nb_matrix_invariants():
    with pytest.raises(common.InvariantViolation):
        code.NbMatrix(np.zeros((2, 2)), np.ones((2, 2)), 1, 2, 3)
    with pytest.raises(common.InvariantViolation):
        code.NbMatrix(np.zeros((2, 2)), np.zeros((2, 2)), 1, 2, 2)


@pytest.mark.slow
def test_published_code(preset_code):
    report = code.verify_orthogonality(preset_code)
    assert report.ok
    k, rank_x, rank_z = code.compute_dimension(preset_code)
    assert preset_code.n == 8 * 6 * 384
    assert k == preset_code.n - rank_x - rank_z
    assert k > 0
