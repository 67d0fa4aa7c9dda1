import numpy as np
import pytest

from core import affine, code, common, construct, cycles, gf
from core.affine import AffinePerm
from utility import presets


@pytest.mark.parametrize("P", sorted(presets.PUBLISHED))
def test_published_pairs_meet_the_requirement(P):
    gen = presets.published(P)
    assert gen.L == 6 and gen.complete
    assert construct.check_requirement1(gen)
    assert construct.check_incomplete_commutativity(gen)


def test_published_pair_meets_the_cycle_criterion():
    assert construct.check_cycle_criterion(presets.published(384))


def test_example_pair_is_fully_commutative(example_pair):
    assert construct.check_requirement1(example_pair)
    assert not construct.check_incomplete_commutativity(example_pair)
    assert not construct.check_cycle_criterion(example_pair)
    assert construct.check_cycle_criterion(example_pair, max_len=4)


def test_unknown_preset():
    with pytest.raises(KeyError):
        presets.published(100)
    assert presets.preset(8) == presets.example()


def test_build_arrays_rejects_violations():
    gen = construct.GeneratorPair.from_coefficients(
        [(1, 1), (3, 0), (1, 2)], [(1, 0), (5, 1), (1, 3)], 8)
    assert not construct.check_requirement1(gen)
    with pytest.raises(common.RequirementViolation):
        construct.build_arrays(gen)


def test_partial_pairs_are_checked_on_defined_entries():
    f = [AffinePerm(5, 7, 8), None, None]
    g = [AffinePerm(5, 7, 8), None, None]
    partial = construct.GeneratorPair(f, g, 8)
    assert not partial.complete
    assert construct.check_requirement1(partial)
    assert construct.check_incomplete_commutativity(partial)


def test_published_pair_girth():
    hx, hz = construct.build_arrays(presets.published(384))
    assert affine.girth(hx, hz) == 12


def test_sample_generators_gives_up():
    # Translations always commute, so the last f position can never be filled
    with pytest.raises(common.SearchExhausted):
        construct.sample_generators(2, 6, 0, max_attempts=5)
    with pytest.raises(ValueError):
        construct.sample_generators(8, 5, 0)


def test_zero_system_shape(example_arrays):
    hx, hz = example_arrays
    system = construct.build_zero_system(hz, hx)
    assert system.rows == 16 and system.size == 96
    assert system.must_be_zero
    assert np.array_equal(system.coeffs.sum(axis=1), np.zeros(16))
    matrix = system.matrix(7)
    assert matrix.format == "csr"
    assert matrix.shape == (16, 96) and matrix.nnz == 16 * 12
    assert set(np.unique(matrix.data).tolist()) == {1, 6}


def test_zero_system_solution(example_arrays, rng):
    hx, hz = example_arrays
    system = construct.build_zero_system(hz, hx)
    fbmap = construct.solve_zero_system(system, 8)
    assert fbmap.size == 96
    assert set(fbmap.bound.tolist()).isdisjoint(fbmap.free.tolist())
    for _ in range(5):
        free_values = rng.integers(7, size=fbmap.dimension)
        vector = fbmap.expand(free_values)
        assert np.array_equal(vector[fbmap.free], free_values)
        assert not system.evaluate(vector, 7).any()


@pytest.mark.parametrize("q", [16, 256])
def test_zero_system_over_composite_moduli(example_arrays, rng, q):
    hx, hz = example_arrays
    system = construct.build_zero_system(hz, hx)
    fbmap = construct.solve_zero_system(system, q)
    assert fbmap.size == 96
    for _ in range(5):
        vector = fbmap.expand(rng.integers(q - 1, size=fbmap.dimension))
        assert not system.evaluate(vector, q - 1).any()


def test_nonzero_system_cannot_be_solved(example_pair, example_arrays):
    hx, _ = example_arrays
    _, hz2 = construct.extended_arrays(example_pair)
    system = construct.build_nonzero_system(hz2, hx)
    assert system.rows == 8 and not system.must_be_zero
    with pytest.raises(ValueError):
        construct.solve_zero_system(system, 8)


def test_conventional_labels(example_arrays):
    hx, hz = example_arrays
    system = construct.build_zero_system(hz, hx)
    fbmap = construct.solve_zero_system(system, 8)
    gamma = construct.label_gamma(hx, hz, fbmap, 4, require_full_rank=False)
    log_gamma, log_delta = construct.label_delta(gamma, hx, hz, 4, require_full_rank=False)
    assert log_gamma.size == log_delta.size == 96
    assert not system.evaluate(log_gamma, 7).any()
    assert log_delta.min() >= 0 and log_delta.max() < 7


def test_array_rows_wrap_around(example_pair):
    # Row block 3 repeats row block 0 for L = 6
    assert construct.array_rows(example_pair, 3) == construct.array_rows(example_pair, 0)


def test_conventional_code(small_code):
    assert small_code.mode == "conventional"
    assert (small_code.P, small_code.L, small_code.N, small_code.M) == (8, 6, 48, 16)
    assert (small_code.n, small_code.m) == (144, 48)
    for side in cycles.SIDES:
        for record in small_code.catalog(side):
            if side == "Gamma" and record.utcbc_j in (0, 1):
                assert cycles.cycle_determinant(small_code.field, record) == 0


def test_build_code_is_reproducible(small_code, example_pair):
    again = construct.build_code(8, 3, gen=example_pair, mode="conventional", seed=0)
    assert np.array_equal(again.hgamma.labels, small_code.hgamma.labels)
    assert np.array_equal(again.hdelta.labels, small_code.hdelta.labels)


def test_build_code_arguments():
    with pytest.raises(ValueError):
        construct.build_code(8, 3, mode="random")
    with pytest.raises(ValueError):
        construct.ConstructionParams(max_attempts=0).validate()


def test_construction_params_from_settings():
    settings = common.default_settings()
    settings.set("construction", "max_restarts", "3")
    params = construct.ConstructionParams.from_settings(settings)
    assert params.max_restarts == 3
    assert params.max_attempts == 100000


def test_row_pair_over_f256(example_pair, example_arrays):
    hx, hz = example_arrays
    field = gf.make_field(8)
    system = construct.build_zero_system(hz, hx)
    fbmap = construct.solve_zero_system(system, field.q)
    gamma = construct.label_gamma(hx, hz, fbmap, 3, require_full_rank=False)
    log_gamma, log_delta = construct.label_delta(gamma, hx, hz, 3, require_full_rank=False)

    # Row (j=0, r=7) of the zero system
    assert system.evaluate(log_gamma, 255)[7] == 0

    css = code.assemble(field, example_pair, log_gamma, log_delta, mode="conventional")
    shared = sorted(set(hx.row_columns(0, 7)) & set(hz.row_columns(0, 5)))
    assert shared == [0, 24]
    first, second = (field.mul(css.hgamma.entry(7, c), css.hdelta.entry(5, c)) for c in shared)
    assert first == second != 0


def test_full_rank_labels_on_published_pair():
    gen = presets.published(384)
    hx, hz = construct.build_arrays(gen)
    zero_system = construct.build_zero_system(hz, hx)
    fbmap = construct.solve_zero_system(zero_system, 32)
    gamma = construct.label_gamma(hx, hz, fbmap, 5)
    log_gamma, log_delta = construct.label_delta(gamma, hx, hz, 5)

    hx2, hz2 = construct.extended_arrays(gen)
    assert not zero_system.evaluate(log_gamma, 31).any()
    assert construct.build_nonzero_system(hz2, hx).evaluate(log_gamma, 31).all()
    assert construct.build_nonzero_system(hx2, hz).evaluate(log_delta, 31).all()
