import numpy as np
import pytest

from core import common, gf


def _bits(text):
    return [int(ch) for ch in text]


V_TABLE = ["100", "010", "001", "110", "011", "111", "101"]
W_TABLE = ["100", "001", "010", "101", "011", "111", "110"]


@pytest.mark.parametrize("i", range(7))
def test_coefficient_maps_of_f8(f8, i):
    g = f8.alpha_power(i)
    assert f8.v_map(g).tolist() == _bits(V_TABLE[i])
    assert f8.w_map(g).tolist() == _bits(W_TABLE[i])
    assert f8.from_v(_bits(V_TABLE[i])) == g
    assert f8.from_w(_bits(W_TABLE[i])) == g


def test_companion_of_alpha(f8):
    alpha = f8.alpha_power(1)
    assert f8.companion(alpha).tolist() == [[0, 0, 1], [1, 0, 1], [0, 1, 0]]
    assert f8.companion_transpose(alpha).tolist() == [[0, 1, 0], [0, 0, 1], [1, 1, 0]]
    assert f8.companion(f8.alpha_power(2)).tolist() == [[0, 1, 0], [0, 1, 1], [1, 0, 1]]


def test_companion_acts_on_both_maps(f8):
    for g in range(f8.q):
        A = f8.companion(g).astype(np.int64)
        for d in range(f8.q):
            product = f8.mul(g, d)
            assert ((A @ f8.v_map(d)) % 2).tolist() == f8.v_map(product).tolist()
            assert ((A.T @ f8.w_map(d)) % 2).tolist() == f8.w_map(product).tolist()


def test_v_and_w_are_dual(f8):
    for a in range(f8.q):
        for b in range(f8.q):
            inner = int(f8.v_map(a) @ f8.w_map(b)) % 2
            assert inner == f8.mul(a, b) & 1


def test_alpha_eight_in_f256(f256):
    assert f256.v_map(f256.alpha_power(8)).tolist() == _bits("10111000")


def test_inner_product_vanishes_in_f256(f256):
    a = f256.alpha_power
    first = f256.mul(a(200), a(62))
    second = f256.mul(a(238), a(24))
    assert first == second == a(7)
    assert f256.add(first, second) == 0


def test_inverse_and_division(f256):
    for g in range(1, f256.q):
        assert f256.mul(g, f256.inv(g)) == 1
    assert f256.div(f256.alpha_power(10), f256.alpha_power(3)) == f256.alpha_power(7)
    with pytest.raises(common.DivisionByZero):
        f256.inv(0)
    with pytest.raises(common.DivisionByZero):
        f256.inv_array([1, 0, 2])


def test_module_level_operations(f8):
    assert gf.gf_add(f8, 3, 5) == 6
    for g in range(1, f8.q):
        assert gf.gf_mul(f8, g, gf.gf_inv(f8, g)) == 1
        assert gf.gf_add(f8, g, g) == 0
    with pytest.raises(common.DivisionByZero):
        gf.gf_inv(f8, 0)


def test_mul_array_matches_scalar(f8, rng):
    a = rng.integers(f8.q, size=50)
    b = rng.integers(f8.q, size=50)
    expected = [f8.mul(int(x), int(y)) for x, y in zip(a, b)]
    assert f8.mul_array(a, b).tolist() == expected


def test_expand_contract(f8, rng):
    symbols = rng.integers(f8.q, size=12)
    for which in ("v", "w"):
        bits = f8.expand(symbols, which)
        assert bits.size == 36
        assert f8.contract(bits, which).tolist() == symbols.tolist()
    with pytest.raises(common.DimensionMismatch):
        f8.contract(np.zeros(4), "v")


def test_polynomial_parsing():
    assert gf.poly_from_bits("101110001") == 0b100011101
    assert gf.poly_to_bits(0b1011) == "1101"
    assert gf.make_field(8, "101110001") == gf.make_field(8)


def test_rejects_non_primitive_polynomial():
    # 1 + x + x^2 + x^3 + x^4 is irreducible but x has order 5
    with pytest.raises(common.NonPrimitivePolynomial):
        gf.make_field(4, 0b11111)
    with pytest.raises(ValueError):
        gf.make_field(4, 0b1011)


@pytest.mark.parametrize("e", [3, 8])
def test_galois_field_matches_tables(e):
    field = gf.make_field(e)
    GF = field.galois_field
    a, b = np.meshgrid(np.arange(field.q), np.arange(field.q))
    product = (GF(a) * GF(b)).view(np.ndarray).astype(np.int64)
    assert np.array_equal(product, field.mul_array(a, b))
    assert field.galois_field is GF
