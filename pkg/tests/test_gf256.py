"""Reed-Solomon tests against an independent GF(256) oracle.

The oracle multiplies with shift-and-reduce (russian peasant) arithmetic
instead of log/exp tables, and divides polynomials long-hand, so it
shares no code with the implementation under test.
"""
import numpy as np
import pytest

from cambench.qr.gf256 import EXP, LOG, generator_poly, gf_mul, rs_encode


def oracle_mul(a: int, b: int) -> int:
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return result & 0xFF


def oracle_poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] ^= oracle_mul(x, y)
    return out


def oracle_poly_rem(dividend, divisor):
    rem = list(dividend)
    for i in range(len(dividend) - len(divisor) + 1):
        factor = rem[i]
        if factor:
            for j, d in enumerate(divisor):
                rem[i + j] ^= oracle_mul(factor, d)
    return rem[-(len(divisor) - 1):]


def test_gf_mul_field_laws():
    assert gf_mul(2, 2) == 4  # x * x = x^2, no reduction
    assert gf_mul(0, 77) == 0
    assert gf_mul(1, 77) == 77
    rng = np.random.default_rng(0)
    for _ in range(300):
        a, b = int(rng.integers(0, 256)), int(rng.integers(0, 256))
        assert gf_mul(a, b) == oracle_mul(a, b)
        assert gf_mul(a, b) == gf_mul(b, a)


def test_exp_log_tables_consistent():
    for v in range(1, 256):
        assert EXP[LOG[v]] == v
    assert EXP[0] == 1 and EXP[255] == EXP[0]


def test_generator_poly_matches_product_expansion():
    for ecc in (7, 10, 13, 17):
        want = [1]
        for i in range(ecc):
            want = oracle_poly_mul(want, [1, EXP[i]])
        assert list(generator_poly(ecc)) == want


def test_generator_poly_bounds():
    with pytest.raises(ValueError):
        generator_poly(0)
    with pytest.raises(ValueError):
        generator_poly(31)


def test_parity_makes_codeword_divisible():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n_data = int(rng.integers(1, 60))
        ecc = int(rng.integers(1, 31))
        data = bytes(rng.integers(0, 256, n_data, dtype=np.uint8))
        parity = rs_encode(data, ecc)
        assert len(parity) == ecc
        codeword = list(data) + list(parity)
        rem = oracle_poly_rem(codeword, list(generator_poly(ecc)))
        assert all(r == 0 for r in rem)


def test_parity_deterministic():
    data = b"deterministic payload"
    assert rs_encode(data, 10) == rs_encode(data, 10)
