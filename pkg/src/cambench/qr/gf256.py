"""GF(256) arithmetic and Reed-Solomon parity generation.

Field: GF(2^8) with primitive polynomial x^8 + x^4 + x^3 + x^2 + 1
(0x11D), generator element alpha = 2, the field QR symbols use.
"""
from __future__ import annotations

from functools import lru_cache

_PRIMITIVE = 0x11D

# exp table doubled so gf_mul can skip the mod-255 on the exponent sum
EXP = [0] * 512
LOG = [0] * 256
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= _PRIMITIVE
for _i in range(255, 512):
    EXP[_i] = EXP[_i - 255]
del _x, _i


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def poly_mul(p: list[int], q: list[int]) -> list[int]:
    """Multiply polynomials with coefficients in GF(256), highest degree
    first."""
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        la = LOG[a]
        for j, b in enumerate(q):
            if b:
                out[i + j] ^= EXP[la + LOG[b]]
    return out


@lru_cache(maxsize=None)
def generator_poly(ecc_count: int) -> tuple[int, ...]:
    """Reed-Solomon generator: product of (x - alpha^i) for i in
    [0, ecc_count), highest degree first (leading coefficient 1)."""
    if not 1 <= ecc_count <= 30:
        raise ValueError(f"ecc_count {ecc_count} outside [1, 30]")
    g = [1]
    for i in range(ecc_count):
        g = poly_mul(g, [1, EXP[i]])
    return tuple(g)


def rs_encode(data_codewords, ecc_count: int) -> bytes:
    """Reed-Solomon parity bytes for a data codeword block.

    The returned ecc_count bytes make data + parity divisible by the
    degree-ecc_count generator polynomial.
    """
    gen = generator_poly(ecc_count)
    rem = [0] * ecc_count
    for byte in bytes(data_codewords):
        factor = byte ^ rem[0]
        rem = rem[1:] + [0]
        if factor:
            lf = LOG[factor]
            for i in range(ecc_count):
                g = gen[i + 1]
                if g:
                    rem[i] ^= EXP[lf + LOG[g]]
    return bytes(rem)


def poly_mod(dividend: list[int], divisor: list[int]) -> list[int]:
    """Polynomial remainder over GF(256), highest degree first."""
    out = list(dividend)
    dlen = len(divisor)
    for i in range(len(out) - dlen + 1):
        coef = out[i]
        if coef == 0:
            continue
        lc = LOG[coef]
        for j in range(dlen):
            d = divisor[j]
            if d:
                out[i + j] ^= EXP[lc + LOG[d]]
    return out[-(dlen - 1):] if dlen > 1 else []
