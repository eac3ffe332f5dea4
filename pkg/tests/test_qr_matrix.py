import numpy as np
import pytest

from cambench.errors import CapacityExceeded
from cambench.qr.matrix import (ECC_LEVELS, QrSpec, Role, build_matrix,
                                byte_capacity, encode_codewords, format_bits)

# self-contained BCH(15,5) oracle: bit-serial GF(2) long division
def oracle_format_bits(level: str, mask: int) -> int:
    level_bits = {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}[level]
    data = (level_bits << 3) | mask
    gen = 0b10100110111  # x^10+x^8+x^5+x^4+x^2+x+1
    reg = data << 10
    for bit in range(14, 9, -1):
        if reg & (1 << bit):
            reg ^= gen << (bit - 10)
    return ((data << 10) | reg) ^ 0b101010000010010


# data codewords for version-1-L byte-mode "HELLO", constructed by hand:
# 0100 | 00000101 | the five bytes | 0000 terminator | EC/11 padding
HELLO_DATA = [0x40, 0x54, 0x84, 0x54, 0xC4, 0xC4, 0xF0, 0xEC, 0x11,
              0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11]
# parity frozen from this encoder and verified two independent ways:
# zero remainder under the oracle division in test_gf256, and whole-symbol
# decode by OpenCV's QR detector
HELLO_ECC = [0x4D, 0x2A, 0xD3, 0xBB, 0x9F, 0x20, 0x84]


class TestFormatBits:
    def test_all_combinations_match_oracle(self):
        for level in ECC_LEVELS:
            for mask in range(8):
                assert format_bits(level, mask) == oracle_format_bits(level, mask)

    def test_known_vector_l_mask0(self):
        assert format_bits("L", 0) == 0x77C4


class TestEncodeCodewords:
    def test_hello_v1l_stream(self):
        spec = QrSpec(version=1, ecc_level="L", payload=b"HELLO",
                      mask_pattern=0)
        cw = encode_codewords(spec)
        assert list(cw[:19]) == HELLO_DATA
        assert list(cw[19:]) == HELLO_ECC

    def test_stream_lengths(self):
        totals = {1: 26, 2: 44, 3: 70, 4: 100}
        for version, total in totals.items():
            for level in ECC_LEVELS:
                spec = QrSpec(version=version, ecc_level=level, payload=b"x")
                assert len(encode_codewords(spec)) == total

    def test_capacity_enforced(self):
        cap = byte_capacity(1, "L")
        assert cap == 17
        QrSpec(version=1, ecc_level="L", payload=b"a" * cap)
        with pytest.raises(CapacityExceeded):
            QrSpec(version=1, ecc_level="L", payload=b"a" * (cap + 1))


class TestBuildMatrix:
    def test_side_and_finder_count(self):
        for version in (1, 2, 3, 4):
            m = build_matrix(QrSpec(version=version, ecc_level="M",
                                    payload=b"abc", mask_pattern=2))
            assert m.side == 17 + 4 * version
            assert int((m.function_map == Role.FINDER).sum()) == 147

    def test_timing_pattern_v1(self):
        m = build_matrix(QrSpec(version=1, ecc_level="L", payload=b"HELLO",
                                mask_pattern=0))
        row = m.function_map[6, :]
        cols = np.flatnonzero(row == Role.TIMING)
        assert cols.tolist() == [8, 9, 10, 11, 12]
        col = m.function_map[:, 6]
        rows = np.flatnonzero(col == Role.TIMING)
        assert rows.tolist() == [8, 9, 10, 11, 12]
        # alternation starts dark at index 8
        assert m.modules[6, 8:13].tolist() == [1, 0, 1, 0, 1]
        assert m.modules[8:13, 6].tolist() == [1, 0, 1, 0, 1]

    def test_function_layout_invariant_across_masks(self):
        specs = [QrSpec(version=2, ecc_level="Q", payload=b"data",
                        mask_pattern=p) for p in range(8)]
        matrices = [build_matrix(s) for s in specs]
        base = matrices[0].function_map
        for m in matrices[1:]:
            assert np.array_equal(m.function_map, base)
        # function-pattern modules (all but data and format) identical too
        fixed = (base != Role.DATA) & (base != Role.FORMAT)
        for m in matrices[1:]:
            assert np.array_equal(m.modules[fixed], matrices[0].modules[fixed])

    def test_format_modules_encode_selected_mask(self):
        for pattern in (0, 3, 6):
            m = build_matrix(QrSpec(version=1, ecc_level="H",
                                    payload=b"zz", mask_pattern=pattern))
            bits = format_bits("H", pattern)
            got = 0
            for i in range(15):
                if i < 6:
                    r, c = i, 8
                elif i == 6:
                    r, c = 7, 8
                elif i == 7:
                    r, c = 8, 8
                elif i == 8:
                    r, c = 8, 7
                else:
                    r, c = 8, 14 - i
                got |= int(m.modules[r, c]) << i
            assert got == bits

    def test_alignment_only_above_v1(self):
        m1 = build_matrix(QrSpec(version=1, ecc_level="L", payload=b"a",
                                 mask_pattern=0))
        assert not (m1.function_map == Role.ALIGNMENT).any()
        for version in (2, 3, 4):
            m = build_matrix(QrSpec(version=version, ecc_level="L",
                                    payload=b"a", mask_pattern=0))
            assert int((m.function_map == Role.ALIGNMENT).sum()) == 25
            center = 4 * version + 10
            assert m.function_map[center, center] == Role.ALIGNMENT
            assert m.modules[center, center] == 1

    def test_auto_mask_selection_deterministic(self):
        spec = QrSpec(version=1, ecc_level="L", payload=b"HELLO")
        a = build_matrix(spec)
        b = build_matrix(spec)
        assert a.mask_pattern == b.mask_pattern
        assert np.array_equal(a.modules, b.modules)
        assert 0 <= a.mask_pattern <= 7

    def test_dark_module(self):
        for version in (1, 4):
            m = build_matrix(QrSpec(version=version, ecc_level="M",
                                    payload=b"q", mask_pattern=1))
            assert m.modules[m.side - 8, 8] == 1


@pytest.mark.parametrize("version,level", [(1, "L"), (2, "M"), (3, "Q"), (4, "H")])
def test_symbols_decode_with_opencv(version, level):
    cv2 = pytest.importorskip("cv2")
    payload = f"round trip {version}{level}".encode()
    m = build_matrix(QrSpec(version=version, ecc_level=level, payload=payload))
    quiet = 4
    canvas = np.full((m.side + 2 * quiet,) * 2, 255, np.uint8)
    canvas[quiet:quiet + m.side, quiet:quiet + m.side] = \
        np.where(m.modules, 0, 255)
    img = np.repeat(np.repeat(canvas, 8, axis=0), 8, axis=1)
    detector = (cv2.QRCodeDetectorAruco() if hasattr(cv2, "QRCodeDetectorAruco")
                else cv2.QRCodeDetector())
    data, _, _ = detector.detectAndDecode(img)
    assert data == payload.decode()
