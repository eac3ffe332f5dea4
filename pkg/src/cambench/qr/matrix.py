"""Standard-conformant QR module matrices for versions 1-4, byte mode.

Builds the full symbol: function patterns, BCH-protected format info,
Reed-Solomon coded payload, zigzag data placement, and mask selection by
the standard penalty rules (or a pinned pattern for reproducibility).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..errors import CapacityExceeded
from .gf256 import rs_encode

ECC_LEVELS = ("L", "M", "Q", "H")

# 2-bit ECC level indicator used by the format info
_ECC_BITS = {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}

# (version, level) -> (ecc bytes per block, data bytes per block list)
_BLOCKS = {
    (1, "L"): (7, [19]), (1, "M"): (10, [16]),
    (1, "Q"): (13, [13]), (1, "H"): (17, [9]),
    (2, "L"): (10, [34]), (2, "M"): (16, [28]),
    (2, "Q"): (22, [22]), (2, "H"): (28, [16]),
    (3, "L"): (15, [55]), (3, "M"): (26, [44]),
    (3, "Q"): (18, [17, 17]), (3, "H"): (22, [13, 13]),
    (4, "L"): (20, [80]), (4, "M"): (18, [32, 32]),
    (4, "Q"): (26, [24, 24]), (4, "H"): (16, [9, 9, 9, 9]),
}

_REMAINDER_BITS = {1: 0, 2: 7, 3: 7, 4: 7}

_FORMAT_GEN = 0x537   # BCH(15,5) generator polynomial
_FORMAT_XOR = 0x5412  # fixed mask applied to the 15 format bits

_FINDER = np.array([
    [1, 1, 1, 1, 1, 1, 1],
    [1, 0, 0, 0, 0, 0, 1],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1],
], dtype=np.uint8)

_ALIGNMENT = np.array([
    [1, 1, 1, 1, 1],
    [1, 0, 0, 0, 1],
    [1, 0, 1, 0, 1],
    [1, 0, 0, 0, 1],
    [1, 1, 1, 1, 1],
], dtype=np.uint8)

_MASK_RULES = (
    lambda i, j: (i + j) % 2 == 0,
    lambda i, j: i % 2 == 0,
    lambda i, j: j % 3 == 0,
    lambda i, j: (i + j) % 3 == 0,
    lambda i, j: (i // 2 + j // 3) % 2 == 0,
    lambda i, j: (i * j) % 2 + (i * j) % 3 == 0,
    lambda i, j: ((i * j) % 2 + (i * j) % 3) % 2 == 0,
    lambda i, j: ((i * j) % 3 + (i + j) % 2) % 2 == 0,
)


class Role(IntEnum):
    DATA = 0
    FINDER = 1
    SEPARATOR = 2
    TIMING = 3
    ALIGNMENT = 4
    FORMAT = 5
    QUIET = 6  # used by scene rendering, never inside the matrix


def byte_capacity(version: int, ecc_level: str) -> int:
    """Maximum byte-mode payload length for a version/level."""
    ecc, data_lens = _BLOCKS[(version, ecc_level)]
    return sum(data_lens) - 2  # 4-bit mode + 8-bit count + terminator


@dataclass(frozen=True)
class QrSpec:
    version: int
    ecc_level: str
    payload: bytes
    mask_pattern: int | None = None  # None = select by penalty rules

    def __post_init__(self):
        if self.version not in (1, 2, 3, 4):
            raise ValueError(f"version {self.version} outside 1..4")
        if self.ecc_level not in ECC_LEVELS:
            raise ValueError(f"ecc_level {self.ecc_level!r} not in {ECC_LEVELS}")
        if self.mask_pattern is not None and not 0 <= self.mask_pattern <= 7:
            raise ValueError(f"mask_pattern {self.mask_pattern} outside 0..7")
        if len(self.payload) > byte_capacity(self.version, self.ecc_level):
            raise CapacityExceeded(
                f"{len(self.payload)} bytes > capacity "
                f"{byte_capacity(self.version, self.ecc_level)} for "
                f"version {self.version}-{self.ecc_level}")

    @property
    def side(self) -> int:
        return 17 + 4 * self.version

    def to_dict(self) -> dict:
        import base64
        return {
            "version": self.version,
            "ecc_level": self.ecc_level,
            "mask_pattern": self.mask_pattern,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
        }


@dataclass(frozen=True)
class ModuleMatrix:
    side: int
    modules: np.ndarray       # uint8, dark = 1
    function_map: np.ndarray  # uint8 of Role values
    mask_pattern: int
    spec: QrSpec


def format_bits(ecc_level: str, mask_pattern: int) -> int:
    """15-bit format info: BCH(15,5)-coded (level, mask), XOR 0x5412."""
    data5 = (_ECC_BITS[ecc_level] << 3) | mask_pattern
    d = data5 << 10
    for shift in range(4, -1, -1):
        if d & (1 << (shift + 10)):
            d ^= _FORMAT_GEN << shift
    return ((data5 << 10) | d) ^ _FORMAT_XOR


def encode_codewords(spec: QrSpec) -> bytes:
    """Byte-mode payload -> final interleaved data+ECC codeword stream."""
    ecc_count, data_lens = _BLOCKS[(spec.version, spec.ecc_level)]
    total_data = sum(data_lens)

    bits: list[int] = []

    def put(value: int, width: int) -> None:
        for b in range(width - 1, -1, -1):
            bits.append((value >> b) & 1)

    put(0b0100, 4)                 # byte mode
    put(len(spec.payload), 8)      # 8-bit count for versions 1..9
    for byte in spec.payload:
        put(byte, 8)
    put(0, min(4, total_data * 8 - len(bits)))  # terminator
    while len(bits) % 8:
        bits.append(0)
    data = bytearray()
    for i in range(0, len(bits), 8):
        byte = 0
        for b in bits[i:i + 8]:
            byte = (byte << 1) | b
        data.append(byte)
    pad = (0xEC, 0x11)
    for i in range(total_data - len(data)):
        data.append(pad[i % 2])

    blocks = []
    offset = 0
    for length in data_lens:
        blocks.append(bytes(data[offset:offset + length]))
        offset += length
    ecc_blocks = [rs_encode(block, ecc_count) for block in blocks]

    out = bytearray()
    for i in range(max(data_lens)):
        for block in blocks:
            if i < len(block):
                out.append(block[i])
    for i in range(ecc_count):
        for block in ecc_blocks:
            out.append(block[i])
    return bytes(out)


def _place_function_patterns(side: int, version: int):
    modules = np.zeros((side, side), dtype=np.uint8)
    roles = np.full((side, side), Role.DATA, dtype=np.uint8)

    for r0, c0 in ((0, 0), (0, side - 7), (side - 7, 0)):
        modules[r0:r0 + 7, c0:c0 + 7] = _FINDER
        roles[r0:r0 + 7, c0:c0 + 7] = Role.FINDER

    # separators: the light single-module strip between finder and symbol
    roles[7, 0:8] = Role.SEPARATOR
    roles[0:8, 7] = Role.SEPARATOR
    roles[7, side - 8:side] = Role.SEPARATOR
    roles[0:8, side - 8] = Role.SEPARATOR
    roles[side - 8, 0:8] = Role.SEPARATOR
    roles[side - 8:side, 7] = Role.SEPARATOR

    for k in range(8, side - 8):
        dark = 1 - (k % 2)
        modules[6, k] = dark
        roles[6, k] = Role.TIMING
        modules[k, 6] = dark
        roles[k, 6] = Role.TIMING

    if version >= 2:
        c = 4 * version + 10
        modules[c - 2:c + 3, c - 2:c + 3] = _ALIGNMENT
        roles[c - 2:c + 3, c - 2:c + 3] = Role.ALIGNMENT

    # reserve format info positions plus the fixed dark module
    for r, c in _format_positions(side):
        roles[r, c] = Role.FORMAT
    roles[side - 8, 8] = Role.FORMAT
    modules[side - 8, 8] = 1

    return modules, roles


def _format_positions(side: int):
    """(row, col) per bit index 0..14, first copy then second copy."""
    copy_a = []
    for i in range(15):
        if i < 6:
            copy_a.append((i, 8))
        elif i == 6:
            copy_a.append((7, 8))
        elif i == 7:
            copy_a.append((8, 8))
        elif i == 8:
            copy_a.append((8, 7))
        else:
            copy_a.append((8, 14 - i))
    copy_b = []
    for i in range(15):
        if i < 8:
            copy_b.append((8, side - 1 - i))
        else:
            copy_b.append((side - 15 + i, 8))
    return copy_a + copy_b


def _write_format(modules: np.ndarray, side: int, ecc_level: str,
                  mask_pattern: int) -> None:
    bits15 = format_bits(ecc_level, mask_pattern)
    positions = _format_positions(side)
    for i in range(15):
        bit = (bits15 >> i) & 1
        for r, c in (positions[i], positions[15 + i]):
            modules[r, c] = bit
    modules[side - 8, 8] = 1


def _data_positions(roles: np.ndarray, side: int) -> list[tuple[int, int]]:
    """Zigzag order over non-function modules: two-column bands from the
    right edge, alternating upward/downward, skipping column 6."""
    positions = []
    col = side - 1
    upward = True
    while col > 0:
        if col == 6:
            col -= 1
        rows = range(side - 1, -1, -1) if upward else range(side)
        for r in rows:
            for c in (col, col - 1):
                if roles[r, c] == Role.DATA:
                    positions.append((r, c))
        upward = not upward
        col -= 2
    return positions


def _penalty(modules: np.ndarray) -> int:
    """Standard mask-evaluation penalty (rules N1-N4)."""
    side = modules.shape[0]
    score = 0
    for grid in (modules, modules.T):
        for line in grid:
            run = 1
            for k in range(1, side):
                if line[k] == line[k - 1]:
                    run += 1
                else:
                    if run >= 5:
                        score += 3 + run - 5
                    run = 1
            if run >= 5:
                score += 3 + run - 5

    blocks = (modules[:-1, :-1] == modules[1:, :-1]) \
        & (modules[:-1, :-1] == modules[:-1, 1:]) \
        & (modules[:-1, :-1] == modules[1:, 1:])
    score += 3 * int(blocks.sum())

    pat_a = np.array([1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0], dtype=np.uint8)
    pat_b = pat_a[::-1]
    for grid in (modules, modules.T):
        for line in grid:
            for k in range(side - 10):
                window = line[k:k + 11]
                if np.array_equal(window, pat_a) or np.array_equal(window, pat_b):
                    score += 40

    dark_pct = 100.0 * modules.sum() / modules.size
    score += 10 * int(abs(dark_pct - 50.0) / 5.0)
    return score


def build_matrix(spec: QrSpec) -> ModuleMatrix:
    """Assemble the complete module matrix for a QrSpec.

    If spec.mask_pattern is None all eight masks are scored with the
    standard penalty rules and the lowest-penalty (lowest index on ties)
    wins.
    """
    side = spec.side
    codewords = encode_codewords(spec)
    base_modules, roles = _place_function_patterns(side, spec.version)
    positions = _data_positions(roles, side)

    bits = []
    for byte in codewords:
        for b in range(7, -1, -1):
            bits.append((byte >> b) & 1)
    bits.extend([0] * _REMAINDER_BITS[spec.version])
    if len(bits) != len(positions):
        raise AssertionError(
            f"bitstream {len(bits)} != data positions {len(positions)}")

    def masked(pattern: int) -> np.ndarray:
        rule = _MASK_RULES[pattern]
        modules = base_modules.copy()
        for (r, c), bit in zip(positions, bits):
            modules[r, c] = bit ^ (1 if rule(r, c) else 0)
        _write_format(modules, side, spec.ecc_level, pattern)
        return modules

    if spec.mask_pattern is not None:
        pattern = spec.mask_pattern
        modules = masked(pattern)
    else:
        scored = [(_penalty(masked(p)), p) for p in range(8)]
        _, pattern = min(scored)  # ties resolve to the lowest index
        modules = masked(pattern)

    return ModuleMatrix(side=side, modules=modules, function_map=roles,
                        mask_pattern=pattern, spec=spec)
