from .gf256 import generator_poly, gf_mul, rs_encode
from .matrix import (ECC_LEVELS, ModuleMatrix, QrSpec, Role, build_matrix,
                     byte_capacity, format_bits)
from .scene import SampleRecord, SceneParams, compose_scene, make_negative

__all__ = [
    "gf_mul", "generator_poly", "rs_encode",
    "QrSpec", "ModuleMatrix", "Role", "build_matrix", "format_bits",
    "byte_capacity", "ECC_LEVELS",
    "SceneParams", "SampleRecord", "compose_scene", "make_negative",
]
