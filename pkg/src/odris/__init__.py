"""Simulator and library for omni-digital reconfigurable intelligent surfaces.

Elements of an omni-DRIS reflect, refract, do both or stay off, each
driven by a ``2(k+1)``-bit control code.
"""

from .codec import Code, Mode, code_number, decode, encode, enumerate_codes, gray_decode, gray_encode
from .element import (Codebook, ElementState, PhaseProfile, apply_code, codebook_from_table, codebook_grid,
                      quantize_profile)
from .geometry import (HalfSpace, aim_profile, angular_error, direction_from_profile, profile_from_direction,
                       specular_direction)
from .scene import Scene, Source, SurfaceLayout, User, assign_codes, design_example_fixture, retarget

__all__ = [
    "Code", "Mode", "code_number", "decode", "encode", "enumerate_codes", "gray_decode", "gray_encode",
    "Codebook", "ElementState", "PhaseProfile", "apply_code", "codebook_from_table", "codebook_grid",
    "quantize_profile", "HalfSpace", "aim_profile", "angular_error", "direction_from_profile",
    "profile_from_direction", "specular_direction", "Scene", "Source", "SurfaceLayout", "User",
    "assign_codes", "design_example_fixture", "retarget",
]
