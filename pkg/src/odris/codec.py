"""Element control codes.

A code is a bit string made of three blocks, most-significant bit first::

    a1 a2 | b1 ... bk | c1 ... ck
     mode    phase      coefficient

The mode block selects the physical process of the element, the two
k-bit blocks carry reflected-binary Gray codewords indexing the phase
profile and the transition coefficient.  The serialized length is always
``2 * (k + 1)``.
"""

from __future__ import annotations

import enum
import gc
import itertools
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from .errors import DomainError, MalformedCodeError

MAX_K = 16
MAX_ENUM_K = 8


class Mode(enum.Enum):
    """Element mode, keyed by its two-bit symbol."""

    OFF = "00"
    REFLECT = "01"
    REFRACT = "10"
    BOTH = "11"

    @property
    def bits(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_bits(cls, bits: str) -> "Mode":
        try:
            return cls(bits)
        except ValueError:
            raise MalformedCodeError(f"invalid mode block {bits!r}") from None

    @classmethod
    def from_label(cls, name: str) -> "Mode":
        """Parse ``Reflect``, ``refract``, ``BOTH``, ``off`` or a two-bit symbol."""
        key = name.strip()
        if key in _BY_BITS:
            return _BY_BITS[key]
        for mode, label in _LABELS.items():
            if label.lower() == key.lower():
                return mode
        raise DomainError("mode", f"unknown mode {name!r}")

    def __str__(self) -> str:
        return self.label


_LABELS = {
    Mode.OFF: "Off",
    Mode.REFLECT: "Reflect",
    Mode.REFRACT: "Refract",
    Mode.BOTH: "Both",
}
_BY_BITS = {m.value: m for m in Mode}

# Enumeration order of the mode blocks.
MODE_ORDER = (Mode.REFLECT, Mode.REFRACT, Mode.BOTH, Mode.OFF)


def _check_k(k, upper=MAX_K):
    if isinstance(k, bool) or not isinstance(k, int) or not 1 <= k <= upper:
        raise DomainError("k", f"must be an integer in [1, {upper}], got {k!r}")


def _check_ordinal(field, ordinal, k):
    if isinstance(ordinal, bool) or not isinstance(ordinal, int):
        raise DomainError(field, f"must be an integer, got {ordinal!r}")
    if not 0 <= ordinal < (1 << k):
        raise DomainError(field, f"{ordinal} outside [0, {1 << k}) for k={k}")


def _check_bits(bits, what="bits"):
    if not isinstance(bits, str) or any(ch not in "01" for ch in bits):
        raise MalformedCodeError(f"{what} must contain only '0' and '1', got {bits!r}")


def gray_encode(ordinal: int, k: int) -> str:
    """Return the k-bit reflected Gray codeword of ``ordinal`` (MSB first)."""
    _check_k(k)
    _check_ordinal("ordinal", ordinal, k)
    return format(ordinal ^ (ordinal >> 1), f"0{k}b")


def gray_decode(bits: str) -> int:
    """Inverse of :func:`gray_encode`."""
    _check_bits(bits)
    if not bits:
        raise MalformedCodeError("empty Gray codeword")
    # prefix XOR: b_i = g_0 ^ ... ^ g_i
    out = 0
    acc = 0
    for ch in bits:
        acc ^= ch == "1"
        out = (out << 1) | acc
    return out


@dataclass(frozen=True, slots=True)
class Code:
    """One control code.

    ``phase_index`` and ``coeff_index`` are the raw Gray codewords.  Off
    codes may carry any payload; :func:`encode` emits zeros for them.
    """

    k: int
    mode: Mode
    phase_index: str
    coeff_index: str

    def __post_init__(self):
        _check_k(self.k)
        if not isinstance(self.mode, Mode):
            raise DomainError("mode", f"expected Mode, got {self.mode!r}")
        for name in ("phase_index", "coeff_index"):
            block = getattr(self, name)
            _check_bits(block, name)
            if len(block) != self.k:
                raise DomainError(name, f"expected {self.k} bits, got {len(block)}")

    @property
    def bits(self) -> str:
        return self.mode.bits + self.phase_index + self.coeff_index

    @property
    def phase_ordinal(self) -> int:
        return gray_decode(self.phase_index)

    @property
    def coeff_ordinal(self) -> int:
        return gray_decode(self.coeff_index)

    @classmethod
    def _trusted(cls, k, mode, phase_index, coeff_index) -> "Code":
        # skips validation; callers guarantee well-formed blocks
        obj = object.__new__(cls)
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "mode", mode)
        object.__setattr__(obj, "phase_index", phase_index)
        object.__setattr__(obj, "coeff_index", coeff_index)
        return obj

    def __len__(self) -> int:
        return 2 * (self.k + 1)

    def __str__(self) -> str:
        return self.bits


def encode(mode: Mode, phase_ordinal: int, coeff_ordinal: int, k: int) -> Code:
    """Build the code for ``mode`` with Gray-coded phase and coefficient blocks.

    Raises:
        DomainError: ``k`` outside [1, 16] or an ordinal outside [0, 2**k).
    """
    _check_k(k)
    if not isinstance(mode, Mode):
        mode = Mode.from_label(mode)
    _check_ordinal("phase_ordinal", phase_ordinal, k)
    _check_ordinal("coeff_ordinal", coeff_ordinal, k)
    if mode is Mode.OFF:
        phase_ordinal = coeff_ordinal = 0
    return Code(k, mode, gray_encode(phase_ordinal, k), gray_encode(coeff_ordinal, k))


def decode(bits: str) -> Code:
    """Parse a serialized code; ``k`` is inferred as ``len(bits) / 2 - 1``."""
    _check_bits(bits)
    n = len(bits)
    if n < 4 or n % 2:
        raise MalformedCodeError(
            f"code length must be even and >= 4, got {n} ({'odd' if n % 2 else 'too short'})"
        )
    k = n // 2 - 1
    if k > MAX_K:
        raise MalformedCodeError(f"code length {n} exceeds the {2 * (MAX_K + 1)}-bit maximum")
    return Code(k, Mode.from_bits(bits[:2]), bits[2 : 2 + k], bits[2 + k :])


def enumerate_codes(
    k: int,
    modes: Optional[Iterable[Mode]] = None,
    coeff_ordinal: Optional[int] = None,
) -> List[Code]:
    """List every code for ``k`` in canonical order.

    Mode blocks come in the order 01, 10, 11, 00; inside a mode the phase
    ordinal is the major key and the coefficient ordinal the minor key.
    ``modes`` keeps only the given modes (canonical order is preserved) and
    ``coeff_ordinal`` pins the coefficient block, which gives the
    one-row-per-phase tables used for code-number addressing.
    """
    _check_k(k, MAX_ENUM_K)
    wanted = set(MODE_ORDER if modes is None else modes)
    if coeff_ordinal is None:
        coeffs: Sequence[int] = range(1 << k)
    else:
        _check_ordinal("coeff_ordinal", coeff_ordinal, k)
        coeffs = (coeff_ordinal,)
    words = [gray_encode(i, k) for i in range(1 << k)]
    make = Code._trusted
    # codes hold no references to containers, so cyclic GC passes over the
    # bulk allocation are wasted work
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return [
            make(k, mode, words[p], words[c])
            for mode in MODE_ORDER
            if mode in wanted
            for p, c in itertools.product(range(1 << k), coeffs)
        ]
    finally:
        if was_enabled:
            gc.enable()


def code_number(code: Code) -> int:
    """1-based row of ``code`` in its mapping table.

    A table lists one mode with the coefficient block held fixed, so rows
    run over phase ordinals: this equals the position of ``code`` in
    ``enumerate_codes(k, modes=[mode], coeff_ordinal=...)``.
    """
    return code.phase_ordinal + 1
