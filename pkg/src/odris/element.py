"""Physical element states and codebooks.

A :class:`Codebook` maps the phase ordinal of a code to a
:class:`PhaseProfile` on each side of the surface and the coefficient
ordinal to a transition coefficient.  Codebooks are either generated on a
uniform (theta, phi) grid or loaded from a mapping table.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .codec import Code, Mode, decode, encode
from .errors import CodebookError, CodebookMismatchError, DomainError, MalformedCodeError
from .geometry import HalfSpace, direction_from_profile, directions

# Two codebook entries whose angular errors differ by less than this are tied.
TIE_TOL = 1e-12

_SIDE_OF_MODE = {Mode.REFLECT: (HalfSpace.INCIDENT,), Mode.REFRACT: (HalfSpace.TRANSMIT,),
                 Mode.BOTH: (HalfSpace.INCIDENT, HalfSpace.TRANSMIT), Mode.OFF: ()}


@dataclass(frozen=True)
class PhaseProfile:
    """Signed emerging-ray angles in degrees, both strictly inside (-90, 90)."""

    theta_deg: float
    phi_deg: float

    def __post_init__(self):
        for name in ("theta_deg", "phi_deg"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not -90.0 < v < 90.0:
                raise DomainError(name, f"must lie strictly inside (-90, 90), got {v!r}")

    def __str__(self):
        return f"({self.theta_deg:g}, {self.phi_deg:g})"


@dataclass(frozen=True)
class ElementState:
    mode: Mode
    reflect_profile: Optional[PhaseProfile] = None
    refract_profile: Optional[PhaseProfile] = None
    R: float = 0.0
    T: float = 0.0

    def __post_init__(self):
        R, T, m = self.R, self.T, self.mode
        if not (0.0 <= R <= 1.0 and 0.0 <= T <= 1.0):
            raise DomainError("R/T", f"coefficients must lie in [0, 1], got R={R}, T={T}")
        ok = {
            Mode.OFF: R == 0 and T == 0 and self.reflect_profile is None
            and self.refract_profile is None,
            Mode.REFLECT: T == 0 and R > 0 and self.reflect_profile is not None,
            Mode.REFRACT: R == 0 and T > 0 and self.refract_profile is not None,
            Mode.BOTH: R + T == 1.0 and self.reflect_profile is not None
            and self.refract_profile is not None,
        }[m]
        if not ok:
            raise DomainError("state", f"inconsistent {m.label} state: R={R}, T={T}")

    def profile_for(self, side: HalfSpace) -> Optional[PhaseProfile]:
        return self.reflect_profile if side is HalfSpace.INCIDENT else self.refract_profile

    def coefficient_for(self, side: HalfSpace) -> float:
        return self.R if side is HalfSpace.INCIDENT else self.T

    def csv_row(self, element_id) -> list:
        r, t = self.reflect_profile, self.refract_profile
        return [
            element_id, self.mode.label,
            "" if r is None else r.theta_deg, "" if r is None else r.phi_deg,
            "" if t is None else t.theta_deg, "" if t is None else t.phi_deg,
            self.R, self.T,
        ]


OFF_STATE = ElementState(Mode.OFF)
STATE_CSV_HEADER = ["element_id", "mode", "theta_r", "phi_r", "theta_t", "phi_t", "R", "T"]


def states_to_csv(states: Iterable[Tuple[object, ElementState]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATE_CSV_HEADER)
    for element_id, state in states:
        w.writerow(state.csv_row(element_id))
    return buf.getvalue()


@dataclass(frozen=True)
class Codebook:
    """Phase profiles per side and coefficient levels for ``k``-bit codes.

    ``reflect_entries`` and ``refract_entries`` each hold ``2**k`` slots
    indexed by phase ordinal.  A generated grid fills every slot; a loaded
    table may leave slots it does not define as ``None``.
    """

    k: int
    reflect_entries: Tuple[Optional[PhaseProfile], ...]
    refract_entries: Tuple[Optional[PhaseProfile], ...]
    coeff_levels: Tuple[float, ...]
    source: str = "grid"

    def __post_init__(self):
        n = 1 << self.k
        for name in ("reflect_entries", "refract_entries", "coeff_levels"):
            if len(getattr(self, name)) != n:
                raise CodebookError(f"{name}: expected {n} slots, got {len(getattr(self, name))}")
        levels = self.coeff_levels
        if any(not 0.0 < c <= 1.0 for c in levels):
            raise CodebookError("coeff_levels must lie in (0, 1]")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise CodebookError("coeff_levels must be strictly increasing")

    @property
    def size(self) -> int:
        return 1 << self.k

    def entries(self, side: HalfSpace) -> Tuple[Optional[PhaseProfile], ...]:
        return self.reflect_entries if side is HalfSpace.INCIDENT else self.refract_entries

    def populated(self, side: HalfSpace) -> List[int]:
        return [i for i, p in enumerate(self.entries(side)) if p is not None]

    @cached_property
    def _direction_tables(self) -> Dict[HalfSpace, Tuple[np.ndarray, np.ndarray]]:
        out = {}
        for side in HalfSpace:
            idx = np.array(self.populated(side), dtype=int)
            ents = self.entries(side)
            th = np.array([ents[i].theta_deg for i in idx], dtype=float)
            ph = np.array([ents[i].phi_deg for i in idx], dtype=float)
            out[side] = (idx, directions(th, ph, side.sign).reshape(len(idx), 3))
        return out

    def entry_directions(self, side: HalfSpace) -> Tuple[np.ndarray, np.ndarray]:
        """``(ordinals, unit directions)`` of the populated slots on ``side``."""
        return self._direction_tables[side]

    def to_rows(self) -> List[dict]:
        """Serialise as mapping-table rows.

        Slots populated identically on both sides are written as a single
        Both-mode row; row ``i`` carries phase ordinal ``i`` and
        coefficient ordinal ``i`` so that every level survives a reload.
        """
        rows = []
        top = self.size - 1
        for i in range(self.size):
            r, t = self.reflect_entries[i], self.refract_entries[i]
            if r is not None and r == t:
                rows.append(_row(Mode.BOTH, i, i, self.k, r, self.coeff_levels[i]))
                continue
            if r is not None:
                rows.append(_row(Mode.REFLECT, i, top, self.k, r, self.coeff_levels[top]))
            if t is not None:
                rows.append(_row(Mode.REFRACT, i, top, self.k, t, self.coeff_levels[top]))
        return rows

    def to_json(self) -> str:
        return json.dumps(self.to_rows(), indent=2) + "\n"


def _row(mode, phase, coeff, k, profile, level):
    return {
        "code": encode(mode, phase, coeff, k).bits,
        "mode": mode.label,
        "theta_deg": profile.theta_deg,
        "phi_deg": profile.phi_deg,
        "coeff": level,
    }


def uniform_levels(k: int) -> Tuple[float, ...]:
    n = 1 << k
    return tuple((j + 1) / n for j in range(n))


def _cell_midpoints(span, n):
    lo, hi = span
    w = (hi - lo) / n
    return [lo + (i + 0.5) * w for i in range(n)]


def codebook_grid(k: int, theta_span=(-60.0, 60.0), phi_span=(-60.0, 60.0)) -> Codebook:
    """Uniform grid codebook.

    Theta gets ``ceil(k/2)`` bits and phi ``floor(k/2)``; entries sit at the
    cell midpoints of each span and ordinals run over ``(theta, phi)`` in
    lexicographic order.  The same grid serves both sides.  Coefficient
    level ``j`` is ``(j + 1) / 2**k``; zero is left to the Off mode.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 2:
        raise DomainError("k", "grid codebooks need k >= 2; load 1-bit codebooks from a table")
    if k > 16:
        raise DomainError("k", f"must be <= 16, got {k}")
    for name, (lo, hi) in (("theta_span", theta_span), ("phi_span", phi_span)):
        if not -90.0 <= lo < hi <= 90.0:
            raise DomainError(name, f"need -90 <= lo < hi <= 90, got ({lo}, {hi})")
    thetas = _cell_midpoints(theta_span, 1 << ((k + 1) // 2))
    phis = _cell_midpoints(phi_span, 1 << (k // 2))
    entries = tuple(PhaseProfile(t, p) for t in thetas for p in phis)
    return Codebook(k, entries, entries, uniform_levels(k), "grid")


def _as_float(row, key, where):
    v = row.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise CodebookError(f"{where}.{key}: expected a finite number, got {v!r}")
    return float(v)


def codebook_from_table(rows: Sequence[Mapping]) -> Codebook:
    """Build a codebook from mapping-table rows.

    Each row is ``{code, mode, theta_deg, phi_deg, coeff}``.  A row fills the
    phase slot of its code on the side(s) its mode emits to, and pins the
    coefficient level of its coefficient ordinal.  Levels no row mentions
    keep the uniform default.

    Raises:
        CodebookError: empty table, mixed code lengths, duplicate codes,
            a mode column disagreeing with the mode bits, conflicting
            entries, Off rows, or a per-mode row count that is not a power
            of two.
    """
    if not rows:
        raise CodebookError("table is empty")
    seen = set()
    k = None
    per_mode: Dict[Mode, int] = {}
    slots: Dict[HalfSpace, Dict[int, PhaseProfile]] = {s: {} for s in HalfSpace}
    levels: Dict[int, float] = {}
    for i, row in enumerate(rows):
        where = f"rows[{i}]"
        if not isinstance(row, Mapping):
            raise CodebookError(f"{where}: expected an object")
        bits = row.get("code")
        try:
            code = decode(bits)
        except MalformedCodeError as exc:
            raise CodebookError(f"{where}.code: {exc}") from None
        if bits in seen:
            raise CodebookError(f"{where}.code: duplicate code {bits}")
        seen.add(bits)
        if k is None:
            k = code.k
        elif code.k != k:
            raise CodebookError(f"{where}.code: length {len(bits)} differs from {2 * (k + 1)}")
        if "mode" in row:
            try:
                named = Mode.from_label(str(row["mode"]))
            except DomainError:
                raise CodebookError(f"{where}.mode: unknown mode {row['mode']!r}") from None
            if named is not code.mode:
                raise CodebookError(f"{where}.mode: {named.label} contradicts mode bits {code.mode.bits}")
        if code.mode is Mode.OFF:
            raise CodebookError(f"{where}: Off codes carry no profile and cannot be table rows")
        per_mode[code.mode] = per_mode.get(code.mode, 0) + 1
        try:
            prof = PhaseProfile(_as_float(row, "theta_deg", where), _as_float(row, "phi_deg", where))
        except DomainError as exc:
            raise CodebookError(f"{where}.{exc.field}: {exc}") from None
        for side in _SIDE_OF_MODE[code.mode]:
            prev = slots[side].get(code.phase_ordinal)
            if prev is not None and prev != prof:
                raise CodebookError(f"{where}: conflicting profile for phase ordinal {code.phase_ordinal}")
            slots[side][code.phase_ordinal] = prof
        if "coeff" in row:
            c = _as_float(row, "coeff", where)
            prev = levels.get(code.coeff_ordinal)
            if prev is not None and prev != c:
                raise CodebookError(f"{where}.coeff: conflicting level for coefficient ordinal {code.coeff_ordinal}")
            levels[code.coeff_ordinal] = c
    for mode, count in per_mode.items():
        if count & (count - 1):
            raise CodebookError(f"{mode.label}: row count {count} is not a power of two")
    n = 1 << k
    coeffs = list(uniform_levels(k))
    for j, c in levels.items():
        coeffs[j] = c
    return Codebook(
        k,
        tuple(slots[HalfSpace.INCIDENT].get(i) for i in range(n)),
        tuple(slots[HalfSpace.TRANSMIT].get(i) for i in range(n)),
        tuple(coeffs),
        "table",
    )


def load_codebook(path) -> Codebook:
    with open(path, encoding="utf-8") as fh:
        try:
            rows = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CodebookError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(rows, list):
        raise CodebookError(f"{path}: expected a JSON array of rows")
    return codebook_from_table(rows)


def apply_code(code: Code, book: Codebook) -> ElementState:
    """Decoded physical state of an element driven by ``code``.

    Both-mode elements read the same phase ordinal on each side and split
    the coefficient level as ``T = level``, ``R = 1 - T``.

    Raises:
        CodebookMismatchError: ``code.k != book.k`` or the code addresses a
            phase slot the codebook leaves empty.
    """
    if code.k != book.k:
        raise CodebookMismatchError(f"code has k={code.k} but codebook has k={book.k}")
    mode = code.mode
    if mode is Mode.OFF:
        return OFF_STATE
    ordinal = code.phase_ordinal
    profiles = {}
    for side in _SIDE_OF_MODE[mode]:
        p = book.entries(side)[ordinal]
        if p is None:
            raise CodebookMismatchError(
                f"codebook has no {'reflect' if side is HalfSpace.INCIDENT else 'refract'} "
                f"entry for phase ordinal {ordinal}"
            )
        profiles[side] = p
    level = book.coeff_levels[code.coeff_ordinal]
    if mode is Mode.REFLECT:
        return ElementState(mode, reflect_profile=profiles[HalfSpace.INCIDENT], R=level)
    if mode is Mode.REFRACT:
        return ElementState(mode, refract_profile=profiles[HalfSpace.TRANSMIT], T=level)
    return ElementState(
        mode,
        reflect_profile=profiles[HalfSpace.INCIDENT],
        refract_profile=profiles[HalfSpace.TRANSMIT],
        R=1.0 - level,
        T=level,
    )


def nearest_ordinals(dirs, book: Codebook, side: HalfSpace) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest populated codebook slot for each row of ``dirs`` (shape ``(n, 3)``).

    Returns ``(ordinals, angular errors in radians)``.  Ties within
    ``TIE_TOL`` go to the lowest ordinal.
    """
    idx, table = book.entry_directions(side)
    if len(idx) == 0:
        raise CodebookMismatchError(f"codebook has no entries on the {side.name.lower()} side")
    dots = np.clip(np.asarray(dirs, dtype=float) @ table.T, -1.0, 1.0)
    err = np.arccos(dots)
    best = err.min(axis=1, keepdims=True)
    # populated ordinals are ascending, so the first column within tolerance wins
    pick = np.argmax(err <= best + TIE_TOL, axis=1)
    rows = np.arange(len(pick))
    return idx[pick], err[rows, pick]


def quantize_profile(target: PhaseProfile, book: Codebook,
                     side: HalfSpace = HalfSpace.INCIDENT) -> Tuple[int, PhaseProfile]:
    """Codebook entry on ``side`` whose emerging ray is closest to ``target``'s."""
    d = direction_from_profile(target, side)
    ords, _ = nearest_ordinals(d[None, :], book, side)
    o = int(ords[0])
    return o, book.entries(side)[o]
