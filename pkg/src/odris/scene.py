"""Scenes: a source, a surface grid and users on both sides of it.

:func:`assign_codes` pairs users with active elements and emits the code
each element needs to steer toward its user.  :func:`design_example_fixture`
builds the 16-element double-sided example with eight served users.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .codec import Code, Mode, encode
from .element import Codebook, PhaseProfile, codebook_from_table, codebook_grid, load_codebook, nearest_ordinals
from .errors import CapacityError, ConfigError, DomainError, UnknownUserError
from .geometry import HalfSpace, aim_profile, direction_from_profile

Vec3 = Tuple[float, float, float]


def _vec3(v, name) -> Vec3:
    try:
        x, y, z = (float(c) for c in v)
    except (TypeError, ValueError):
        raise DomainError(name, f"expected three numbers, got {v!r}") from None
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise DomainError(name, f"non-finite coordinate in {v!r}")
    return (x, y, z)


@dataclass(frozen=True)
class Room:
    """Axis-aligned room split by the surface plane z = 0 (metres)."""

    width: float = 5.0   # along x
    height: float = 3.0  # along y
    depth: float = 5.0   # along z, half on each side

    def contains(self, p) -> bool:
        x, y, z = p
        return (abs(x) <= self.width / 2 and abs(y) <= self.height / 2
                and abs(z) <= self.depth / 2)


@dataclass(frozen=True)
class Source:
    position: Vec3
    power_w: float = 1.0
    lambertian_order: float = 1.0
    normal: Vec3 = (0.0, 0.0, -1.0)

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "source.position"))
        n = _vec3(self.normal, "source.normal")
        if not any(n):
            raise DomainError("source.normal", "zero vector")
        object.__setattr__(self, "normal", n)
        if not self.power_w >= 0:
            raise DomainError("source.power_w", f"must be >= 0, got {self.power_w}")
        if not self.lambertian_order >= 1:
            raise DomainError("source.lambertian_order", f"must be >= 1, got {self.lambertian_order}")
        if self.position[2] == 0:
            raise DomainError("source.position", "source cannot lie on the surface plane")


@dataclass(frozen=True)
class User:
    id: str
    position: Vec3
    area_m2: float = 1e-4
    fov_deg: float = 90.0
    responsivity: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, f"user {self.id}.position"))
        if not self.area_m2 > 0:
            raise DomainError("area_m2", f"must be > 0, got {self.area_m2}")
        if not 0 < self.fov_deg <= 90:
            raise DomainError("fov_deg", f"must lie in (0, 90], got {self.fov_deg}")
        if not self.responsivity > 0:
            raise DomainError("responsivity", f"must be > 0, got {self.responsivity}")

    @property
    def side(self) -> HalfSpace:
        return HalfSpace.of(self.position[2])


@dataclass(frozen=True)
class SurfaceLayout:
    """``rows x cols`` square elements centred on ``center`` in the z = 0 plane.

    Elements are indexed row-major; row 0 is the top row (largest y),
    column 0 the left-most (smallest x).
    """

    rows: int
    cols: int
    element_side_m: float
    center: Vec3 = (0.0, 0.0, 0.0)
    active: Optional[Tuple[bool, ...]] = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError("layout", f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.element_side_m > 0:
            raise DomainError("element_side_m", f"must be > 0, got {self.element_side_m}")
        c = _vec3(self.center, "layout.center")
        if c[2] != 0:
            raise DomainError("layout.center", "surface must lie in z = 0")
        object.__setattr__(self, "center", c)
        act = (True,) * self.count if self.active is None else tuple(bool(a) for a in self.active)
        if len(act) != self.count:
            raise DomainError("layout.active", f"expected {self.count} flags, got {len(act)}")
        object.__setattr__(self, "active", act)

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def element_area_m2(self) -> float:
        return self.element_side_m ** 2

    def index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def cell(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.cols)

    def position(self, index: int) -> np.ndarray:
        r, c = self.cell(index)
        s = self.element_side_m
        cx, cy, _ = self.center
        return np.array([cx + (c - (self.cols - 1) / 2) * s, cy - (r - (self.rows - 1) / 2) * s, 0.0])

    def active_indices(self) -> List[int]:
        return [i for i, a in enumerate(self.active) if a]


@dataclass(frozen=True)
class Assignment:
    element: int
    user_id: str
    code: Code


@dataclass(frozen=True)
class Scene:
    source: Source
    users: Tuple[User, ...]
    layout: SurfaceLayout
    room: Room = field(default_factory=Room)
    assignments: Tuple[Assignment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        ids = [u.id for u in self.users]
        if len(set(ids)) != len(ids):
            raise DomainError("users", "duplicate user ids")
        for u in self.users:
            if u.position[2] == 0:
                raise DomainError(f"user {u.id}.position", "users cannot sit on the surface plane")

    def user(self, user_id: str) -> User:
        for u in self.users:
            if u.id == user_id:
                return u
        raise UnknownUserError(f"no user with id {user_id!r}")

    def assignment_for(self, element: int) -> Optional[Assignment]:
        for a in self.assignments:
            if a.element == element:
                return a
        return None

    def element_codes(self, k: int) -> List[str]:
        """Serialized code per element, Off codes for unserved elements."""
        off = encode(Mode.OFF, 0, 0, k).bits
        by_el = {a.element: a.code.bits for a in self.assignments}
        return [by_el.get(i, off) for i in range(self.layout.count)]


def _mode_for(side: HalfSpace) -> Mode:
    return Mode.REFLECT if side is HalfSpace.INCIDENT else Mode.REFRACT


def _steer(book: Codebook, element_pos, user_pos) -> Tuple[int, HalfSpace, float]:
    """(ordinal, side, pointing error) for one element/user pair."""
    prof, side = aim_profile(element_pos, user_pos)
    d = direction_from_profile(prof, side)
    ords, err = nearest_ordinals(d[None, :], book, side)
    return int(ords[0]), side, float(err[0])


def pairing_costs(scene: Scene, book: Codebook) -> np.ndarray:
    """Pointing error (rad) for every (user sorted by id, active element) pair."""
    users = sorted(scene.users, key=lambda u: u.id)
    elements = scene.layout.active_indices()
    cost = np.empty((len(users), len(elements)))
    for i, u in enumerate(users):
        for j, e in enumerate(elements):
            cost[i, j] = _steer(book, scene.layout.position(e), u.position)[2]
    return cost


PAIRING_TOL = 1e-12


def _min_total(cost: np.ndarray) -> float:
    if cost.shape[0] == 0:
        return 0.0
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def optimal_pairing(cost: np.ndarray) -> List[int]:
    """Column assigned to each row so that the summed cost is minimal.

    Among optimal pairings the lexicographically smallest column sequence
    wins: rows are fixed in order, each to the lowest column that still
    admits an optimal completion.
    """
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    target = _min_total(cost)
    tol = PAIRING_TOL * max(1, n_rows)
    out: List[int] = []
    free = list(range(n_cols))
    spent = 0.0
    for i in range(n_rows):
        rest = cost[i + 1:]
        for c in free:
            cols = [f for f in free if f != c]
            if spent + cost[i, c] + _min_total(rest[:, cols]) <= target + tol:
                out.append(c)
                free.remove(c)
                spent += cost[i, c]
                break
        else:  # rounding pushed every candidate past the tolerance
            c = min(free, key=lambda c: cost[i, c] + _min_total(rest[:, [f for f in free if f != c]]))
            out.append(c)
            free.remove(c)
            spent += cost[i, c]
    return out


def _code_for(book, element_pos, user, coeff_ordinal):
    ordinal, side, _ = _steer(book, element_pos, user.position)
    return encode(_mode_for(side), ordinal, coeff_ordinal, book.k)


def assign_codes(scene: Scene, book: Codebook, coeff_ordinal: Optional[int] = None) -> Scene:
    """Pair users with active elements and emit their steering codes.

    Users (by id) are matched to active elements (row-major) so that the
    summed pointing error between each exact aim direction and its
    quantized codebook direction is minimal.  Incident-side users get
    Reflect codes, transmit-side users Refract codes.  ``coeff_ordinal``
    defaults to the highest level.

    Raises:
        CapacityError: more users than active elements.
    """
    elements = scene.layout.active_indices()
    if len(scene.users) > len(elements):
        raise CapacityError(f"{len(scene.users)} users but only {len(elements)} active elements")
    if coeff_ordinal is None:
        coeff_ordinal = book.size - 1
    users = sorted(scene.users, key=lambda u: u.id)
    pairs = optimal_pairing(pairing_costs(scene, book)) if users else []
    out = []
    for u, j in zip(users, pairs):
        e = elements[j]
        out.append(Assignment(e, u.id, _code_for(book, scene.layout.position(e), u, coeff_ordinal)))
    out.sort(key=lambda a: a.element)
    return replace(scene, assignments=tuple(out))


def retarget(scene: Scene, book: Codebook, user_id: str, position) -> Scene:
    """Move one user and recompute only its element's code."""
    user = scene.user(user_id)
    moved = replace(user, position=position)
    assignments = []
    for a in scene.assignments:
        if a.user_id == user_id:
            coeff = a.code.coeff_ordinal
            a = Assignment(a.element, user_id, _code_for(book, scene.layout.position(a.element), moved, coeff))
        assignments.append(a)
    users = tuple(moved if u.id == user_id else u for u in scene.users)
    return replace(scene, users=users, assignments=tuple(assignments))


# -- the 16-element double-sided design example --------------------------------

FIXTURE_ROWS = (
    ("0100001000", "Reflect", 31.22, -27.39),
    ("0100101000", "Reflect", -31.22, -27.39),
    ("0110101000", "Reflect", 31.22, 27.39),
    ("0110001000", "Reflect", -31.22, 27.39),
    ("1001111000", "Refract", 36.47, -30.33),
    ("1001011000", "Refract", 36.47, 30.33),
    ("1011011000", "Refract", -36.47, -30.33),
    ("1011111000", "Refract", -36.47, 30.33),
)
# element (row, col) served by each fixture row, and that user's id
FIXTURE_CELLS = ((0, 0), (0, 3), (3, 0), (3, 3), (1, 1), (1, 2), (2, 1), (2, 2))
FIXTURE_USER_IDS = "ABCDEFGH"
FIXTURE_ELEMENT_SIDE_M = 0.05


def fixture_table() -> List[dict]:
    return [
        {"code": c, "mode": m, "theta_deg": t, "phi_deg": p, "coeff": 1.0}
        for c, m, t, p in FIXTURE_ROWS
    ]


def design_example_fixture() -> Tuple[Scene, Codebook]:
    """The 4x4 double-sided example with its codes assigned.

    Corner elements reflect toward users A-D, the centre four refract
    toward users E-H and the remaining eight stay off.  Each user sits 1 m
    from its element along the tabulated angle pair, so the aim profiles
    coincide with the table entries.
    """
    book = codebook_from_table(fixture_table())
    active = [False] * 16
    for r, c in FIXTURE_CELLS:
        active[r * 4 + c] = True
    layout = SurfaceLayout(4, 4, FIXTURE_ELEMENT_SIDE_M, active=tuple(active))
    users = []
    for uid, (r, c), (_, mode, theta, phi) in zip(FIXTURE_USER_IDS, FIXTURE_CELLS, FIXTURE_ROWS):
        side = HalfSpace.INCIDENT if mode == "Reflect" else HalfSpace.TRANSMIT
        pos = layout.position(layout.index(r, c)) + direction_from_profile(PhaseProfile(theta, phi), side)
        users.append(User(uid, tuple(pos)))
    src = Source((0.0, 1.0, 2.0), power_w=1.0, lambertian_order=1.0, normal=(0.0, -1.0, -2.0))
    scene = Scene(src, tuple(users), layout)
    return assign_codes(scene, book), book


# -- JSON config / export --------------------------------------------------------


def _get(obj, key, path, kind=None, default=...):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing")
        return default
    v = obj[key]
    where = f"{path}.{key}" if path else key
    if kind == "num" and (isinstance(v, bool) or not isinstance(v, (int, float))):
        raise ConfigError(where, f"expected a number, got {v!r}")
    if kind == "vec3" and not (isinstance(v, list) and len(v) == 3
                               and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        raise ConfigError(where, f"expected [x, y, z], got {v!r}")
    if kind == "int" and (isinstance(v, bool) or not isinstance(v, int)):
        raise ConfigError(where, f"expected an integer, got {v!r}")
    return v


def _build(path, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None


def scene_from_dict(doc: dict) -> Tuple[Scene, object]:
    """Parse a scene document; returns ``(scene, codebook_ref)``.

    Raises:
        ConfigError: with the path of the offending field.
    """
    if not isinstance(doc, dict):
        raise ConfigError("$", "expected an object")
    r = _get(doc, "room", "", default={})
    room = _build("room", Room, float(_get(r, "width", "room", "num", 5.0)),
                  float(_get(r, "height", "room", "num", 3.0)), float(_get(r, "depth", "room", "num", 5.0)))
    s = _get(doc, "source", "")
    source = _build("source", Source, tuple(_get(s, "position", "source", "vec3")),
                    float(_get(s, "power_w", "source", "num", 1.0)),
                    float(_get(s, "lambertian_order", "source", "num", 1.0)),
                    tuple(_get(s, "normal", "source", "vec3", [0.0, 0.0, -1.0])))
    raw_users = _get(doc, "users", "")
    if not isinstance(raw_users, list):
        raise ConfigError("users", "expected an array")
    users = []
    for i, u in enumerate(raw_users):
        p = f"users[{i}]"
        uid = _get(u, "id", p)
        users.append(_build(p, User, str(uid), tuple(_get(u, "position", p, "vec3")),
                            float(_get(u, "area_m2", p, "num", 1e-4)),
                            float(_get(u, "fov_deg", p, "num", 90.0)),
                            float(_get(u, "responsivity", p, "num", 0.5))))
    lay = _get(doc, "layout", "")
    active = _get(lay, "active", "layout", default=None)
    if active is not None and not isinstance(active, list):
        raise ConfigError("layout.active", "expected an array of booleans")
    layout = _build("layout", SurfaceLayout, _get(lay, "rows", "layout", "int"),
                    _get(lay, "cols", "layout", "int"),
                    float(_get(lay, "element_side_m", "layout", "num")),
                    tuple(_get(lay, "center", "layout", "vec3", [0.0, 0.0, 0.0])),
                    None if active is None else tuple(active))
    scene = _build("users", Scene, source, tuple(users), layout, room)
    return scene, doc.get("codebook_ref")


def resolve_codebook(ref, base_dir=".") -> Codebook:
    """``ref`` is a path (relative to ``base_dir``) or ``{"grid": {...}}``."""
    if isinstance(ref, str):
        return load_codebook(os.path.join(base_dir, ref))
    if isinstance(ref, dict) and isinstance(ref.get("grid"), dict):
        g = ref["grid"]
        k = _get(g, "k", "codebook_ref.grid", "int")
        spans = {n: tuple(g.get(n, (-60.0, 60.0))) for n in ("theta_span", "phi_span")}
        return _build("codebook_ref.grid", codebook_grid, k, **spans)
    raise ConfigError("codebook_ref", f"expected a path or {{'grid': {{...}}}}, got {ref!r}")


def load_scene(path) -> Tuple[Scene, object]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    return scene_from_dict(doc)


def scene_to_dict(scene: Scene, k: Optional[int] = None, codebook_ref=None) -> dict:
    lay = scene.layout
    doc = {
        "room": {"width": scene.room.width, "height": scene.room.height, "depth": scene.room.depth},
        "source": {
            "position": list(scene.source.position),
            "power_w": scene.source.power_w,
            "lambertian_order": scene.source.lambertian_order,
            "normal": list(scene.source.normal),
        },
        "users": [
            {"id": u.id, "position": list(u.position), "area_m2": u.area_m2,
             "fov_deg": u.fov_deg, "responsivity": u.responsivity}
            for u in scene.users
        ],
        "layout": {
            "rows": lay.rows, "cols": lay.cols, "element_side_m": lay.element_side_m,
            "center": list(lay.center), "active": list(lay.active),
        },
    }
    if codebook_ref is not None:
        doc["codebook_ref"] = codebook_ref
    if scene.assignments:
        doc["assignments"] = [
            {"element": a.element, "row": lay.cell(a.element)[0], "col": lay.cell(a.element)[1],
             "user_id": a.user_id, "code": a.code.bits, "mode": a.code.mode.label}
            for a in scene.assignments
        ]
        if k is not None:
            doc["codes"] = scene.element_codes(k)
    return doc
