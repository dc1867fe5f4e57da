"""Link budgets, achievable rate and parameter sweeps.

Model
-----
* Incident power on an element follows a Lambertian source:
  ``P (m+1)/(2 pi) cos^m(irradiance) cos(incidence) A / d^2``.
* An element redirects ``coefficient * pointing_loss`` of it toward its
  user, with ``pointing_loss = cos^mb(error)`` between the quantized
  emerging ray and the exact aim direction.
* ``SNR = (responsivity * P_rx)^2 / noise`` and the rate is
  ``log2(1 + SNR)`` bits/s/Hz (``0.5 * log2(1 + SNR)`` with ``imdd``).
* Control overhead: every reconfiguration of ``n`` elements costs
  ``n * 2(k+1)`` bits of a frame of ``F`` bits.

Sweeps treat the aperture as a point at its centre (links are metres
long, the aperture centimetres).  The fixed aperture area is shared
evenly by the active elements.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .element import Codebook, ElementState, apply_code, codebook_grid, nearest_ordinals
from .geometry import HalfSpace, angular_error, direction_from_profile, directions, profile_from_direction
from .scene import Scene, Source

DEFAULT_BEAM_ORDER = 50.0
DEFAULT_FRAME_BITS = 10_000


@dataclass(frozen=True)
class NoiseLevel:
    power: float
    label: str = ""

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f"noise power must be > 0, got {self.power}")
        if not self.label:
            object.__setattr__(self, "label", f"{self.power:g}")


DEFAULT_NOISE = (NoiseLevel(1e-13), NoiseLevel(1e-12), NoiseLevel(1e-11))


@dataclass(frozen=True)
class LinkBudget:
    user_id: str
    element: int
    mode: str
    incident_power_w: float
    coefficient: float
    pointing_loss: float
    received_power_w: float
    snr: float
    rate_bps_hz: float


BUDGET_CSV_HEADER = [
    "user_id", "element", "mode", "incident_power_w", "coefficient",
    "pointing_loss", "received_power_w", "snr", "rate_bps_hz",
]


def element_incident_power(source: Source, element_pos, element_area_m2: float) -> float:
    """Power (W) from a Lambertian source landing on an element facing +z."""
    v = np.asarray(element_pos, dtype=float) - np.asarray(source.position)
    d2 = float(v @ v)
    if source.position[2] <= 0 or d2 == 0.0:
        return 0.0
    d = math.sqrt(d2)
    n = np.asarray(source.normal)
    cos_irr = float(v @ n) / (d * float(np.linalg.norm(n)))
    cos_inc = float(-v[2]) / d
    if cos_irr <= 0 or cos_inc <= 0:
        return 0.0
    m = source.lambertian_order
    return float(source.power_w * (m + 1) / (2 * math.pi) * cos_irr ** m * cos_inc * element_area_m2 / d2)


def loss_from_error(err, beam_order: float = DEFAULT_BEAM_ORDER):
    """``cos^mb(err)``, zero from 90 degrees on; accepts arrays."""
    c = np.cos(np.asarray(err, dtype=float))
    out = np.where(c > 0, np.clip(c, 0.0, 1.0) ** beam_order, 0.0)
    return float(out) if out.ndim == 0 else out


def pointing_loss(state: ElementState, user_pos, element_pos,
                  beam_order: float = DEFAULT_BEAM_ORDER) -> float:
    """Fraction of the steered beam reaching a user at ``user_pos``.

    States that do not emit on the user's side give 0.
    """
    v = np.asarray(user_pos, dtype=float) - np.asarray(element_pos, dtype=float)
    side = HalfSpace.of(v[2])
    prof = state.profile_for(side)
    if prof is None or v[2] == 0:
        return 0.0
    err = angular_error(direction_from_profile(prof, side), v / np.linalg.norm(v))
    return loss_from_error(err, beam_order)


def snr(received_power_w, noise: NoiseLevel, responsivity: float = 0.5):
    return (responsivity * np.asarray(received_power_w, dtype=float)) ** 2 / noise.power


def user_rate(received_power_w, noise: NoiseLevel, responsivity: float = 0.5, imdd: bool = False):
    """Achievable rate in bits/s/Hz; vectorised over ``received_power_w``."""
    r = np.log2(1.0 + snr(received_power_w, noise, responsivity))
    if imdd:
        r = 0.5 * r
    return float(r) if np.ndim(r) == 0 else r


def overhead_efficiency(n_active: int, k: int, frame_bits: float) -> float:
    if not frame_bits > 0:
        raise ValueError(f"frame_bits must be > 0, got {frame_bits}")
    if math.isinf(frame_bits):
        return 1.0
    return max(0.0, 1.0 - n_active * 2 * (k + 1) / frame_bits)


def link_budgets(scene: Scene, book: Codebook, noise: NoiseLevel,
                 beam_order: float = DEFAULT_BEAM_ORDER, imdd: bool = False) -> List[LinkBudget]:
    """One budget per assigned user, ordered by user id."""
    users = {u.id: u for u in scene.users}
    area = scene.layout.element_area_m2
    out = []
    for a in sorted(scene.assignments, key=lambda a: a.user_id):
        user = users[a.user_id]
        epos = scene.layout.position(a.element)
        state = apply_code(a.code, book)
        p_inc = element_incident_power(scene.source, epos, area)
        v = np.asarray(user.position) - epos
        side = HalfSpace.of(v[2])
        coeff = state.coefficient_for(side)
        loss = pointing_loss(state, user.position, epos, beam_order)
        # detector faces the surface; arrivals outside its field of view are lost
        arrival = math.degrees(math.acos(min(1.0, abs(v[2]) / float(np.linalg.norm(v)))))
        if arrival > user.fov_deg:
            loss = 0.0
        p_rx = p_inc * coeff * loss
        s = float(snr(p_rx, noise, user.responsivity))
        out.append(LinkBudget(a.user_id, a.element, state.mode.label, p_inc, coeff, loss, p_rx, s,
                              user_rate(p_rx, noise, user.responsivity, imdd)))
    return out


def budgets_to_csv(budgets: Sequence[LinkBudget]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BUDGET_CSV_HEADER)
    for b in budgets:
        w.writerow([b.user_id, b.element, b.mode, repr(b.incident_power_w), repr(b.coefficient),
                    repr(b.pointing_loss), repr(b.received_power_w), repr(b.snr), repr(b.rate_bps_hz)])
    return buf.getvalue()


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepTemplate:
    """Everything a sweep point needs besides the swept axis.

    ``user_directions`` pins the users as ``(profile, side)`` pairs seen
    from the aperture centre.  When it is empty, decoupled k sweeps draw
    ``drops`` random sets of ``n_users`` users inside the codebook spans
    and the other sweeps place users on codebook directions.
    """

    source: Source = field(default_factory=lambda: Source((0.0, 0.0, 2.5)))
    aperture_area_m2: float = 0.04
    aperture_center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta_span: Tuple[float, float] = (-60.0, 60.0)
    phi_span: Tuple[float, float] = (-60.0, 60.0)
    n_users: int = 8
    drops: int = 64
    seed: int = 0
    beam_order: float = DEFAULT_BEAM_ORDER
    responsivity: float = 0.5
    imdd: bool = False
    user_directions: Tuple = ()

    @classmethod
    def from_scene(cls, scene: Scene, **kw) -> "SweepTemplate":
        c = np.asarray(scene.layout.center)
        dirs = tuple(profile_from_direction(np.asarray(u.position) - c)
                     for u in sorted(scene.users, key=lambda u: u.id))
        area = scene.layout.count * scene.layout.element_area_m2
        resp = scene.users[0].responsivity if scene.users else 0.5
        kw.setdefault("responsivity", resp)
        return cls(source=scene.source, aperture_area_m2=area,
                   aperture_center=scene.layout.center, n_users=len(dirs),
                   user_directions=dirs, **kw)

    def aperture_power(self) -> float:
        """Power landing on the whole aperture."""
        return element_incident_power(self.source, self.aperture_center, self.aperture_area_m2)

    def codebook(self, k: int) -> Codebook:
        return codebook_grid(k, self.theta_span, self.phi_span)

    def random_users(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(directions (drops, n, 3), side signs (drops, n))`` for the seed."""
        rng = np.random.default_rng(self.seed)
        shape = (self.drops, self.n_users)
        th = rng.uniform(*self.theta_span, size=shape)
        ph = rng.uniform(*self.phi_span, size=shape)
        sign = np.where(rng.random(shape) < 0.5, 1, -1)
        return directions(th, ph, sign), sign

    def fixed_users(self) -> Tuple[np.ndarray, np.ndarray]:
        sign = np.array([s.sign for _, s in self.user_directions])
        th = np.array([p.theta_deg for p, _ in self.user_directions])
        ph = np.array([p.phi_deg for p, _ in self.user_directions])
        return directions(th, ph, sign)[None], sign[None]


def constellation_users(book: Codebook, ordinals: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Users exactly on codebook directions, alternating incident/transmit side."""
    sign = np.array([1 if i % 2 == 0 else -1 for i in range(len(ordinals))])
    ents = book.reflect_entries
    th = np.array([ents[o].theta_deg for o in ordinals], dtype=float)
    ph = np.array([ents[o].phi_deg for o in ordinals], dtype=float)
    return directions(th, ph, sign)[None], sign[None]


def pointing_losses(dirs: np.ndarray, signs: np.ndarray, book: Codebook, beam_order: float) -> np.ndarray:
    """Loss for every user of every drop after quantizing to ``book``."""
    flat = dirs.reshape(-1, 3)
    s = signs.reshape(-1)
    err = np.empty(len(flat))
    for side in HalfSpace:
        m = s == side.sign
        if m.any():
            err[m] = nearest_ordinals(flat[m], book, side)[1]
    return loss_from_error(err, beam_order).reshape(signs.shape)


@dataclass(frozen=True)
class SweepPoint:
    axis_value: int
    overhead: float
    sum_rate: Tuple[float, ...]   # one per noise level
    avg_rate: Tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    axis_values: Tuple[int, ...]
    noise_labels: Tuple[str, ...]
    sum_rate: Tuple[Tuple[float, ...], ...]   # [noise][axis]
    avg_rate: Tuple[Tuple[float, ...], ...]
    overhead: Tuple[float, ...]

    def argmax(self, noise_index: int = 0) -> int:
        """Axis value with the largest sum rate (first one on ties)."""
        curve = self.sum_rate[noise_index]
        return self.axis_values[max(range(len(curve)), key=lambda i: (curve[i], -i))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_name", "axis_value", "noise_label", "sum_rate_bps_hz",
                    "avg_user_rate_bps_hz", "overhead_efficiency", "argmax_flag"])
        for j, label in enumerate(self.noise_labels):
            best = self.argmax(j)
            for i, x in enumerate(self.axis_values):
                w.writerow([self.axis_name, x, label, repr(self.sum_rate[j][i]),
                            repr(self.avg_rate[j][i]), repr(self.overhead[i]), int(x == best)])
        return buf.getvalue()


def worker_count(workers: Optional[int] = None) -> int:
    """Explicit ``workers``, else ``ODRIS_THREADS`` (0 or unset = one per CPU)."""
    if workers is None:
        try:
            workers = int(os.environ.get("ODRIS_THREADS", "0"))
        except ValueError:
            workers = 0
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _run(points: Sequence[int], fn: Callable[[int], SweepPoint], workers: Optional[int]) -> List[SweepPoint]:
    n = min(worker_count(workers), max(1, len(points)))
    if n == 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, points))


def _collect(axis_name, axis, noise, pts) -> SweepResult:
    return SweepResult(
        axis_name, tuple(axis), tuple(n.label for n in noise),
        tuple(tuple(p.sum_rate[j] for p in pts) for j in range(len(noise))),
        tuple(tuple(p.avg_rate[j] for p in pts) for j in range(len(noise))),
        tuple(p.overhead for p in pts),
    )


def _rates(p_rx: np.ndarray, tpl: SweepTemplate, noise, eff: float):
    """(sum rate, average user rate) per noise level for ``p_rx`` of shape (drops, users)."""
    sums, avgs = [], []
    for nz in noise:
        r = user_rate(p_rx, nz, tpl.responsivity, tpl.imdd) * eff
        r = np.asarray(r, dtype=float)
        sums.append(float(r.sum(axis=1).mean()) if r.size else 0.0)
        avgs.append(float(r.mean()) if r.size else 0.0)
    return tuple(sums), tuple(avgs)


def sweep_k(tpl: SweepTemplate, ks: Sequence[int], noise: Sequence[NoiseLevel] = DEFAULT_NOISE,
            coupled: bool = False, frame_bits: float = math.inf,
            workers: Optional[int] = None) -> SweepResult:
    """Rate versus bits per phase shift.

    Decoupled: ``n_users`` active elements regardless of ``k``; only the
    codebook resolution changes.  Coupled: ``2**k`` active elements each
    serving a user on its own codebook direction, sharing the aperture
    (per-user power falls as ``1/2**k``).
    """
    ks = list(ks)
    if not ks:
        raise ValueError("empty k range")
    if any(not 2 <= k <= 10 for k in ks):
        raise ValueError(f"k range must lie within [2, 10], got {ks}")
    p_ap = tpl.aperture_power()
    if not coupled:
        users = tpl.fixed_users() if tpl.user_directions else tpl.random_users()

    def point(k: int) -> SweepPoint:
        book = tpl.codebook(k)
        if coupled:
            dirs, signs = constellation_users(book, range(book.size))
        else:
            dirs, signs = users
        n_active = signs.shape[1]
        loss = pointing_losses(dirs, signs, book, tpl.beam_order)
        coeff = book.coeff_levels[-1]
        p_rx = p_ap / n_active * coeff * loss if n_active else loss
        eff = overhead_efficiency(n_active, k, frame_bits)
        s, a = _rates(p_rx, tpl, noise, eff)
        return SweepPoint(k, eff, s, a)

    return _collect("k", ks, noise, _run(ks, point, workers))


def sweep_n(tpl: SweepTemplate, ns: Sequence[int], k: int = 4, noise: Sequence[NoiseLevel] = DEFAULT_NOISE,
            frame_bits: float = DEFAULT_FRAME_BITS, workers: Optional[int] = None) -> SweepResult:
    """Sum rate versus element count ``N`` over a fixed aperture.

    With ``U`` users, ``N <= U`` elements serve the first ``N`` users one
    each; beyond that elements are dealt round-robin so a user may be
    served by several.  Every element is reconfigured, so the overhead
    grows with ``N``.
    """
    ns = list(ns)
    if not ns:
        raise ValueError("empty N range")
    if any(n < 0 for n in ns):
        raise ValueError(f"N must be >= 0, got {ns}")
    book = tpl.codebook(k)
    if tpl.user_directions:
        dirs, signs = tpl.fixed_users()
    else:
        u = min(tpl.n_users, book.size)
        step = book.size / u
        dirs, signs = constellation_users(book, [int(i * step) for i in range(u)])
    loss = pointing_losses(dirs, signs, book, tpl.beam_order)[0]
    n_users = len(loss)
    p_ap = tpl.aperture_power()
    coeff = book.coeff_levels[-1]

    def point(n: int) -> SweepPoint:
        eff = overhead_efficiency(n, k, frame_bits)
        if n == 0 or n_users == 0:
            return SweepPoint(n, eff, (0.0,) * len(noise), (0.0,) * len(noise))
        served = min(n, n_users)
        per_user = np.array([n // n_users + (i < n % n_users) for i in range(n_users)])[:served]
        if n <= n_users:
            per_user = np.ones(served, dtype=int)
        p_rx = (p_ap / n * coeff * per_user * loss[:served])[None]
        s, a = _rates(p_rx, tpl, noise, eff)
        return SweepPoint(n, eff, s, a)

    return _collect("N", ns, noise, _run(ns, point, workers))
