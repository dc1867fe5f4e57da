"""Command-line front end (``odris``)."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

from .codec import Mode, code_number, decode, encode
from .element import apply_code, codebook_grid, load_codebook, states_to_csv, OFF_STATE
from .errors import OdrisError
from .linkrate import (DEFAULT_NOISE, NoiseLevel, SweepTemplate, budgets_to_csv, link_budgets, sweep_k,
                       sweep_n)
from .scene import assign_codes, design_example_fixture, load_scene, resolve_codebook, scene_to_dict


def _write(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _noise(values) -> List[NoiseLevel]:
    return [NoiseLevel(v) for v in values] if values else list(DEFAULT_NOISE)


def cmd_codebook(args) -> int:
    book = codebook_grid(args.k, tuple(args.theta_span), tuple(args.phi_span))
    _write(book.to_json(), args.out)
    return 0


def cmd_encode(args) -> int:
    code = encode(Mode.from_label(args.mode), args.phase, args.coeff, args.k)
    print(code.bits)
    return 0


def cmd_decode(args) -> int:
    code = decode(args.bits)
    head = f"{code.mode.label} phase_ordinal={code.phase_ordinal} coeff_ordinal={code.coeff_ordinal} k={code.k}"
    if args.codebook is None:
        print(head)
        return 0
    state = apply_code(code, load_codebook(args.codebook))
    parts = [state.mode.label]
    for p in (state.reflect_profile, state.refract_profile):
        if p is not None:
            parts.append(str(p))
    parts.append(f"R={state.R:g} T={state.T:g}")
    print(" ".join(parts) + f" code_no={code_number(code)} | {head}")
    return 0


def cmd_fixture(args) -> int:
    scene, book = design_example_fixture()
    codes = scene.element_codes(book.k)
    if args.out is None:
        print("\n".join(codes))
        return 0
    os.makedirs(args.out, exist_ok=True)
    _write(book.to_json(), os.path.join(args.out, "codebook.json"))
    doc = scene_to_dict(scene, book.k, codebook_ref="codebook.json")
    _write(json.dumps(doc, indent=2) + "\n", os.path.join(args.out, "scene.json"))
    lines = ["element,row,col,code,mode,user_id"]
    states = []
    for i, bits in enumerate(codes):
        a = scene.assignment_for(i)
        r, c = scene.layout.cell(i)
        state = apply_code(a.code, book) if a else OFF_STATE
        states.append((i, state))
        lines.append(f"{i},{r},{c},{bits},{state.mode.label},{a.user_id if a else ''}")
    _write("\n".join(lines) + "\n", os.path.join(args.out, "codes.csv"))
    _write(states_to_csv(states), os.path.join(args.out, "states.csv"))
    return 0


def _load_scene_and_book(args):
    scene, ref = load_scene(args.scene)
    base = os.path.dirname(os.path.abspath(args.scene))
    if args.codebook is not None:
        book = load_codebook(args.codebook)
    elif ref is not None:
        book = resolve_codebook(ref, base)
    else:
        raise OdrisError("no codebook: pass --codebook or set codebook_ref in the scene")
    return scene, book


def cmd_simulate(args) -> int:
    scene, book = _load_scene_and_book(args)
    scene = assign_codes(scene, book)
    noise = NoiseLevel(args.noise)
    budgets = link_budgets(scene, book, noise, args.beam_order, args.imdd)
    _write(budgets_to_csv(budgets), args.out)
    return 0


def cmd_sweep(args) -> int:
    kw = dict(seed=args.seed, beam_order=args.beam_order, imdd=args.imdd)
    if args.drops is not None:
        kw["drops"] = args.drops
    if args.scene is not None:
        scene, _ = load_scene(args.scene)
        tpl = SweepTemplate.from_scene(scene, **kw)
    else:
        tpl = SweepTemplate(**kw)
    frame = math.inf if args.frame_bits is not None and args.frame_bits <= 0 else args.frame_bits
    noise = _noise(args.noise)
    if args.kind == "k":
        lo, hi = args.k_range
        ks = list(range(lo, hi + 1))
        res = sweep_k(tpl, ks, noise, coupled=args.coupled,
                      frame_bits=math.inf if frame is None else frame)
    else:
        lo, hi = args.n_range
        ns = [n for n in range(lo, hi + 1) if not args.pow2 or (n > 0 and n & (n - 1) == 0)]
        res = sweep_n(tpl, ns, args.k, noise, frame_bits=10_000 if frame is None else frame)
    _write(res.to_csv(), args.out)
    if args.kind == "n":
        stream = sys.stdout if args.out not in (None, "-") else sys.stderr
        for j, label in enumerate(res.noise_labels):
            print(f"argmax N={res.argmax(j)} noise={label}", file=stream)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="odris", description="Omni-DRIS code, scene and link-rate tools")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("codebook", help="write a uniform grid codebook as JSON rows")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--theta-span", type=float, nargs=2, default=(-60.0, 60.0), metavar=("LO", "HI"))
    c.add_argument("--phi-span", type=float, nargs=2, default=(-60.0, 60.0), metavar=("LO", "HI"))
    c.add_argument("--out")
    c.set_defaults(func=cmd_codebook)

    e = sub.add_parser("encode", help="encode mode and ordinals into a bit string")
    e.add_argument("--mode", required=True, help="Off, Reflect, Refract, Both or a 2-bit symbol")
    e.add_argument("--phase", type=int, default=0)
    e.add_argument("--coeff", type=int, default=0)
    e.add_argument("--k", type=int, required=True)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a bit string")
    d.add_argument("bits")
    d.add_argument("--codebook")
    d.set_defaults(func=cmd_decode)

    f = sub.add_parser("fixture", help="reproduce the 16-element double-sided design example")
    f.add_argument("--out", help="directory for scene.json, codebook.json, codes.csv, states.csv")
    f.set_defaults(func=cmd_fixture)

    s = sub.add_parser("simulate", help="per-user link budgets for a scene")
    s.add_argument("--scene", required=True)
    s.add_argument("--codebook")
    s.add_argument("--noise", type=float, default=DEFAULT_NOISE[1].power)
    s.add_argument("--beam-order", type=float, default=50.0)
    s.add_argument("--imdd", action="store_true", help="use 0.5*log2(1+SNR)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="rate versus k or versus element count")
    w.add_argument("kind", choices=("k", "n"))
    w.add_argument("--k-range", type=int, nargs=2, default=(2, 6), metavar=("LO", "HI"))
    w.add_argument("--k", type=int, default=4, help="bits per phase shift for kind=n")
    w.add_argument("--n-range", type=int, nargs=2, default=(1, 256), metavar=("LO", "HI"))
    w.add_argument("--pow2", action="store_true", help="keep only powers of two in --n-range")
    w.add_argument("--noise", type=float, nargs="+")
    w.add_argument("--coupled", action="store_true")
    w.add_argument("--frame-bits", type=float, help="frame budget F; <= 0 disables the overhead")
    w.add_argument("--scene", help="take source, aperture and users from a scene file")
    w.add_argument("--drops", type=int)
    w.add_argument("--beam-order", type=float, default=50.0)
    w.add_argument("--imdd", action="store_true")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OdrisError, OSError, ValueError) as exc:
        print(f"odris {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
