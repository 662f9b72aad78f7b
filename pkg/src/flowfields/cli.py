"""Command-line front end: ``flowfields {match,eval,viz,export-matches}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from PIL import Image

from . import __version__
from .evaluation import GroundTruth, evaluate, flow_to_color
from .filters import filter_and_sparsify, write_matches
from .flowio import read_flow, read_mask, write_flow
from .image import read_image
from .pipeline import PRESETS, preset, run_pipeline

log = logging.getLogger("flowfields")

# flag -> MatcherConfig field
_OVERRIDES = {"k": "k", "R": "R", "l": "l", "r": "r", "r2": "r2", "eps": "eps", "e": "e",
              "s": "s", "data_term": "data_term", "S": "S", "S2": "S2", "seed": "seed"}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="sintel", choices=sorted(PRESETS))
    p.add_argument("--k", type=int, help="hierarchy levels")
    p.add_argument("--R", type=float, help="random search radius at full resolution")
    p.add_argument("--l", type=int, help="kd-tree leaf size")
    p.add_argument("--r", type=int, help="patch radius")
    p.add_argument("--r2", type=int, help="patch radius of the second backward field")
    p.add_argument("--eps", type=float, help="consistency threshold in px")
    p.add_argument("--e", type=int, help="min survivors per 3x3 block")
    p.add_argument("--s", type=int, help="max region size for region filtering")
    p.add_argument("--data-term", dest="data_term", choices=["census", "siftflow"])
    p.add_argument("--S", type=int, help="SIFT-flow dims")
    p.add_argument("--S2", type=int, help="SIFT-flow dims of the second backward field")
    p.add_argument("--seed", type=int)


def _config(args):
    return preset(args.preset, **{f: getattr(args, a) for a, f in _OVERRIDES.items()})


def _save_png(img, path):
    Image.fromarray(img).save(path)


def _match_one(img1, img2, out: Path, cfg, args) -> None:
    out.mkdir(parents=True, exist_ok=True)
    res = run_pipeline(read_image(img1), read_image(img2), cfg, backend=args.backend,
                       threads=args.threads)
    write_flow(res.forward, out / "flow.flo")
    write_flow(res.backward1, out / "flow_backward1.flo")
    write_flow(res.backward2, out / "flow_backward2.flo")
    write_matches(res.matches, out / "matches.txt")
    if not args.no_viz:
        _save_png(flow_to_color(res.forward), out / "flow.png")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    (out / "timing.json").write_text(json.dumps(res.timings, indent=2) + "\n")
    print(f"{out}: {len(res.matches)} matches, {res.timings['total']:.2f}s")


def cmd_match(args) -> int:
    cfg = _config(args)
    if args.threads > 1:
        from ._accel import HAVE_NUMBA
        if HAVE_NUMBA:
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    if args.list:
        for line in Path(args.list).read_text().splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            a, b, out = line.split()
            _match_one(a, b, Path(out), cfg, args)
        return 0
    if not (args.img1 and args.img2):
        raise SystemExit("match needs two images or --list")
    _match_one(args.img1, args.img2, Path(args.output), cfg, args)
    return 0


def cmd_eval(args) -> int:
    est = read_flow(args.estimate)
    gt = GroundTruth(read_flow(args.ground_truth), read_mask(args.occ) if args.occ else None)
    report = evaluate(est, gt, threshold=args.threshold, cap=args.cap)
    print(report.to_json())
    if args.text:
        print(report)
    return 0


def cmd_viz(args) -> int:
    _save_png(flow_to_color(read_flow(args.flow), args.max_mag), args.output)
    return 0


def cmd_export(args) -> int:
    cfg = _config(args)
    fwd = read_flow(args.forward)
    bw1 = read_flow(args.backward1)
    bw2 = read_flow(args.backward2) if args.backward2 else None
    _, matches = filter_and_sparsify(fwd, bw1, bw2, cfg.eps, cfg.s, cfg.e)
    write_matches(matches, args.output)
    print(f"{args.output}: {len(matches)} matches")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowfields", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="compute flow fields and sparse matches for an image pair")
    p.add_argument("img1", nargs="?")
    p.add_argument("img2", nargs="?")
    p.add_argument("-o", "--output", default="out")
    p.add_argument("--list", help="file with 'img1 img2 outdir' per line")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=["numba", "numpy"])
    p.add_argument("--no-viz", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="evaluate a flow file against ground truth")
    p.add_argument("estimate")
    p.add_argument("ground_truth")
    p.add_argument("--occ", help="occlusion PNG, nonzero = occluded")
    p.add_argument("--threshold", type=float, default=3.0)
    p.add_argument("--cap", type=float, default=10.0)
    p.add_argument("--text", action="store_true", help="also print a readable summary")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="colour-code a flow file")
    p.add_argument("flow")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--max-mag", type=float)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("export-matches", help="filter stored fields into sparse matches")
    p.add_argument("forward")
    p.add_argument("backward1")
    p.add_argument("backward2", nargs="?")
    p.add_argument("-o", "--output", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"flowfields: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
