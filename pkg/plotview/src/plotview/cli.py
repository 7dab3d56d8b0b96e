"""Command line front end: plotview run|kernel --out <dir> <input file>."""

import argparse

from .render import render_kernel, render_run


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plotview", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="figures from a frames.ndjson stream")
    p_run.add_argument("frames")
    p_run.add_argument("--out", default=".")
    p_kernel = sub.add_parser("kernel", help="decay plot from a kernel.json")
    p_kernel.add_argument("kernel")
    p_kernel.add_argument("--out", default=".")
    args = ap.parse_args(argv)

    if args.command == "run":
        for path in render_run(args.frames, args.out):
            print(path)
    else:
        print(render_kernel(args.kernel, args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
