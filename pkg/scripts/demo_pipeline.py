"""End-to-end CLI walkthrough on a small grid.

Runs the sine relaxation config through `run`, extracts a kernel with
`linearize`, and checks two quick property suites with `verify`, leaving
frames.ndjson / summary.csv / kernel.json / verify.json under --out.
These files are exactly what the plotview package consumes.
"""

import argparse
import pathlib

from heleshaw.io_cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--resolution", default="64x64")
    args = ap.parse_args()

    here = pathlib.Path(__file__).parent
    config = str(here / "configs" / "sine_relaxation.json")
    out = args.out
    common = ["--config", config, "--out", out,
              "--resolution", args.resolution]

    for argv in (
        ["run", *common],
        ["linearize", *common],
        ["verify", *common, "translation", "constant_shift"],
    ):
        code = cli(argv)
        print(f"heleshaw {argv[0]}: exit {code}")
        if code != 0:
            raise SystemExit(code)

    produced = sorted(p.name for p in pathlib.Path(out).iterdir())
    print(f"files in {out}: {', '.join(produced)}")


if __name__ == "__main__":
    main()
