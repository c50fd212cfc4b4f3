"""c_{a,b} along b in [-1, 1] at fixed a, with its two-sided bounds.

Default profile is S^2_+ x S^2 (dimension 4, focal dimension 2), where both
critical exponents are admissible.
"""

import argparse
import sys

import numpy as np

from isoyamabe.cli import HANLI_COLS, _hanli_row, csv_text
from isoyamabe.discretize import build_grid
from isoyamabe.hanli import c_curve
from isoyamabe.profile import profile_by_name


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="hemisphere:2/2:2:1")
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=21)
    ap.add_argument("--cells", type=int, default=400)
    args = ap.parse_args(argv)
    prof = profile_by_name(args.profile)
    grid = build_grid(prof, args.cells)
    # sweep outward from b = 0 so warm starts follow the curve
    bs = np.round(np.linspace(-1.0, 1.0, args.points), 12)
    order = sorted(bs, key=abs)
    samples = {s.b: s for s in c_curve(prof, grid, [(args.a, float(b)) for b in order])}
    rows = [_hanli_row(samples[float(b)]) for b in bs]
    sys.stdout.write(csv_text(HANLI_COLS, rows, [f"profile {prof.name}, a = {args.a!r}"]))


if __name__ == "__main__":
    main()
