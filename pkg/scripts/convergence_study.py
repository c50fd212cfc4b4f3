"""Grid convergence of the radial Neumann spectrum and the interior Yamabe value.

Prints a CSV with errors against the closed forms on the hemisphere S^3_+
(mu_1 = 8, mu_2 = 24) and the self-convergence of the interior s = 4 minimum on
the band t in [0.2, 0.9], whose minimizer is not constant.
"""

import argparse
import math
import sys

from isoyamabe.cli import csv_text
from isoyamabe.discretize import build_grid
from isoyamabe.profile import make_hemisphere, make_spherical_band
from isoyamabe.spectra import neumann_spectrum
from isoyamabe.yamabe import minimize_quotient


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", default="100,200,400,800,1600", help="comma-separated grid sizes")
    ap.add_argument("--grade", default=None, help="none, auto or an exponent")
    args = ap.parse_args(argv)
    p = make_hemisphere(3)
    band = make_spherical_band(3, 0.2, 0.9)
    grade = None if args.grade in (None, "none") else ("auto" if args.grade == "auto" else float(args.grade))
    rows, prev, j_prev, dj_prev = [], None, None, None
    for m in (int(c) for c in args.cells.split(",")):
        g = build_grid(p, m, grade)
        mu = neumann_spectrum(p, g, 3, estimate_error=False).eigenvalues
        errs = (abs(mu[1] - 8) / 8, abs(mu[2] - 24) / 24)
        orders = [None] * 2 if prev is None else [math.log2(a / b) for a, b in zip(prev, errs)]
        j = minimize_quotient(band, build_grid(band, m), 4.0).value  # value error is quadratic in the residual
        dj = None if j_prev is None else abs(j - j_prev)
        order_j = None if dj is None or dj_prev is None else math.log2(dj_prev / dj)
        rows.append((m, *errs, j, dj, *orders, order_j))
        prev, j_prev, dj_prev = errs, j, dj
    cols = [("cells", "grid size"), ("err_mu1", "relative error of mu_1"), ("err_mu2", "relative error of mu_2"),
            ("J4_band", "interior s = 4 quotient minimum on the band"),
            ("dJ4_band", "change of J4_band from the previous grid"),
            ("order_mu1", "log2 of successive error ratio"), ("order_mu2", "log2 of successive error ratio"),
            ("order_J4", "log2 of successive change ratio")]
    sys.stdout.write(csv_text(cols, rows, [f"profile {p.name}, grading {args.grade or 'none'}"]))


if __name__ == "__main__":
    main()
