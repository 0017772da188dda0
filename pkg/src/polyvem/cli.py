"""polyvem command line: run one study and write its CSV report."""
import argparse
import json
import sys
from pathlib import Path

from .errors import PolyVEMError
from .studies import STUDIES, StudyConfig, run_study


def build_parser():
    ap = argparse.ArgumentParser(prog="polyvem", description="Conditioning and convergence studies for high-order VEM.")
    ap.add_argument("study", choices=STUDIES)
    ap.add_argument("--mesh", default="square", help="square, hex, voronoi, or a path to a vempoly mesh file")
    ap.add_argument("--n", type=int, default=4, help="cells per side for square/hex meshes")
    ap.add_argument("--seeds", type=int, default=25)
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--rng", type=int, default=0)
    ap.add_argument("--pmin", type=int)
    ap.add_argument("--pmax", type=int)
    ap.add_argument("--basis", default="ortho-gs", choices=["monomial", "ortho-gs", "ortho-diag"])
    ap.add_argument("--stab", default="s1", choices=["s1", "s2", "s3", "s4"])
    ap.add_argument("--imin", type=int, default=1)
    ap.add_argument("--imax", type=int, default=8)
    ap.add_argument("--solution", choices=["sinsin", "linear"])
    ap.add_argument("--fit", action="store_true", help="fit cond = a p^b and write it to <out>.fit.json")
    ap.add_argument("--dat", action="store_true", help="also write a whitespace-separated <out>.dat")
    ap.add_argument("--no-refine", dest="refine", action="store_false",
                    help="plain eigendecomposition only, even for severely ill-conditioned matrices")
    ap.add_argument("--out", help="CSV path (default: stdout)")
    return ap


def config_from_args(args):
    mesh, mesh_file = args.mesh, None
    if mesh not in ("square", "hex", "voronoi"):
        mesh, mesh_file = "file", args.mesh
    return StudyConfig(
        study=args.study, mesh=mesh, n=args.n, seeds=args.seeds, iters=args.iters, rng=args.rng,
        mesh_file=mesh_file, pmin=args.pmin, pmax=args.pmax, basis=args.basis, stab=args.stab,
        imin=args.imin, imax=args.imax, solution=args.solution, fit=args.fit, refine=args.refine,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report = run_study(config)
    except (PolyVEMError, ValueError, OSError) as exc:
        print(f"polyvem: error: {exc}", file=sys.stderr)
        return 2
    text = report.to_csv()
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        if args.dat:
            out.with_suffix(".dat").write_text(report.to_dat())
        if report.fit is not None:
            out.with_suffix(".fit.json").write_text(json.dumps(report.fit_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(text)
        if report.fit is not None:
            print(f"# fit a={report.fit.a:.6g} b={report.fit.b:.6g} residual={report.fit.residual:.3g}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
