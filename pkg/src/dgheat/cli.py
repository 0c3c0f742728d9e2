"""Command line entry point.

Exit codes: 0 on full success, 1 on any level failure, 2 on config errors.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, load_config, run_convergence_study, run_probe


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dgheat",
        description=(
            "Refinement studies for the P1/dG(0) semilinear heat solver: "
            "convergence tables (default) or regularity-ratio probes (--probe)."
        ),
    )
    p.add_argument("--config", metavar="PATH", help="flat key=value config file")
    p.add_argument("--problem", metavar="NAME", help="study problem id")
    p.add_argument("--levels", type=int, metavar="N", help="number of levels (>= 2)")
    p.add_argument("--base-level", type=int, metavar="N", help="coarsest level")
    p.add_argument("--sigma", type=float, metavar="X", help="coupling exponent in k <= C h^sigma")
    p.add_argument("--out", metavar="PATH", help="CSV output path")
    p.add_argument("--seed", type=int, metavar="N", help="seed for randomized checks")
    p.add_argument("--probe", action="store_true", default=None,
                   help="run the regularity-ratio probe instead of a study")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "problem": args.problem,
        "levels": args.levels,
        "base_level": args.base_level,
        "sigma": args.sigma,
        "out": args.out,
        "seed": args.seed,
        "probe": args.probe,
    }
    try:
        cfg = load_config(args.config, overrides)
        if cfg.probe:
            rows = run_probe(cfg)
            print(f"# probe: b = {cfg.probe_b:g}, levels {cfg.base_level}.."
                  f"{cfg.base_level + cfg.levels - 1}")
            print(f"{'level':>5} {'ndof':>6} {'M':>5} {'lemma1':>12} "
                  f"{'lemma2':>12} {'lemma4':>12} {'dH inf/L2':>12} {'dH L2/L1':>12}")
            for row in rows:
                r = row.ratios
                print(f"{row.level:>5} {row.ndof:>6} {row.M:>5} "
                      f"{r.lemma1_ratio:>12.5g} {r.lemma2_ratio:>12.5g} "
                      f"{r.lemma4_ratio:>12.5g} {r.deltah_linf_over_l2:>12.5g} "
                      f"{r.deltah_l2_over_l1:>12.5g}")
            return 0
        report = run_convergence_study(cfg)
        eocs = report.eoc_columns()
        print(f"# study: problem = {cfg.problem}, sigma = {cfg.sigma:g}")
        print(f"{'level':>5} {'ndof':>6} {'M':>5} {'err_l2l2':>13} "
              f"{'err_linfl2':>13} {'err_linflinf':>13} {'eoc':>6} {'|u|max':>9}")
        for i, row in enumerate(report.rows):
            rate = eocs["eoc_l2l2"][i]
            rate_s = f"{rate:6.3f}" if rate is not None else "     -"
            print(f"{row.level:>5} {row.ndof:>6} {row.M:>5} "
                  f"{row.errors.l2l2:>13.6g} {row.errors.linf_l2:>13.6g} "
                  f"{row.errors.linf_linf:>13.6g} {rate_s} {row.max_abs_ukh:>9.4g}")
        if report.failures:
            for msg in report.failures:
                print(f"FAILED: {msg}", file=sys.stderr)
            return 1
        return 0
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
