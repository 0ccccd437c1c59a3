"""Anisotropic, isotropic and Monte Carlo runs on the 118-bus preset with a timing table.

    python scripts/ieee118_timing.py [--workers N] [--out DIR]

Runs are saved under DIR (default ``runs/ieee118``) so they can be fed to
``klplf compare``.
"""
import argparse
import pathlib

from klplf import plf_driver as drv

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs" / "ieee118"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/ieee118")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    print(f"{'run':<8}{'N':>8}{'t_eig':>9}{'t_grid':>9}{'t_KL':>9}{'t_PF':>9}{'total':>9}")
    for name in ("aniso", "iso", "mc"):
        rc = drv.load_config(CONFIGS / f"{name}.json")
        res = drv.run(rc.config, args.workers)
        drv.save_result(res, out / name, rc.raw)
        t = res.timing
        print(f"{name:<8}{res.n_points:>8}" + "".join(
            f"{t[k]:>9.2f}" for k in ("t_eigenpairs", "t_grid", "t_kl", "t_pf", "t_total")))


if __name__ == "__main__":
    main()
