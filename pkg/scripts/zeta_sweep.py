"""Node count, runtime and KLD versus zeta on the synthetic 9-bus fixture.

    python scripts/zeta_sweep.py [--zetas 1,1.5,2,4] [--repeats 3] [--out sweep.csv]

Equivalent to ``klplf zeta-sweep configs/synth9/zeta.json`` with a freshly
computed 10,000-sample Monte Carlo reference.
"""
import argparse
import pathlib
from dataclasses import replace

from klplf import plf_driver as drv
from klplf.cli import sweep, sweep_csv

CONFIG = pathlib.Path(__file__).resolve().parents[1] / "configs" / "synth9" / "zeta.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--zetas", default="1,1.5,2,4")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = drv.load_config(CONFIG).config
    ref = drv.run(replace(cfg, mode="monte_carlo", mc_samples=10_000))
    rows = sweep(cfg, [float(z) for z in args.zetas.split(",")], ref, repeats=args.repeats)
    text = sweep_csv(rows)
    if args.out:
        pathlib.Path(args.out).write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
