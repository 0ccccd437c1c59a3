"""Write the synthetic 9-bus case, its time-series fixture and run configs.

The case is the WSCC 9-bus network at a heavier operating point: the slack
carries most of the generation, so every bus angle and almost every flow
sits well away from zero.  Three loads (buses 5, 7, 9) follow two shared
factors plus a small idiosyncratic part; the two non-slack generators are
positively correlated.  Both groups keep two KL modes at the default 90%
energy fraction.

    python scripts/make_synthetic9.py
"""
import json
import pathlib

import dataclasses

import numpy as np

from klplf.case_io import write_structured_case
from klplf.plf_driver import resolve_case

OUT = pathlib.Path(__file__).resolve().parents[1] / "configs" / "synth9"
ROWS = 2000
SEED = 20240521

LOADS = {"load5": 110.0, "load7": 160.0, "load9": 90.0}
GENS = {"gen2": 30.0, "gen3": 20.0}
V_SET = (1.0, 1.04, 1.06)


def series():
    rng = np.random.default_rng(SEED)
    f = rng.standard_normal((ROWS, 2))
    mix = np.array([[1.0, 0.6], [0.9, -0.5], [0.8, 0.1]])
    load_dev = 0.02 * f @ mix.T + 0.0027 * rng.standard_normal((ROWS, 3))
    g = rng.standard_normal((ROWS, 2))
    g[:, 1] = 0.5 * g[:, 0] + np.sqrt(0.75) * g[:, 1]
    gen_dev = 0.03 * g
    cols = {}
    for k, (name, base) in enumerate(LOADS.items()):
        cols[name] = base * (1.0 + load_dev[:, k])
    for k, (name, base) in enumerate(GENS.items()):
        cols[name] = base * (1.0 + gen_dev[:, k])
    return cols


def write_csv(path, cols):
    names = list(cols)
    lines = [",".join(names)]
    for r in range(ROWS):
        lines.append(",".join(f"{cols[n][r]:.6f}" for n in names))
    path.write_text("\n".join(lines) + "\n")


def synthetic_case():
    base = resolve_case("case9")
    mw = {int(k[4:]): v for k, v in LOADS.items()} | {int(k[3:]): v for k, v in GENS.items()}
    buses = []
    for b in base.buses:
        if b.p_demand:
            s = mw[b.id] / base.base_mva / b.p_demand
            b = dataclasses.replace(b, p_demand=b.p_demand * s, q_demand=b.q_demand * s)
        buses.append(b)
    gens = [dataclasses.replace(g, v_set=v, p_set=mw.get(g.bus, 0.0) / base.base_mva)
            for g, v in zip(base.generators, V_SET)]
    return base.replace(buses=buses, generators=gens)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "case.json").write_text(write_structured_case(synthetic_case()))
    cols = series()
    write_csv(OUT / "loads.csv", {k: cols[k] for k in LOADS})
    write_csv(OUT / "gens.csv", {k: cols[k] for k in GENS})
    unc = {"groups": [
        {"name": "load", "series_file": "loads.csv", "sources": [
            {"id": n, "kind": "empirical_series", "bus": int(n[4:]), "quantity": "p_demand", "column": n}
            for n in LOADS]},
        {"name": "generation", "series_file": "gens.csv", "sources": [
            {"id": n, "kind": "empirical_series", "bus": int(n[3:]), "quantity": "p_gen", "column": n}
            for n in GENS]},
    ]}
    (OUT / "uncertainty.json").write_text(json.dumps(unc, indent=1) + "\n")
    base = {"case": "case.json", "uncertainty": "uncertainty.json", "rule": "f2", "l_max": 5,
            "gamma_policy": "recursive_doubling", "seed": 1}
    variants = {
        "aniso.json": {**base, "grid_kind": "anisotropic"},
        "iso_w2.json": {**base, "grid_kind": "isotropic", "w": 2},
        "iso_w3.json": {**base, "grid_kind": "isotropic", "w": 3},
        "mc.json": {**base, "mode": "monte_carlo", "mc_samples": 10000},
        "zeta.json": {**base, "grid_kind": "anisotropic", "gamma_policy": "zeta_scaled", "zeta": 1.0},
    }
    for name, doc in variants.items():
        (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
