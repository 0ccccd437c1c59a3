"""Regenerate the committed case files and the 118-bus reference solution.

Needs PYPOWER (``pip install pypower``), which is used only here: it supplies
the public MATPOWER case data and acts as the independent reference solver.
The package itself never imports it.

    python scripts/make_fixtures.py
"""
import hashlib
import pathlib

import numpy as np
from pypower.api import case9, case118, ppoption, runpf

ROOT = pathlib.Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "klplf" / "data"
FIXTURES = ROOT / "tests" / "fixtures"


def _fmt(v):
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_matpower(name, ppc, source):
    out = [f"function mpc = {name}",
           f"%{name.upper()}  exported from {source}",
           "",
           "mpc.version = '2';",
           f"mpc.baseMVA = {_fmt(ppc['baseMVA'])};",
           ""]
    heads = {
        "bus": "bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin",
        "gen": "bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin Pc1 Pc2 Qc1min Qc1max "
               "Qc2min Qc2max ramp_agc ramp_10 ramp_30 ramp_q apf",
        "branch": "fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax",
    }
    for key in ("bus", "gen", "branch"):
        out.append(f"%% {key} data")
        out.append(f"%\t{heads[key]}")
        out.append(f"mpc.{key} = [")
        for row in np.asarray(ppc[key], dtype=float):
            out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
        out.append("];")
        out.append("")
    return "\n".join(out)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, fn in (("case9", case9), ("case118", case118)):
        text = to_matpower(name, fn(), "PYPOWER 5.1 (port of MATPOWER)")
        (DATA / f"{name}.m").write_text(text)
        print(name, hashlib.sha256(text.encode()).hexdigest())

    ppc = case118()
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_ALG=1, PF_TOL=1e-10, PF_MAX_IT=30, ENFORCE_Q_LIMS=0)
    res, ok = runpf(ppc, opt)
    assert ok
    base = res["baseMVA"]
    bus = res["bus"]
    v = bus[:, 7] * np.exp(1j * np.deg2rad(bus[:, 8]))
    pos = {int(b): k for k, b in enumerate(bus[:, 0])}
    s = -(bus[:, 2] + 1j * bus[:, 3])
    for g in res["gen"]:
        if g[7] > 0:
            s[pos[int(g[0])]] += g[1] + 1j * g[2]
    s = s / base
    lines = ["# IEEE 118-bus base case solved by PYPOWER runpf (Newton, PF_TOL=1e-10, no Q limits)",
             "# columns: bus id, |V| p.u., angle rad, P injection p.u., Q injection p.u.",
             "bus,v_mag,v_ang,p_inj,q_inj"]
    for k in range(len(bus)):
        lines.append(",".join([str(int(bus[k, 0]))] + [repr(float(x)) for x in (abs(v[k]), np.angle(v[k]), s[k].real, s[k].imag)]))
    (FIXTURES / "case118_reference.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
