"""Deterministic AC power flow by full Newton-Raphson in polar coordinates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .case_io import PQ, PV, SLACK, PowerSystemCase
from .errors import SingularJacobian, ZeroImpedanceBranch

log = logging.getLogger(__name__)

_DENSE_LIMIT = 600


@dataclass(frozen=True)
class PFOptions:
    tol: float = 1e-8
    max_iter: int = 30
    enforce_q_limits: bool = False
    start: str = "flat"  # or "from_case"
    max_q_outer: int = 20

    def __post_init__(self):
        if self.start not in ("flat", "from_case"):
            raise ValueError(f"start must be 'flat' or 'from_case', got {self.start!r}")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    n: int
    entries: sp.csr_matrix  # bus admittance
    y_from: sp.csr_matrix  # branch-from current injections
    y_to: sp.csr_matrix


@dataclass(eq=False)
class PowerFlowSolution:
    v_mag: np.ndarray
    v_ang: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    p_flow_from: np.ndarray
    q_flow_from: np.ndarray
    p_flow_to: np.ndarray
    q_flow_to: np.ndarray
    converged: bool
    iterations: int
    max_mismatch: float
    bus_types: tuple = field(default=())  # final types after Q-limit switching
    mismatch_history: list = field(default_factory=list)

    @property
    def voltage(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


def build_ybus(case: PowerSystemCase) -> AdmittanceMatrix:
    """Pi-model assembly with off-nominal taps, phase shifters and bus shunts."""
    n = case.n_bus
    nl = case.n_branch
    f = np.empty(nl, dtype=np.int64)
    t = np.empty(nl, dtype=np.int64)
    yff = np.zeros(nl, dtype=complex)
    yft = np.zeros(nl, dtype=complex)
    ytf = np.zeros(nl, dtype=complex)
    ytt = np.zeros(nl, dtype=complex)
    for k, br in enumerate(case.branches):
        f[k] = case.bus_position(br.from_bus)
        t[k] = case.bus_position(br.to_bus)
        if not br.in_service:
            continue
        z = complex(br.r, br.x)
        if z == 0:
            raise ZeroImpedanceBranch(f"branch {k} ({br.from_bus}-{br.to_bus}) has r = x = 0")
        ys = 1.0 / z
        tap = br.tap_ratio if br.tap_ratio != 0 else 1.0
        ratio = tap * np.exp(1j * br.phase_shift)
        ytt[k] = ys + 0.5j * br.b_charging
        yff[k] = ytt[k] / (tap * tap)
        yft[k] = -ys / np.conj(ratio)
        ytf[k] = -ys / ratio
    ysh = np.array([complex(b.g_shunt, b.b_shunt) for b in case.buses])

    rows = np.arange(nl)
    yf = sp.csr_matrix((np.r_[yff, yft], (np.r_[rows, rows], np.r_[f, t])), shape=(nl, n))
    yt = sp.csr_matrix((np.r_[ytf, ytt], (np.r_[rows, rows], np.r_[f, t])), shape=(nl, n))
    cf = sp.csr_matrix((np.ones(nl), (rows, f)), shape=(nl, n))
    ct = sp.csr_matrix((np.ones(nl), (rows, t)), shape=(nl, n))
    y = (cf.T @ yf + ct.T @ yt + sp.diags(ysh)).tocsr()
    return AdmittanceMatrix(n, y, yf, yt)


def compute_branch_flows(case: PowerSystemCase, v_mag, v_ang, ybus: AdmittanceMatrix | None = None):
    """Complex power entering each branch at its from and to ends.

    Returns ``(p_from, q_from, p_to, q_to)``; out-of-service branches carry zero.
    """
    if ybus is None:
        ybus = build_ybus(case)
    v = np.asarray(v_mag) * np.exp(1j * np.asarray(v_ang))
    if len(v) != case.n_bus:
        raise ValueError(f"voltage vector has {len(v)} entries for {case.n_bus} buses")
    f = np.array([case.bus_position(b.from_bus) for b in case.branches], dtype=np.int64)
    t = np.array([case.bus_position(b.to_bus) for b in case.branches], dtype=np.int64)
    sf = v[f] * np.conj(ybus.y_from @ v) if len(f) else np.zeros(0, complex)
    st = v[t] * np.conj(ybus.y_to @ v) if len(t) else np.zeros(0, complex)
    return sf.real, sf.imag, st.real, st.imag


class _Network:
    """Arrays derived from a case that stay fixed across Newton iterations."""

    def __init__(self, case: PowerSystemCase, ybus: AdmittanceMatrix | None = None):
        self.case = case
        self.ybus = ybus if ybus is not None else build_ybus(case)
        n = case.n_bus
        self.n = n
        self.dense = n <= _DENSE_LIMIT
        self.y = self.ybus.entries.toarray() if self.dense else self.ybus.entries

        p_gen = np.zeros(n)
        q_gen = np.zeros(n)
        q_min = np.zeros(n)
        q_max = np.zeros(n)
        v_set = np.full(n, np.nan)
        has_gen = np.zeros(n, dtype=bool)
        for g in case.generators:
            if not g.in_service:
                continue
            k = case.bus_position(g.bus)
            p_gen[k] += g.p_set
            q_gen[k] += g.q_set
            q_min[k] += g.q_min
            q_max[k] += g.q_max
            if not has_gen[k]:
                v_set[k] = g.v_set
            has_gen[k] = True
        self.q_min, self.q_max, self.has_gen = q_min, q_max, has_gen
        self.q_gen_sched = q_gen
        p_d = np.array([b.p_demand for b in case.buses])
        q_d = np.array([b.q_demand for b in case.buses])
        self.q_demand = q_d
        self.s_sched = (p_gen - p_d) + 1j * (q_gen - q_d)

        types = []
        for k, b in enumerate(case.buses):
            if b.bus_type == SLACK:
                types.append(SLACK)
            elif b.bus_type == PV and has_gen[k]:
                types.append(PV)
            else:
                types.append(PQ)
        self.types = types
        vm0 = np.array([b.v_mag_init for b in case.buses])
        self.v_set = np.where(has_gen, v_set, vm0)
        self.vm_init = vm0
        self.va_init = np.array([b.v_ang_init for b in case.buses])


def _mismatch(y, v, s_sched):
    return v * np.conj(y @ v) - s_sched


def _jacobian_dense(y, v):
    ibus = y @ v
    vnorm = v / np.abs(v)
    ds_dvm = v[:, None] * np.conj(y * vnorm[None, :]) + np.diag(np.conj(ibus) * vnorm)
    ds_dva = 1j * v[:, None] * np.conj(np.diag(ibus) - y * v[None, :])
    return ds_dva, ds_dvm


def _jacobian_sparse(y, v):
    ibus = y @ v
    dv = sp.diags(v)
    dvn = sp.diags(v / np.abs(v))
    dib = sp.diags(ibus)
    ds_dvm = dv @ np.conj(y @ dvn) + np.conj(dib) @ dvn
    ds_dva = 1j * dv @ np.conj(dib - y @ dv)
    return ds_dva, ds_dvm


def _newton(net: _Network, types, s_sched, v0, opts: PFOptions):
    pv = np.array([k for k, t in enumerate(types) if t == PV], dtype=np.int64)
    pq = np.array([k for k, t in enumerate(types) if t == PQ], dtype=np.int64)
    pvpq = np.r_[pv, pq]
    npvpq, npq = len(pvpq), len(pq)
    y = net.y
    v = v0.copy()
    vm = np.abs(v)
    va = np.angle(v)

    def residual(v):
        mis = _mismatch(y, v, s_sched)
        return np.r_[mis[pvpq].real, mis[pq].imag]

    fvec = residual(v)
    err = float(np.max(np.abs(fvec))) if len(fvec) else 0.0
    history = [err]
    it = 0
    converged = err <= opts.tol
    while not converged and it < opts.max_iter:
        it += 1
        if net.dense:
            dva, dvm = _jacobian_dense(y, v)
            j = np.block([
                [dva[np.ix_(pvpq, pvpq)].real, dvm[np.ix_(pvpq, pq)].real],
                [dva[np.ix_(pq, pvpq)].imag, dvm[np.ix_(pq, pq)].imag],
            ])
            try:
                dx = np.linalg.solve(j, -fvec)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian(f"Jacobian factorization failed at iteration {it}: {exc}") from None
        else:
            dva, dvm = _jacobian_sparse(y, v)
            j = sp.bmat([
                [dva[pvpq][:, pvpq].real, dvm[pvpq][:, pq].real],
                [dva[pq][:, pvpq].imag, dvm[pq][:, pq].imag],
            ], format="csc")
            try:
                dx = spla.splu(j).solve(-fvec)
            except RuntimeError as exc:
                raise SingularJacobian(f"Jacobian factorization failed at iteration {it}: {exc}") from None
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(f"non-finite Newton step at iteration {it}")
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:npvpq + npq]
        v = vm * np.exp(1j * va)
        fvec = residual(v)
        err = float(np.max(np.abs(fvec)))
        history.append(err)
        if not np.isfinite(err):
            break
        converged = err <= opts.tol
    return v, converged, it, err, history


def _initial_voltage(net: _Network, opts: PFOptions):
    slack = net.types.index(SLACK)
    if opts.start == "flat":
        # the slack angle is the reference and is kept from the case
        vm = np.ones(net.n)
        va = np.full(net.n, net.va_init[slack])
    else:
        vm = net.vm_init.copy()
        va = net.va_init.copy()
    gen_buses = np.array([t != PQ for t in net.types]) & net.has_gen
    vm = np.where(gen_buses, net.v_set, vm)
    if not net.has_gen[slack]:
        vm[slack] = net.vm_init[slack]
    return vm * np.exp(1j * va)


def solve_newton(case: PowerSystemCase, options: PFOptions | None = None, *,
                 ybus: AdmittanceMatrix | None = None) -> PowerFlowSolution:
    """Solve the power flow of ``case``.

    A solve that hits ``max_iter`` is returned with ``converged=False`` rather
    than raised.  With ``enforce_q_limits`` PV buses whose generator reactive
    output leaves ``[q_min, q_max]`` are fixed at the violated limit as PQ
    buses and the solve is repeated.
    """
    opts = options or PFOptions()
    net = _Network(case, ybus)
    types = list(net.types)
    s_sched = net.s_sched.copy()
    v0 = _initial_voltage(net, opts)
    total_it = 0
    history = []
    for _ in range(opts.max_q_outer + 1):
        v, converged, it, err, hist = _newton(net, types, s_sched, v0, opts)
        total_it += it
        history.extend(hist)
        if not (opts.enforce_q_limits and converged):
            break
        s_inj = v * np.conj(net.y @ v)
        q_gen = s_inj.imag + net.q_demand
        pv = [k for k, t in enumerate(types) if t == PV]
        over = [k for k in pv if q_gen[k] > net.q_max[k] + 1e-9]
        under = [k for k in pv if q_gen[k] < net.q_min[k] - 1e-9]
        if not over and not under:
            break
        for k in over:
            types[k] = PQ
            s_sched[k] = s_sched[k].real + 1j * (net.q_max[k] - net.q_demand[k])
        for k in under:
            types[k] = PQ
            s_sched[k] = s_sched[k].real + 1j * (net.q_min[k] - net.q_demand[k])
        log.debug("Q limits: %d PV buses switched to PQ", len(over) + len(under))
        v0 = v
    else:
        log.warning("Q-limit loop did not settle after %d passes", opts.max_q_outer)

    s_inj = v * np.conj(net.y @ v)
    pf, qf, pt, qt = compute_branch_flows(case, np.abs(v), np.angle(v), net.ybus)
    return PowerFlowSolution(
        v_mag=np.abs(v),
        v_ang=np.angle(v),
        p_inj=s_inj.real,
        q_inj=s_inj.imag,
        p_flow_from=pf,
        q_flow_from=qf,
        p_flow_to=pt,
        q_flow_to=qt,
        converged=bool(converged),
        iterations=total_it,
        max_mismatch=err,
        bus_types=tuple(types),
        mismatch_history=history,
    )


def mismatch_certificate(case: PowerSystemCase, sol: PowerFlowSolution) -> float:
    """Largest power mismatch of ``sol`` recomputed from scratch.

    Uses the solution's final bus types so Q-limited buses are checked against
    their binding limit.
    """
    net = _Network(case)
    types = sol.bus_types or tuple(net.types)
    v = sol.voltage
    mis = v * np.conj(net.y @ v) - net.s_sched
    worst = 0.0
    for k, t in enumerate(types):
        if t == SLACK:
            continue
        worst = max(worst, abs(mis[k].real))
        if t == PQ:
            if net.types[k] == PV:  # switched at a limit
                q = (v[k] * np.conj((net.y @ v)[k])).imag + net.q_demand[k]
                dq = min(abs(q - net.q_min[k]), abs(q - net.q_max[k]))
            else:
                dq = abs(mis[k].imag)
            worst = max(worst, dq)
    return worst
