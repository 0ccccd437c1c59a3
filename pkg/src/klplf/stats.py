"""Output moments, histogram PDFs/CDFs, KL divergence and comparison reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AllNodesDiverged, BinMismatch, IncompatibleRuns
from .sparse_grid import Interpolant, interpolate

log = logging.getLogger(__name__)

KLD_FLOOR = 1e-12
GUARD = 1e-9  # |reference| below this switches a relative error to absolute
DEFAULT_BINS = 100
DEFAULT_INTERP_SAMPLES = 100_000
CLASSES = ("V", "delta", "P_i", "Q_i", "P_ij", "Q_ij")


@dataclass(frozen=True, eq=False)
class Moments:
    mean: np.ndarray
    std: np.ndarray
    method: str  # quadrature | empirical | interpolant_sampling
    n: int
    notes: tuple = ()


def moments_quadrature(result) -> Moments:
    """Weighted moments over the grid nodes.

    Uses ``mean = sum(w f) / W`` and ``var = sum(w (f - mean)^2) / W`` with ``W``
    the weight of the converged nodes.  When every node converged ``W`` equals
    ``2**d`` up to round-off; otherwise the surviving weights are renormalized.
    """
    if result.grid is None:
        raise ValueError("quadrature moments need a collocation result")
    keep = result.included
    if not keep.any():
        raise AllNodesDiverged("no node converged")
    w = np.asarray(result.grid.weights)[keep]
    f = result.outputs[keep]
    total = math.fsum(w.tolist())
    mean = w @ f / total
    var = w @ (f - mean) ** 2 / total
    notes = ()
    if not keep.all():
        notes = (f"{int((~keep).sum())} diverged nodes excluded; weights renormalized "
                 f"by their surviving sum {total!r}",)
    return Moments(mean, np.sqrt(np.clip(var, 0.0, None)), "quadrature", int(keep.sum()), notes)


def moments_of_samples(x: np.ndarray, method: str = "empirical") -> Moments:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    mean = x.mean(axis=0)
    if n == 1:
        log.warning("a single sample has no spread; std reported as 0")
        return Moments(mean, np.zeros_like(mean), method, 1, ("single sample: std set to 0",))
    return Moments(mean, x.std(axis=0, ddof=1), method, n)


def moments_empirical(result) -> Moments:
    keep = result.included
    if not keep.any():
        raise AllNodesDiverged("no sample converged")
    return moments_of_samples(result.outputs[keep])


# ------------------------------------------------------------ distributions
@dataclass(frozen=True, eq=False)
class Distribution:
    edges: np.ndarray
    density: np.ndarray
    cdf_x: np.ndarray
    cdf_p: np.ndarray

    @property
    def masses(self) -> np.ndarray:
        return self.density * np.diff(self.edges)

    def pdf_csv(self, scale: float = 1.0) -> str:
        centers = 0.5 * (self.edges[:-1] + self.edges[1:]) * scale
        rows = ["value,density"] + [f"{c!r},{d / scale!r}" for c, d in zip(centers.tolist(), self.density.tolist())]
        return "\n".join(rows) + "\n"

    def cdf_csv(self, scale: float = 1.0) -> str:
        rows = ["value,cumulative_probability"]
        rows += [f"{x * scale!r},{p!r}" for x, p in zip(self.cdf_x.tolist(), self.cdf_p.tolist())]
        return "\n".join(rows) + "\n"


def shared_edges(*samples, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width edges over the pooled range of all sample sets.

    A range narrower than ``1e-9 * max(1, |value|)`` counts as a point mass and
    gets a single bin around it.
    """
    lo = min(float(np.min(s)) for s in samples)
    hi = max(float(np.max(s)) for s in samples)
    tiny = 1e-9 * max(1.0, abs(lo), abs(hi))
    if hi - lo <= tiny:
        mid = 0.5 * (lo + hi)
        return np.array([mid - tiny, mid + tiny])
    return np.linspace(lo, hi, n_bins + 1)


def histogram(samples, edges) -> Distribution:
    x = np.sort(np.asarray(samples, dtype=float))
    counts, _ = np.histogram(np.clip(x, edges[0], edges[-1]), bins=edges)
    density = counts / (len(x) * np.diff(edges))
    cdf_p = np.arange(1, len(x) + 1) / len(x)
    return Distribution(np.asarray(edges, dtype=float), density, x, cdf_p)


def sample_interpolant(interp: Interpolant, n_samples: int, seed: int) -> np.ndarray:
    """Surrogate outputs at ``n_samples`` uniform points, shape ``(n, q)``."""
    z = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n_samples, interp.grid.d))
    return interpolate(interp, z)


def distribution_from_interpolant(interp: Interpolant, column: int = 0, n_samples: int = DEFAULT_INTERP_SAMPLES,
                                  seed: int = 0, n_bins: int = DEFAULT_BINS, reference=None) -> Distribution:
    """Histogram PDF and empirical CDF of one surrogate output.

    With ``reference`` samples the bins span the pooled range so the result can
    be compared bin by bin with a histogram of the reference.
    """
    sub = Interpolant(interp.grid, interp.values[:, [column]])
    x = sample_interpolant(sub, n_samples, seed)[:, 0]
    edges = shared_edges(x, *(() if reference is None else (reference,)), n_bins=n_bins)
    return histogram(x, edges)


def kld(pdf_ref: Distribution, pdf_grid: Distribution) -> float:
    """Discrete KL divergence of the reference from the surrogate.

    Works on bin masses (density times width) with both floored at ``1e-12``
    inside the logarithm; natural log.  Bins with no reference mass add 0.
    """
    if pdf_ref.edges.shape != pdf_grid.edges.shape or not np.array_equal(pdf_ref.edges, pdf_grid.edges):
        raise BinMismatch("PDFs are not on identical bin edges")
    p = pdf_ref.masses
    q = pdf_grid.masses
    ratio = np.log(np.maximum(p, KLD_FLOOR) / np.maximum(q, KLD_FLOOR))
    return float(np.sum(np.where(p > 0, p * ratio, 0.0)))


def empty_bins(pdf_ref: Distribution, pdf_grid: Distribution) -> int:
    """Bins where the surrogate is empty but the reference is not (floor in use)."""
    return int(np.sum((pdf_grid.masses <= 0) & (pdf_ref.masses > 0)))


# ----------------------------------------------------------------- errors
@dataclass(frozen=True, eq=False)
class ErrorMetrics:
    eps_mu: np.ndarray  # percent, or absolute where mu_abs
    eps_sigma: np.ndarray
    mu_abs: np.ndarray  # True where the guard switched to absolute error
    sigma_abs: np.ndarray


def _rel(ref, val):
    ref = np.asarray(ref, dtype=float)
    val = np.asarray(val, dtype=float)
    guard = np.abs(ref) < GUARD
    diff = np.abs(ref - val)
    safe = np.where(guard, 1.0, np.abs(ref))
    return np.where(guard, diff, 100.0 * diff / safe), guard


def error_metrics(ref: Moments, grid: Moments) -> ErrorMetrics:
    """Relative mean and std errors in percent.

    Where the reference value is below ``1e-9`` in magnitude the absolute
    difference is reported instead and flagged.
    """
    if ref.mean.shape != grid.mean.shape:
        raise IncompatibleRuns(f"{ref.mean.shape} vs {grid.mean.shape} quantities")
    em, fm = _rel(ref.mean, grid.mean)
    es, fs = _rel(ref.std, grid.std)
    return ErrorMetrics(em, es, fm, fs)


# ----------------------------------------------------------------- report
@dataclass
class ClassRow:
    run: str
    cls: str
    n: int
    eps_mu_mean: float
    eps_mu_max: float
    eps_sigma_mean: float
    eps_sigma_max: float
    kld_mean: float
    kld_max: float
    n_abs_mu: int
    n_abs_sigma: int
    n_floored: int


@dataclass
class TimingRow:
    run: str
    mode: str
    n_samples: int
    t_eigenpairs: float
    t_grid: float
    t_kl: float
    t_pf: float
    t_total: float


@dataclass
class ComparisonReport:
    reference: str
    rows: list
    timing: list
    per_quantity: dict = field(default_factory=dict)  # run -> {column: [eps_mu, eps_sigma, kld]}
    notes: list = field(default_factory=list)
    n_bins: int = DEFAULT_BINS
    interp_samples: int = DEFAULT_INTERP_SAMPLES

    def row(self, run: str, cls: str) -> ClassRow:
        return next(r for r in self.rows if r.run == run and r.cls == cls)

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        doc = json.loads(text)
        doc["rows"] = [ClassRow(**r) for r in doc["rows"]]
        doc["timing"] = [TimingRow(**r) for r in doc["timing"]]
        return cls(**doc)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "class", "n", "eps_mu_pct_mean", "eps_mu_pct_max", "eps_sigma_pct_mean",
                    "eps_sigma_pct_max", "kld_mean", "kld_max", "n_abs_mu", "n_abs_sigma", "n_floored_bins"])
        for r in self.rows:
            w.writerow([r.run, r.cls, r.n, r.eps_mu_mean, r.eps_mu_max, r.eps_sigma_mean, r.eps_sigma_max,
                        r.kld_mean, r.kld_max, r.n_abs_mu, r.n_abs_sigma, r.n_floored])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "mode", "N_samples", "t_eigenpairs", "t_grid", "t_KL", "t_PF", "total"])
        for t in self.timing:
            w.writerow([t.run, t.mode, t.n_samples, t.t_eigenpairs, t.t_grid, t.t_kl, t.t_pf, t.t_total])
        return buf.getvalue()

    def text(self) -> str:
        lines = [f"reference: {self.reference}", f"bins: {self.n_bins}, surrogate samples: {self.interp_samples}", ""]
        lines.append(f"{'run':<16}{'class':<7}{'eps_mu%':>11}{'eps_sigma%':>12}{'KLD':>11}")
        for r in self.rows:
            lines.append(f"{r.run:<16}{r.cls:<7}{r.eps_mu_mean:>11.4g}{r.eps_sigma_mean:>12.4g}{r.kld_mean:>11.4g}")
        lines.append("")
        lines.append(f"{'run':<16}{'N':>8}{'t_eig':>9}{'t_grid':>9}{'t_KL':>9}{'t_PF':>9}{'total':>9}")
        for t in self.timing:
            lines.append(f"{t.run:<16}{t.n_samples:>8}{t.t_eigenpairs:>9.3f}{t.t_grid:>9.3f}"
                         f"{t.t_kl:>9.3f}{t.t_pf:>9.3f}{t.t_total:>9.3f}")
        if self.notes:
            lines.append("")
            lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def result_moments(result) -> Moments:
    return moments_quadrature(result) if result.grid is not None else moments_empirical(result)


def result_samples(result, n_samples: int = DEFAULT_INTERP_SAMPLES, seed: int = 0) -> np.ndarray:
    """Output samples: the stored MC outputs, or surrogate draws for a grid run."""
    if result.grid is None:
        return result.outputs[result.included]
    return sample_interpolant(surrogate(result), n_samples, seed)


def surrogate(result) -> Interpolant:
    """Interpolant over the grid outputs.

    Diverged nodes have no value; they are filled with the quadrature mean so
    the interpolant stays defined (noted in reports through the moments).
    """
    vals = result.outputs.copy()
    bad = ~result.included
    if bad.any():
        vals[bad] = moments_quadrature(result).mean
    return Interpolant(result.grid, vals)


def check_compatible(ref, other):
    if ref.case.checksum() != other.case.checksum():
        raise IncompatibleRuns("runs use different cases")
    if tuple(ref.columns) != tuple(other.columns):
        raise IncompatibleRuns("runs have different output columns")
    a, b = ref.xi_space.signature(), other.xi_space.signature()
    if a["d_total"] != b["d_total"] or [g["name"] for g in a["groups"]] != [g["name"] for g in b["groups"]] \
            or [g["d"] for g in a["groups"]] != [g["d"] for g in b["groups"]]:
        raise IncompatibleRuns("runs use different xi spaces")


def build_report(ref_result, *grid_results, names=None, n_bins: int = DEFAULT_BINS,
                 interp_samples: int = DEFAULT_INTERP_SAMPLES, seed: int = 0) -> ComparisonReport:
    """Per-class error/KLD tables of each run against the reference run.

    Class aggregates are the mean and the max over the class's elements; the
    per-element values are kept in ``per_quantity``.
    """
    if not grid_results:
        raise IncompatibleRuns("need at least one run to compare with the reference")
    names = list(names) if names else [f"run{k + 1}" for k in range(len(grid_results))]
    for g in grid_results:
        check_compatible(ref_result, g)
    ref_m = result_moments(ref_result)
    ref_x = result_samples(ref_result, interp_samples, seed)
    classes = np.array(ref_result.classes)
    report = ComparisonReport("reference", [], [], {}, list(ref_m.notes), n_bins, interp_samples)
    report.timing.append(_timing_row("reference", ref_result))
    for name, g in zip(names, grid_results):
        m = result_moments(g)
        report.notes.extend(f"{name}: {n}" for n in m.notes)
        em = error_metrics(ref_m, m)
        gx = result_samples(g, interp_samples, seed)
        klds = np.empty(len(ref_result.columns))
        floored = np.zeros(len(klds), dtype=int)
        for c in range(len(klds)):
            edges = shared_edges(ref_x[:, c], gx[:, c], n_bins=n_bins)
            pr, pg = histogram(ref_x[:, c], edges), histogram(gx[:, c], edges)
            klds[c] = kld(pr, pg)
            floored[c] = empty_bins(pr, pg)
        if floored.any():
            report.notes.append(f"{name}: {int((floored > 0).sum())} quantities hit the KLD floor")
        for cls in CLASSES:
            sel = classes == cls
            if not sel.any():
                continue
            report.rows.append(ClassRow(
                name, cls, int(sel.sum()),
                float(em.eps_mu[sel].mean()), float(em.eps_mu[sel].max()),
                float(em.eps_sigma[sel].mean()), float(em.eps_sigma[sel].max()),
                float(klds[sel].mean()), float(klds[sel].max()),
                int(em.mu_abs[sel].sum()), int(em.sigma_abs[sel].sum()), int((floored[sel] > 0).sum())))
        report.per_quantity[name] = {
            col: [float(em.eps_mu[c]), float(em.eps_sigma[c]), float(klds[c])]
            for c, col in enumerate(ref_result.columns)}
        report.timing.append(_timing_row(name, g))
    return report


def _timing_row(name, r) -> TimingRow:
    t = r.timing
    return TimingRow(name, r.mode, int(r.n_points), *(float(t.get(k, 0.0)) for k in
                                                      ("t_eigenpairs", "t_grid", "t_kl", "t_pf", "t_total")))
