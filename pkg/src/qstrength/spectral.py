"""Spectral analysis: overlaps, strength functions, chaos measures.

Given per-member eigen-decompositions of the mean-field operator H0 and the
full Hamiltonian H, the squared-overlap matrix between the two eigenbases is a
doubly stochastic array; rows of that array, selected by windows on the
standardized H0 spectrum and binned over the standardized H spectrum, give the
strength functions F_kappa(E).  Everything is gathered in raw-sum accumulators
(weights, weighted power sums, histograms) so that partial results merge
associatively and a parallel run reduces to the same numbers as a serial one.

Moments of a strength function are always computed from the raw overlap
weights; histograms are only for display and for the L1 comparison against the
conditional q-normal benchmark curve.  Chaos measures (number of principal
components and information entropy) are binned over the H spectrum the same
way, and the analytic NPC curve is available as a quadrature of the q-normal
densities for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bca import QParameterSet, strength_moment_prediction
from .qnormal import QuadratureError, f_cqn, f_qn, support

__all__ = [
    "DiagonalizationError",
    "StandardizedSpectrum",
    "StrengthReport",
    "ChaosMeasures",
    "BivariateMomentAccumulator",
    "EmpiricalBivariateMoments",
    "diagonalize",
    "overlaps",
    "standardize",
    "accumulate",
    "centroid_slope",
    "window_predictions",
    "strength_l1",
    "npc_integral",
]


class DiagonalizationError(RuntimeError):
    """Eigen-decomposition failed its reconstruction or orthonormality check."""


def diagonalize(
    mat: np.ndarray, residual_tol: float = 1e-9, orthonormal_tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.

    The reconstruction residual ||A u - u w|| and the Gram deviation of the
    eigenvector matrix are verified; failures raise DiagonalizationError (a
    LinAlgError from a non-converging solver propagates to the caller).
    """
    w, u = np.linalg.eigh(mat)
    scale = float(np.linalg.norm(mat))
    resid = float(np.linalg.norm(mat @ u - u * w))
    if resid > residual_tol * max(scale, 1e-300):
        raise DiagonalizationError(f"reconstruction residual {resid:.3e} vs scale {scale:.3e}")
    gram_dev = float(np.max(np.abs(u.T @ u - np.eye(len(w)))))
    if gram_dev > orthonormal_tol:
        raise DiagonalizationError(f"eigenvectors not orthonormal: deviation {gram_dev:.3e}")
    return w, u


def overlaps(u0: np.ndarray, u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Squared-overlap matrix W[kappa, E] = |<kappa|E>|^2 between two eigenbases.

    Both row sums (fixed kappa) and column sums (fixed E) must equal 1 within
    tol; this is the doubly stochastic contract every downstream accumulator
    relies on.
    """
    if u0.shape != u.shape:
        raise ValueError("eigenvector matrices must have identical shape")
    c = u0.T @ u
    wsq = c * c
    dev = max(
        float(np.max(np.abs(wsq.sum(axis=0) - 1.0))),
        float(np.max(np.abs(wsq.sum(axis=1) - 1.0))),
    )
    if dev > tol:
        raise ValueError(f"overlap matrix not doubly stochastic: deviation {dev:.3e}")
    return wsq


@dataclass(frozen=True)
class StandardizedSpectrum:
    """Eigenvalues shifted and scaled to zero centroid, unit width (population)."""

    e_hat: np.ndarray
    centroid: float
    width: float


def standardize(eigvals: np.ndarray) -> StandardizedSpectrum:
    centroid = float(np.mean(eigvals))
    width = float(np.std(eigvals))
    if width == 0.0:
        raise ValueError("spectrum has zero width; cannot standardize")
    return StandardizedSpectrum((eigvals - centroid) / width, centroid, width)


# ---------------------------------------------------------------------------
# strength-function accumulator


def _zeros(shape):
    return field(default_factory=lambda: np.zeros(shape))


@dataclass
class StrengthReport:
    """Mergeable raw sums for strength functions over H0 windows.

    windows is an (nwin, 2) array of [lo, hi) intervals on the standardized H0
    axis; edges the histogram bin edges on the standardized H axis.  All other
    fields are plain sums over members, so merge() is exact up to float
    associativity.
    """

    windows: np.ndarray
    edges: np.ndarray
    member_count: int = 0
    n_kappa: np.ndarray | None = None
    weight: np.ndarray | None = None
    sum_e0: np.ndarray | None = None
    power_sums: np.ndarray | None = None  # (nwin, 4): sum of w * e^p, p = 1..4
    hist: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.windows = np.asarray(self.windows, dtype=float).reshape(-1, 2)
        self.edges = np.asarray(self.edges, dtype=float)
        nwin, nbin = len(self.windows), len(self.edges) - 1
        if self.n_kappa is None:
            self.n_kappa = np.zeros(nwin)
        if self.weight is None:
            self.weight = np.zeros(nwin)
        if self.sum_e0 is None:
            self.sum_e0 = np.zeros(nwin)
        if self.power_sums is None:
            self.power_sums = np.zeros((nwin, 4))
        if self.hist is None:
            self.hist = np.zeros((nwin, nbin))

    # -- accumulation ------------------------------------------------------

    def add_member(self, e0_hat: np.ndarray, e_hat: np.ndarray, overlap_sq: np.ndarray) -> None:
        powers = np.array([e_hat, e_hat**2, e_hat**3, e_hat**4])
        for i, (lo, hi) in enumerate(self.windows):
            sel = (e0_hat >= lo) & (e0_hat < hi)
            if not np.any(sel):
                continue
            w = overlap_sq[sel].sum(axis=0)
            self.n_kappa[i] += int(np.count_nonzero(sel))
            self.weight[i] += float(w.sum())
            self.sum_e0[i] += float(e0_hat[sel].sum())
            self.power_sums[i] += powers @ w
            self.hist[i] += np.histogram(e_hat, bins=self.edges, weights=w)[0]
        self.member_count += 1

    def merge(self, other: "StrengthReport") -> "StrengthReport":
        if not (np.array_equal(self.windows, other.windows) and np.array_equal(self.edges, other.edges)):
            raise ValueError("cannot merge reports with different windows or grids")
        return StrengthReport(
            self.windows.copy(),
            self.edges.copy(),
            self.member_count + other.member_count,
            self.n_kappa + other.n_kappa,
            self.weight + other.weight,
            self.sum_e0 + other.sum_e0,
            self.power_sums + other.power_sums,
            self.hist + other.hist,
        )

    # -- derived views -----------------------------------------------------

    @property
    def window_centers(self) -> np.ndarray:
        return self.windows.mean(axis=1)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def e0_mean(self) -> np.ndarray:
        """Weight-averaged launch energy per window (nan where empty)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n_kappa > 0, self.sum_e0 / self.n_kappa, np.nan)

    def f_values(self) -> np.ndarray:
        """Normalized strength density per window: integrates to 1 over the grid."""
        widths = np.diff(self.edges)
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.hist / (self.weight[:, None] * widths[None, :])

    def window_moments(self) -> dict[str, np.ndarray]:
        """Empirical mean/variance/gamma1/gamma2 per window from the raw weights."""
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(self.weight > 0, self.weight, np.nan)
            m1 = self.power_sums[:, 0] / w
            m2 = self.power_sums[:, 1] / w
            m3 = self.power_sums[:, 2] / w
            m4 = self.power_sums[:, 3] / w
            var = m2 - m1**2
            mc3 = m3 - 3.0 * m1 * m2 + 2.0 * m1**3
            mc4 = m4 - 4.0 * m1 * m3 + 6.0 * m1**2 * m2 - 3.0 * m1**4
            return {
                "e0_mean": self.e0_mean,
                "mean": m1,
                "variance": var,
                "gamma1": mc3 / var**1.5,
                "gamma2": mc4 / var**2 - 3.0,
                "weight": self.weight.copy(),
                "n_kappa": self.n_kappa.copy(),
            }


def window_predictions(
    report: StrengthReport, qs: QParameterSet, m: int, t: int, k: int
) -> dict[str, np.ndarray]:
    """Predicted strength moments evaluated at each window's mean launch energy."""
    e0 = report.e0_mean
    cols = {"centroid": [], "variance": [], "gamma1": [], "gamma2": []}
    for e in e0:
        if math.isnan(e):
            for v in cols.values():
                v.append(np.nan)
            continue
        pred = strength_moment_prediction(float(e), qs, m, t, k)
        cols["centroid"].append(pred.centroid)
        cols["variance"].append(pred.variance)
        cols["gamma1"].append(pred.gamma1)
        cols["gamma2"].append(pred.gamma2)
    return {key: np.asarray(v) for key, v in cols.items()}


def strength_l1(report: StrengthReport, qs: QParameterSet) -> np.ndarray:
    """L1 distance per window between binned strength and the conditional q-normal.

    The benchmark density f_CqN(x | e0_mean; xi, q_hv) is evaluated at the bin
    centers, so this measures both statistical noise and binning resolution.
    """
    f_emp = report.f_values()
    widths = np.diff(report.edges)
    out = np.full(len(report.windows), np.nan)
    for i, e0 in enumerate(report.e0_mean):
        if math.isnan(e0) or not np.all(np.isfinite(f_emp[i])):
            continue
        bench = f_cqn(report.bin_centers, float(e0), qs.xi, qs.q_hv)
        out[i] = float(np.sum(np.abs(f_emp[i] - bench) * widths))
    return out


def centroid_slope(report: StrengthReport, e0_max: float | None = None) -> float:
    """Weighted through-origin slope of window centroids against launch energy."""
    mom = report.window_moments()
    e0, mean, w = mom["e0_mean"], mom["mean"], mom["weight"]
    keep = np.isfinite(e0) & np.isfinite(mean)
    if e0_max is not None:
        keep &= np.abs(e0) <= e0_max
    if not np.any(keep & (np.abs(e0) > 0)):
        raise ValueError("no off-center windows available for a slope fit")
    num = float(np.sum(w[keep] * e0[keep] * mean[keep]))
    den = float(np.sum(w[keep] * e0[keep] ** 2))
    return num / den


# ---------------------------------------------------------------------------
# chaos measures


@dataclass
class ChaosMeasures:
    """Binned number of principal components and information entropy.

    Per H eigenstate, ipr = sum_kappa W^2 and ent = -sum_kappa W ln W over its
    overlap column; bins collect sums and state counts so that
    npc = count / ipr_sum (the inverse of the bin-averaged ipr) and
    s_info = ent_sum / count.
    """

    edges: np.ndarray
    member_count: int = 0
    count: np.ndarray | None = None
    ipr_sum: np.ndarray | None = None
    ent_sum: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=float)
        nbin = len(self.edges) - 1
        if self.count is None:
            self.count = np.zeros(nbin)
        if self.ipr_sum is None:
            self.ipr_sum = np.zeros(nbin)
        if self.ent_sum is None:
            self.ent_sum = np.zeros(nbin)

    def add_member(self, e_hat: np.ndarray, overlap_sq: np.ndarray) -> None:
        ipr = np.sum(overlap_sq**2, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(overlap_sq > 0.0, np.log(overlap_sq), 0.0)
        ent = -np.sum(overlap_sq * logs, axis=0)
        self.count += np.histogram(e_hat, bins=self.edges)[0]
        self.ipr_sum += np.histogram(e_hat, bins=self.edges, weights=ipr)[0]
        self.ent_sum += np.histogram(e_hat, bins=self.edges, weights=ent)[0]
        self.member_count += 1

    def merge(self, other: "ChaosMeasures") -> "ChaosMeasures":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge chaos measures with different grids")
        return ChaosMeasures(
            self.edges.copy(),
            self.member_count + other.member_count,
            self.count + other.count,
            self.ipr_sum + other.ipr_sum,
            self.ent_sum + other.ent_sum,
        )

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def npc(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.count > 0, self.count / self.ipr_sum, np.nan)

    def s_info(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.count > 0, self.ent_sum / self.count, np.nan)


def npc_integral(
    x: np.ndarray, qs: QParameterSet, dim: int, tol: float = 1e-6
) -> np.ndarray:
    """Analytic NPC curve: (dim/3) over the overlap integral of q-normal densities.

    NPC(x) = (dim/3) * [ integral dy f_qN(y|q_h) f_CqN(x|y; xi, q_hv)^2
                         / f_qN(x|q_H)^2 ]^{-1},
    integrated over the support of the smallest of the three q values.  Entries
    where x falls outside the relevant supports (or the marginal underflows)
    are nan.  Raises QuadratureError when the integrator cannot reach tol.
    """
    from scipy.integrate import quad

    q0 = min(qs.q_h, qs.q_H, qs.q_hv)
    lim = support(q0).hi
    xi = qs.xi
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(x.shape, np.nan)
    sup_h_big = support(qs.q_H)
    sup_hv = support(qs.q_hv)
    for i, xx in enumerate(x):
        if not (sup_h_big.contains(xx) and sup_hv.contains(xx)):
            continue
        fx = f_qn(float(xx), qs.q_H)
        if fx < 1e-12:
            continue

        def integrand(y: float) -> float:
            if abs(y) >= lim:
                return 0.0
            return f_qn(y, qs.q_h) * f_cqn(float(xx), y, xi, qs.q_hv) ** 2

        val, err = quad(integrand, -lim, lim, epsabs=0.0, epsrel=0.1 * tol, limit=300)
        if err > tol * abs(val):
            raise QuadratureError(f"NPC integral at x={xx}: error {err:.3e} of {val:.3e}")
        out[i] = (dim / 3.0) / (val / fx**2)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# bivariate trace moments


@dataclass(frozen=True)
class EmpiricalBivariateMoments:
    """Ensemble-trace bivariate moments plus member-to-member statistics.

    The headline values are ratios of ensemble-averaged traces; member_mean and
    member_std hold the mean and spread of the per-member reduced moments, for
    error-band comparisons.
    """

    member_count: int
    sigma_h0: float
    sigma_h: float
    mu11: float
    mu40: float
    mu04: float
    mu31: float
    mu13: float
    mu22: float
    member_mean: dict
    member_std: dict


_REDUCED_NAMES = ("mu11", "mu40", "mu04", "mu31", "mu13", "mu22")


@dataclass
class BivariateMomentAccumulator:
    """Sums of per-member centered traces (1/d) tr(H0^P H^Q), P + Q <= 4."""

    member_count: int = 0
    trace_sums: np.ndarray = _zeros(12)  # T20 T11 T02 T30 T21 T12 T03 T40 T31 T22 T13 T04
    value_sums: np.ndarray = _zeros(6)  # per-member reduced moments, _REDUCED_NAMES order
    value_sq_sums: np.ndarray = _zeros(6)

    def add_member(self, h0: np.ndarray, h: np.ndarray) -> None:
        d = len(h0)
        ident = np.eye(d)
        h0c = h0 - (np.trace(h0) / d) * ident
        hc = h - (np.trace(h) / d) * ident
        a = h0c @ h0c
        b = hc @ hc
        r = h0c @ hc
        t20 = float(np.trace(a)) / d
        t11 = float(np.sum(h0c * hc)) / d
        t02 = float(np.trace(b)) / d
        t30 = float(np.sum(a * h0c)) / d
        t21 = float(np.sum(a * hc)) / d
        t12 = float(np.sum(b * h0c)) / d
        t03 = float(np.sum(b * hc)) / d
        t40 = float(np.sum(a * a)) / d
        t31 = float(np.sum(a * r.T)) / d
        t22 = float(np.sum(a * b)) / d
        t13 = float(np.sum(r * b)) / d
        t04 = float(np.sum(b * b)) / d
        self.trace_sums += np.array(
            [t20, t11, t02, t30, t21, t12, t03, t40, t31, t22, t13, t04]
        )
        s1, s2 = math.sqrt(t20), math.sqrt(t02)
        vals = np.array(
            [
                t11 / (s1 * s2),
                t40 / s1**4,
                t04 / s2**4,
                t31 / (s1**3 * s2),
                t13 / (s1 * s2**3),
                t22 / (s1**2 * s2**2),
            ]
        )
        self.value_sums += vals
        self.value_sq_sums += vals**2
        self.member_count += 1

    def merge(self, other: "BivariateMomentAccumulator") -> "BivariateMomentAccumulator":
        return BivariateMomentAccumulator(
            self.member_count + other.member_count,
            self.trace_sums + other.trace_sums,
            self.value_sums + other.value_sums,
            self.value_sq_sums + other.value_sq_sums,
        )

    def finalize(self) -> EmpiricalBivariateMoments:
        if self.member_count == 0:
            raise ValueError("no members accumulated")
        n = self.member_count
        t20, t11, t02, _, _, _, _, t40, t31, t22, t13, t04 = self.trace_sums / n
        s1, s2 = math.sqrt(t20), math.sqrt(t02)
        mean = self.value_sums / n
        var = np.maximum(self.value_sq_sums / n - mean**2, 0.0)
        std = np.sqrt(var)
        return EmpiricalBivariateMoments(
            member_count=n,
            sigma_h0=s1,
            sigma_h=s2,
            mu11=t11 / (s1 * s2),
            mu40=t40 / s1**4,
            mu04=t04 / s2**4,
            mu31=t31 / (s1**3 * s2),
            mu13=t13 / (s1 * s2**3),
            mu22=t22 / (s1**2 * s2**2),
            member_mean=dict(zip(_REDUCED_NAMES, mean)),
            member_std=dict(zip(_REDUCED_NAMES, std)),
        )


def accumulate(a, b):
    """Merge two compatible accumulators (strength, chaos, or moments)."""
    if type(a) is not type(b):
        raise TypeError(f"cannot merge {type(a).__name__} with {type(b).__name__}")
    return a.merge(b)
