"""Monte-Carlo ensemble runner for the two-scale random Hamiltonian.

Each member draws independent GOE matrices for the rank-t mean field (stream 0)
and the rank-k interaction (stream 1), embeds both into the m-particle
determinant space, and builds H = H0 + lam * V.  Members are completely
determined by (master seed, member index), so any subset can be recomputed
anywhere; worker processes only change where a member is computed, never its
result.  Partial accumulators come back to the parent and are merged in member
order, which makes the final numbers byte-identical for any worker count.

The runner produces three mergeable products: a StrengthReport (overlap rows
selected by windows on the standardized H0 spectrum), ChaosMeasures (NPC and
information entropy binned on the standardized H spectrum), and optionally a
BivariateMomentAccumulator of centered trace moments through fourth order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bca, fock, spectral

__all__ = ["RunConfig", "EnsembleResult", "run_ensemble", "run_member", "run_checks"]

DEFAULT_WINDOW_CENTERS = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class RunConfig:
    """Everything a simulation needs; exactly one of lam / xi_sq_target is set."""

    N: int
    m: int
    t: int
    k: int
    lam: float | None = None
    xi_sq_target: float | None = None
    members: int = 100
    seed: int = 2024
    window_centers: tuple[float, ...] = DEFAULT_WINDOW_CENTERS
    window_width: float = 0.1
    grid_lo: float = -3.2
    grid_hi: float = 3.2
    grid_bins: int = 64
    workers: int = 1
    with_strength: bool = True
    with_moments: bool = False

    def __post_init__(self) -> None:
        if (self.lam is None) == (self.xi_sq_target is None):
            raise ValueError("set exactly one of lam and xi_sq_target")
        if self.members < 1:
            raise ValueError("members must be >= 1")
        if self.window_width <= 0:
            raise ValueError("window_width must be positive")
        if not self.grid_lo < self.grid_hi:
            raise ValueError("grid_lo must be below grid_hi")
        if self.grid_bins < 1:
            raise ValueError("grid_bins must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.system()  # validates N, m, t, k and the resolved coupling

    def resolved_lam(self) -> float:
        if self.lam is not None:
            return self.lam
        return bca.lam_for_xi_sq(self.N, self.m, self.t, self.k, self.xi_sq_target)

    def system(self) -> bca.SystemParams:
        return bca.SystemParams(self.N, self.m, self.t, self.k, self.resolved_lam())

    def windows(self) -> np.ndarray:
        c = np.asarray(self.window_centers, dtype=float)
        half = 0.5 * self.window_width
        return np.column_stack([c - half, c + half])

    def edges(self) -> np.ndarray:
        return np.linspace(self.grid_lo, self.grid_hi, self.grid_bins + 1)


@dataclass(frozen=True)
class EnsembleResult:
    config: RunConfig
    system: bca.SystemParams
    strength: spectral.StrengthReport | None
    chaos: spectral.ChaosMeasures | None
    moments: spectral.BivariateMomentAccumulator | None
    failures: tuple[tuple[int, str], ...]

    @property
    def xi_sq_finite(self) -> float:
        return bca.xi_sq_finite(self.config.N, self.config.m, self.config.t, self.config.k, self.system.lam)

    @property
    def qs_finite(self) -> bca.QParameterSet:
        c = self.config
        return bca.q_params_finite(c.N, c.m, c.t, c.k, self.xi_sq_finite)

    @property
    def qs_infinite(self) -> bca.QParameterSet:
        c = self.config
        p = self.system
        return bca.q_params_infinite(c.m, c.t, c.k, bca.xi_infinite(p) ** 2)


def _empty_partials(cfg: RunConfig):
    strength = spectral.StrengthReport(cfg.windows(), cfg.edges()) if cfg.with_strength else None
    chaos = spectral.ChaosMeasures(cfg.edges()) if cfg.with_strength else None
    moments = spectral.BivariateMomentAccumulator() if cfg.with_moments else None
    return strength, chaos, moments


def run_member(cfg: RunConfig, member: int):
    """Compute one member's partial accumulators (member_count = 1 each).

    Returns (strength, chaos, moments, error); a diagonalization failure gives
    (None, None, None, message) and the member is skipped by the reducer.
    """
    lam = cfg.resolved_lam()
    basis_m = fock.build_basis(cfg.N, cfg.m)
    basis_t = fock.build_basis(cfg.N, cfg.t)
    basis_k = fock.build_basis(cfg.N, cfg.k)
    h0 = fock.embed_k_body(
        fock.sample_goe(basis_t.dim, cfg.seed, member, stream=0).matrix, basis_m, basis_t
    )
    v = fock.embed_k_body(
        fock.sample_goe(basis_k.dim, cfg.seed, member, stream=1).matrix, basis_m, basis_k
    )
    h = fock.compose_hamiltonian(h0, v, lam)
    strength, chaos, moments = _empty_partials(cfg)
    try:
        if cfg.with_strength:
            w0, u0 = spectral.diagonalize(h0)
            if lam == 0.0:
                # H and H0 are the same matrix, so each eigenstate overlaps
                # only itself; use the exact identity rather than re-squaring
                # rounded eigenvectors.
                e0 = e1 = spectral.standardize(w0).e_hat
                wsq = np.eye(basis_m.dim)
            else:
                w1, u1 = spectral.diagonalize(h)
                wsq = spectral.overlaps(u0, u1)
                e0 = spectral.standardize(w0).e_hat
                e1 = spectral.standardize(w1).e_hat
            strength.add_member(e0, e1, wsq)
            chaos.add_member(e1, wsq)
        if cfg.with_moments:
            moments.add_member(h0, h)
    except (np.linalg.LinAlgError, spectral.DiagonalizationError, ValueError) as exc:
        return None, None, None, f"member {member}: {exc}"
    return strength, chaos, moments, None


def _task(args):
    return run_member(*args)


def run_ensemble(cfg: RunConfig) -> EnsembleResult:
    """Run all members and reduce their partials in member order."""
    # Build plan caches up front so forked workers inherit them.
    basis_m = fock.build_basis(cfg.N, cfg.m)
    for rank in {cfg.t, cfg.k}:
        fock.embed_k_body(
            np.zeros((fock.build_basis(cfg.N, rank).dim,) * 2), basis_m, fock.build_basis(cfg.N, rank)
        )
    tasks = [(cfg, member) for member in range(cfg.members)]
    strength, chaos, moments = _empty_partials(cfg)
    failures: list[tuple[int, str]] = []

    def _reduce(partials) -> None:
        nonlocal strength, chaos, moments
        for member, (ps, pc, pm, err) in enumerate(partials):
            if err is not None:
                failures.append((member, err))
                continue
            if ps is not None:
                strength = strength.merge(ps)
            if pc is not None:
                chaos = chaos.merge(pc)
            if pm is not None:
                moments = moments.merge(pm)

    if cfg.workers == 1:
        _reduce(map(_task, tasks))
    else:
        chunk = max(1, cfg.members // (4 * cfg.workers))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            _reduce(pool.map(_task, tasks, chunksize=chunk))
    return EnsembleResult(cfg, cfg.system(), strength, chaos, moments, tuple(failures))


def run_checks(result: EnsembleResult) -> list[tuple[str, bool, str]]:
    """Tolerance checks mirroring the package's acceptance gates.

    Returns (name, passed, detail) triples; strength checks compare against the
    finite-N predictions, so they are meaningful for any config with 0 < xi < 1.
    """
    checks: list[tuple[str, bool, str]] = []
    checks.append(
        (
            "members-completed",
            not result.failures,
            f"{result.config.members - len(result.failures)}/{result.config.members}",
        )
    )
    rep = result.strength
    if rep is None or result.system.lam == 0.0:
        if result.chaos is not None and result.system.lam == 0.0:
            npc = result.chaos.npc()
            good = np.nanmax(np.abs(npc - 1.0)) == 0.0 and np.nanmax(result.chaos.s_info()) == 0.0
            checks.append(("uncoupled-npc-unity", bool(good), "NPC=1, S_info=0 required at lam=0"))
        return checks
    qs = result.qs_finite
    cfg = result.config
    xi = qs.xi
    mom = rep.window_moments()
    pred = spectral.window_predictions(rep, qs, cfg.m, cfg.t, cfg.k)
    e0 = mom["e0_mean"]
    ok_w = np.isfinite(e0)

    slope = spectral.centroid_slope(rep, e0_max=2.0)
    passed = abs(slope - xi) <= 0.03 * xi
    checks.append(("centroid-slope", bool(passed), f"slope={slope:.4f} xi={xi:.4f}"))

    sel = ok_w & (np.abs(e0) <= 2.0)
    dev = np.max(np.abs(mom["variance"][sel] - (1 - qs.xi_sq))) / (1 - qs.xi_sq)
    checks.append(("variance-flat", bool(dev <= 0.05), f"max rel dev {dev:.3f}"))

    sel = ok_w & (np.abs(e0) <= 1.5) & (np.abs(e0) >= 0.25)
    g_emp, g_pred = mom["gamma1"][sel], pred["gamma1"][sel]
    rel = np.max(np.abs(g_emp - g_pred) / np.abs(g_pred))
    signs = np.all(np.sign(g_emp) == -np.sign(e0[sel]))
    checks.append(
        ("gamma1-windows", bool(rel <= 0.10 and signs), f"max rel dev {rel:.3f}, sign flip {signs}")
    )

    sel = ok_w & (np.abs(e0) <= 2.0)
    g2dev = np.max(np.abs(mom["gamma2"][sel] - pred["gamma2"][sel]))
    checks.append(("gamma2-windows", bool(g2dev <= 0.15), f"max abs dev {g2dev:.3f}"))

    sel = ok_w & (np.abs(e0) <= 1.0)
    l1 = spectral.strength_l1(rep, qs)[sel]
    checks.append(("strength-l1", bool(np.nanmax(l1) < 0.1), f"max L1 {np.nanmax(l1):.3f}"))
    return checks
