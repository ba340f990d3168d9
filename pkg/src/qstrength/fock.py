"""Fermionic Fock-space bases and embedding of few-body random operators.

A determinant basis for m fermions in n_orb single-particle states is held as
an ascending array of occupation bitmasks (bit i set = orbital i occupied).
A rank-r operator W = sum_{ab} w_ab B+(a) B(b), with a, b running over the
r-particle determinants and B+(a) the ascending-order product of creation
operators, is embedded into the m-particle space by summing over all ways of
splitting a determinant into an active r-particle part and an (m-r)-particle
spectator part.  The anticommutation phase for pulling an active set out of a
determinant is the parity of the number of (active, spectator) orbital pairs
in crossing order.

Embedding all pairs naively is slow, so the decomposition is precomputed once
per (n_orb, m, r) as flat index/sign arrays ("plan"); embedding a particular
coefficient matrix is then a single weighted bincount.  Plans are cached on the
module, keyed by shape, and reused across ensemble members.

Defining matrices are drawn from the Gaussian orthogonal ensemble with
off-diagonal variance 1 and diagonal variance 2, deterministically seeded per
(master seed, member index, operator stream) so that ensembles are reproducible
and independent between the mean-field and interaction streams.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FockBasis",
    "GoeSample",
    "build_basis",
    "boson_dim",
    "sample_goe",
    "embed_k_body",
    "compose_hamiltonian",
    "clear_plan_cache",
]

BASIS_DIM_CAP = 200_000
_MAX_ORBITALS = 64


@dataclass(frozen=True)
class FockBasis:
    """Determinant basis: all n_part-bit masks over n_orb orbitals, ascending."""

    n_orb: int
    n_part: int
    states: np.ndarray = field(repr=False)
    index: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class GoeSample:
    """A GOE draw plus the seed coordinates that reproduce it."""

    matrix: np.ndarray = field(repr=False)
    dim: int
    master_seed: int
    member: int
    stream: int = 0

    @property
    def seed_tag(self) -> tuple[int, int]:
        return (self.master_seed, self.member)


def boson_dim(n_orb: int, n_part: int) -> int:
    """Dimension binom(n_orb + n_part - 1, n_part) of the symmetric counterpart."""
    if n_orb < 1 or n_part < 0:
        raise ValueError("need n_orb >= 1 and n_part >= 0")
    return math.comb(n_orb + n_part - 1, n_part)


def build_basis(n_orb: int, n_part: int, cap: int = BASIS_DIM_CAP) -> FockBasis:
    """Enumerate the fermion determinant basis in ascending bitmask order."""
    if not 0 <= n_part <= n_orb:
        raise ValueError(f"need 0 <= n_part <= n_orb, got {n_part}, {n_orb}")
    if n_orb > _MAX_ORBITALS:
        raise ValueError(f"bitmask representation limited to {_MAX_ORBITALS} orbitals")
    dim = math.comb(n_orb, n_part)
    if dim > cap:
        raise ValueError(f"basis dimension {dim} exceeds cap {cap}")
    masks = sorted(
        sum(1 << o for o in occ) for occ in itertools.combinations(range(n_orb), n_part)
    )
    states = np.array(masks, dtype=np.uint64)
    return FockBasis(n_orb, n_part, states, {mk: i for i, mk in enumerate(masks)})


def sample_goe(dim: int, master_seed: int, member: int, stream: int = 0) -> GoeSample:
    """Symmetric GOE matrix: off-diagonal variance 1, diagonal variance 2.

    The generator is seeded by (master_seed, member, stream), so any member of
    any operator stream can be regenerated in isolation, in any process.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(member, stream))
    a = np.random.default_rng(ss).standard_normal((dim, dim))
    return GoeSample((a + a.T) / math.sqrt(2.0), dim, master_seed, member, stream)


# ---------------------------------------------------------------------------
# embedding plans


@dataclass(frozen=True)
class _EmbeddingPlan:
    flat: np.ndarray  # mu*dim + nu positions in the embedded matrix
    sign: np.ndarray  # +-1 phase products
    row_a: np.ndarray  # active bra index in the rank-r basis
    col_b: np.ndarray  # active ket index in the rank-r basis
    dim: int


_PLAN_CACHE: dict[tuple[int, int, int], _EmbeddingPlan] = {}


def clear_plan_cache() -> None:
    _PLAN_CACHE.clear()


def _crossing_parity(active: tuple[int, ...], spectator_mask: int) -> int:
    """Parity of annihilating the active orbitals (ascending) out of the union."""
    par = 0
    for a in active:
        par ^= (spectator_mask & ((1 << a) - 1)).bit_count() & 1
    return par


def _build_plan(basis_m: FockBasis, basis_r: FockBasis) -> _EmbeddingPlan:
    n_orb, m, r = basis_m.n_orb, basis_m.n_part, basis_r.n_part
    d = basis_m.dim
    idx_m, idx_r = basis_m.index, basis_r.index
    flats, signs, rows, cols = [], [], [], []
    for gamma in itertools.combinations(range(n_orb), m - r):
        gmask = sum(1 << o for o in gamma)
        free = [o for o in range(n_orb) if not gmask >> o & 1]
        mu_idx, act_idx, s = [], [], []
        for alpha in itertools.combinations(free, r):
            amask = sum(1 << o for o in alpha)
            mu_idx.append(idx_m[amask | gmask])
            act_idx.append(idx_r[amask])
            s.append(-1 if _crossing_parity(alpha, gmask) else 1)
        mu = np.asarray(mu_idx, dtype=np.int64)
        act = np.asarray(act_idx, dtype=np.int32)
        sv = np.asarray(s, dtype=np.int8)
        n = len(mu)
        flats.append((mu[:, None] * d + mu[None, :]).ravel())
        signs.append((sv[:, None] * sv[None, :]).ravel())
        rows.append(np.repeat(act, n))
        cols.append(np.tile(act, n))
    return _EmbeddingPlan(
        np.concatenate(flats),
        np.concatenate(signs),
        np.concatenate(rows),
        np.concatenate(cols),
        d,
    )


def _plan_for(basis_m: FockBasis, basis_r: FockBasis) -> _EmbeddingPlan:
    key = (basis_m.n_orb, basis_m.n_part, basis_r.n_part)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = _PLAN_CACHE[key] = _build_plan(basis_m, basis_r)
    return plan


def embed_k_body(coeffs: np.ndarray, basis_m: FockBasis, basis_r: FockBasis) -> np.ndarray:
    """Embed a rank-r coefficient matrix into the m-particle determinant basis.

    coeffs[a, b] multiplies B+(a) B(b) summed over all rank-r determinant pairs;
    the result is the dense m-particle matrix.  Symmetric input gives an exactly
    symmetric output.
    """
    if basis_r.n_orb != basis_m.n_orb:
        raise ValueError("bases must share the orbital set")
    if not 0 <= basis_r.n_part <= basis_m.n_part:
        raise ValueError("operator rank must not exceed the particle number")
    if coeffs.shape != (basis_r.dim, basis_r.dim):
        raise ValueError(f"coefficient matrix must be {basis_r.dim} x {basis_r.dim}")
    plan = _plan_for(basis_m, basis_r)
    vals = plan.sign * coeffs[plan.row_a, plan.col_b]
    out = np.bincount(plan.flat, weights=vals, minlength=plan.dim**2).reshape(
        plan.dim, plan.dim
    )
    return 0.5 * (out + out.T)


def compose_hamiltonian(h0: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """H = H0 + lam * V on the common m-particle basis."""
    if h0.shape != v.shape:
        raise ValueError("operators live on different bases")
    return h0 + lam * v
