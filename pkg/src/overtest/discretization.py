"""Restrictions, stiffness assembly, stability constants and greedy overtesting.

Stability constants are computed basis-free.  The reference data matrix of a
trial space is factored once by SVD; coefficient vectors are then
parametrized so that the reference data of a direction ``c`` is ``U c`` with
orthonormal ``U``.  All random sampling happens in that geometry, so a badly
conditioned basis (kernel translates, monomials) does not bias the search.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .functionals import DataMap, Functional, apply_all, functional_from_description
from .trialspaces import TrialSpace

log = logging.getLogger(__name__)


class GreedyBudgetExhausted(RuntimeError):
    """The pool could not stabilize the space within the size budget."""

    def __init__(self, msg, restriction, estimate):
        super().__init__(msg)
        self.restriction = restriction
        self.estimate = estimate


@dataclass(frozen=True, eq=False)
class Restriction:
    """An ordered finite set of functionals with sup-norm semantics."""

    functionals: tuple

    def __post_init__(self):
        object.__setattr__(self, "functionals", tuple(self.functionals))

    def __len__(self):
        return len(self.functionals)

    def __iter__(self):
        return iter(self.functionals)

    def values(self, target) -> np.ndarray:
        return apply_all(self.functionals, target)

    def norm(self, target) -> float:
        """``||R_N D u||`` as the max modulus of the restricted data."""
        return float(np.max(np.abs(self.values(target))))

    def issubset(self, other: "Restriction") -> bool:
        return set(self.functionals) <= set(other.functionals)

    def union(self, other: "Restriction") -> "Restriction":
        seen = set(self.functionals)
        return Restriction(self.functionals + tuple(f for f in other.functionals if f not in seen))

    def to_manifest(self, path) -> None:
        with open(path, "w") as fh:
            for lam in self.functionals:
                fh.write(json.dumps(lam.describe()) + "\n")

    @classmethod
    def from_manifest(cls, path) -> "Restriction":
        with open(path) as fh:
            return cls(tuple(functional_from_description(json.loads(line)) for line in fh if line.strip()))


@dataclass(frozen=True, eq=False)
class StiffnessMatrix:
    entries: np.ndarray
    row_functionals: tuple
    column_space: TrialSpace

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, a):
        return self.entries @ a


def assemble(space: TrialSpace, restriction: Restriction) -> StiffnessMatrix:
    """``A[k, j] = lambda_k(u_j)``."""
    funcs = tuple(restriction.functionals)
    return StiffnessMatrix(apply_all(funcs, space), funcs, space)


@dataclass
class StabilityEstimate:
    constant: float
    witness: np.ndarray  # coefficient vector in the space's own basis
    samples: int
    reference_density: int
    reference_size: int = 0
    certified: bool = False

    def ratio_at(self, ref_matrix: np.ndarray, restricted: np.ndarray) -> float:
        return _ratio(ref_matrix @ self.witness, restricted @ self.witness)


def _ratio(num_vals, den_vals) -> float:
    num = np.max(np.abs(num_vals))
    den = np.max(np.abs(den_vals)) if len(den_vals) else 0.0
    if den <= 0:
        return np.inf if num > 0 else 0.0
    return float(num / den)


@dataclass
class DataGeometry:
    """Coordinates in which the reference data map is an isometry onto its range."""

    ref: np.ndarray  # original reference matrix (n_ref, M)
    U: np.ndarray  # (n_ref, r) orthonormal
    T: np.ndarray  # (M, r): a = T c  =>  ref @ a = U c

    @classmethod
    def from_matrix(cls, ref: np.ndarray, rtol: float = 1e-12) -> "DataGeometry":
        U, S, Vt = np.linalg.svd(ref, full_matrices=False)
        r = int(np.sum(S > rtol * S[0])) if S.size and S[0] > 0 else 0
        return cls(ref, U[:, :r], Vt[:r].T / S[:r])

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def to_coords(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self.T


def _lp_row(q: np.ndarray, B: np.ndarray):
    """Maximize ``q.c`` subject to ``|B c| <= 1``; ``None`` if unbounded."""
    r = len(q)
    res = linprog(-q, A_ub=np.vstack([B, -B]), b_ub=np.ones(2 * len(B)),
                  bounds=[(None, None)] * r, method="highs")
    if res.status == 3:
        return None
    if res.status != 0:
        return np.zeros(r)
    return res.x


def _null_direction(B: np.ndarray, r: int, tol: float = 1e-11):
    if len(B) < r:
        _, s, Vt = np.linalg.svd(B, full_matrices=True) if len(B) else (None, np.zeros(0), np.eye(r))
        return Vt[-1]
    _, s, Vt = np.linalg.svd(B, full_matrices=False)
    if s[-1] <= tol * max(1.0, s[0]):
        return Vt[-1]
    return None


@dataclass
class _Estimate:
    ratio: float
    c: np.ndarray
    certified: bool
    lps: int = 0


def estimate_in_coords(B: np.ndarray, geom: DataGeometry, rng: np.random.Generator,
                       samples: int = 2000, polish: bool = True, max_lp: int = 400,
                       stop_above: Optional[float] = None) -> _Estimate:
    """Estimate ``max_c ||U c||_inf / ||B c||_inf`` from below, exactly when possible.

    Monte Carlo over the unit sphere and a coordinate-wise polish give a
    first lower bound.  Each reference row ``u_i`` then gets the upper bound
    ``||y_i||_1`` from any ``y_i`` with ``B^T y_i = u_i``; rows are solved as
    LPs (``max u_i.c`` s.t. ``|B c| <= 1``) in decreasing bound order until
    the bound drops below the best ratio found.  The result is certified
    exact for the reference rows when that happens within ``max_lp`` LPs.
    ``stop_above`` ends the search as soon as a ratio beyond it is found.
    """
    U = geom.U
    r = geom.rank
    if r == 0:
        return _Estimate(0.0, np.zeros(0), True)
    null = _null_direction(B, r)
    if null is not None:
        return _Estimate(np.inf, null, True)

    best_c, best = np.zeros(r), 0.0
    if samples:
        C = rng.standard_normal((r, samples))
        C /= np.linalg.norm(C, axis=0)
        ratios = np.abs(U @ C).max(axis=0) / np.abs(B @ C).max(axis=0)
        k = int(np.argmax(ratios))
        best_c, best = C[:, k].copy(), float(ratios[k])
    if polish and samples:
        step = 0.5
        for _ in range(6):
            improved = True
            while improved:
                improved = False
                eye = step * np.eye(r)
                cand = np.concatenate([best_c[:, None] + eye, best_c[:, None] - eye], axis=1)
                cr = np.abs(U @ cand).max(axis=0) / np.abs(B @ cand).max(axis=0)
                j = int(np.argmax(cr))
                if cr[j] > best * (1 + 1e-12):
                    best, best_c = float(cr[j]), cand[:, j].copy()
                    improved = True
            step *= 0.5
    if stop_above is not None and best > stop_above:
        return _Estimate(best, best_c, False)

    # any left inverse L of B gives the feasible dual y_i = u_i L, hence the
    # bound ||u_i L||_1 on row i; each solved LP contributes the left inverse
    # of its active rows, which is tight for reference rows near the one solved
    ub = np.abs(U @ np.linalg.pinv(B)).sum(axis=1)
    certified, lps = False, 0
    while True:
        i = int(np.argmax(ub))
        if ub[i] <= best * (1 + 1e-9):
            certified = True
            break
        if lps >= max_lp:
            break
        c = _lp_row(U[i], B)
        lps += 1
        if c is None:
            return _Estimate(np.inf, _unbounded_direction(U[i], B), True, lps)
        Bc = B @ c
        val = _ratio(U @ c, Bc)
        if val > best:
            best, best_c = val, c
            if stop_above is not None and best > stop_above:
                break
        ub[i] = min(ub[i], float(U[i] @ c))
        active = np.abs(Bc) > 1 - 1e-7
        if active.sum() >= r:
            ub = np.minimum(ub, np.abs(U @ np.linalg.pinv(B[active])).sum(axis=1))
    return _Estimate(best, best_c, certified, lps)


def _unbounded_direction(q, B):
    # an unbounded LP means B is rank deficient along q; fall back to the null space
    _, s, Vt = np.linalg.svd(B, full_matrices=True)
    return Vt[-1]


def estimate_stability(space: TrialSpace, restriction: Restriction, reference: DataMap,
                       samples: int = 2000, seed: int = 0, max_lp: int = 400,
                       ref_matrix: Optional[np.ndarray] = None) -> StabilityEstimate:
    """Estimate ``C(U_M, V_N)``: the worst ratio of reference data seminorm to restricted norm.

    The estimate is a lower bound realized by the stored witness, and exact
    on the reference sampling when ``certified`` is set.  A restriction that
    annihilates a direction with nonzero reference data yields ``inf``.
    """
    if not len(restriction):
        raise ValueError("empty restriction")
    ref = ref_matrix if ref_matrix is not None else apply_all(reference.functionals(), space)
    geom = DataGeometry.from_matrix(ref)
    B = geom.to_coords(assemble(space, restriction).entries)
    est = estimate_in_coords(B, geom, np.random.default_rng(seed), samples, max_lp=max_lp)
    return StabilityEstimate(float(est.ratio), geom.T @ est.c if len(est.c) else np.zeros(space.dim),
                             samples, reference.density, len(ref), est.certified)


def random_direction_ratios(space_or_ref, restriction_matrix: np.ndarray, n: int = 500, seed: int = 12345,
                            geom: Optional[DataGeometry] = None) -> np.ndarray:
    """Ratios ``||ref a|| / ||A a||`` for ``n`` fresh random directions in data geometry."""
    if geom is None:
        geom = DataGeometry.from_matrix(space_or_ref)
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((geom.rank, n))
    A = restriction_matrix @ geom.T
    return np.abs(geom.U @ C).max(axis=0) / np.abs(A @ C).max(axis=0)


@dataclass
class GreedyResult:
    restriction: Restriction
    estimate: StabilityEstimate
    history: list = field(default_factory=list)  # (N, estimated constant)


def greedy_stabilize(space: TrialSpace, pool: DataMap, target: float, reference: DataMap,
                     max_size: int, seed_functionals: Sequence[Functional] = (), seed: int = 0,
                     samples: int = 2000, quick_samples: int = 256, max_lp: int = 60,
                     pool_matrix: Optional[np.ndarray] = None,
                     ref_matrix: Optional[np.ndarray] = None) -> GreedyResult:
    """Grow a restriction from the pool until the estimated constant is ``<= target``.

    Each step finds a direction whose constant exceeds the target and adds
    the pool functional that sees it most strongly.  The loop ends when the
    estimate drops to the target; ``estimate.certified`` tells whether the
    LP budget sufficed to make that exact on the reference rows.
    """
    if target <= 1:
        raise ValueError("target must exceed 1")
    rng = np.random.default_rng(seed)
    pool_funcs = list(pool.functionals())
    P = pool_matrix if pool_matrix is not None else apply_all(pool_funcs, space)
    ref = ref_matrix if ref_matrix is not None else apply_all(reference.functionals(), space)
    geom = DataGeometry.from_matrix(ref)
    Pc = geom.to_coords(P)
    index = {f: i for i, f in enumerate(pool_funcs)}
    chosen: list = []
    extra_rows: list = []
    for f in seed_functionals:
        if f in index:
            chosen.append(index[f])
        else:
            extra_rows.append(f)
    E = geom.to_coords(apply_all(extra_rows, space)) if extra_rows else np.zeros((0, geom.rank))
    history = []

    def current():
        return np.vstack([E, Pc[chosen]]) if chosen else E

    def restriction():
        return Restriction(tuple(extra_rows) + tuple(pool_funcs[i] for i in chosen))

    def finish(est):
        c = est.c
        return StabilityEstimate(float(est.ratio), geom.T @ c if len(c) else np.zeros(space.dim),
                                 samples, reference.density, len(ref), est.certified)

    while True:
        B = current()
        # stop_above lets a step end at the first witness beyond the target;
        # a run that falls through is certified exact on the reference rows
        est = estimate_in_coords(B, geom, rng, quick_samples, polish=False,
                                 max_lp=max_lp, stop_above=target)
        if est.ratio <= target and not est.certified:
            # budget ran out below the target: one more pass with full sampling and polish
            est = estimate_in_coords(B, geom, rng, samples, max_lp=max_lp, stop_above=target)
        val, c = est.ratio, est.c
        history.append((len(B), float(val)))
        if val <= target:
            return GreedyResult(restriction(), finish(est), history)
        if len(B) >= max_size:
            raise GreedyBudgetExhausted(
                f"no restriction of size <= {max_size} reached constant {target} (best {val:.3g})",
                restriction(), finish(est))
        scores = np.abs(Pc @ c)
        scores[chosen] = -np.inf
        j = int(np.argmax(scores))
        if not np.isfinite(scores[j]) or scores[j] <= 1e-13 * max(1.0, np.abs(Pc).max(initial=0.0)):
            raise GreedyBudgetExhausted("pool has no functional seeing the worst direction",
                                        restriction(), finish(est))
        chosen.append(j)


@dataclass
class MRDReport:
    violations: list  # (chain index, probe index, smaller norm, larger norm)
    incomparable: list  # (i, i+1) pairs not ordered by inclusion
    density_gaps: list  # per probe: reference seminorm - largest restricted norm

    @property
    def ok(self) -> bool:
        return not self.violations and not self.incomparable and all(g >= -1e-12 for g in self.density_gaps)


def verify_mrd(chain: Sequence[Restriction], probes: Sequence, reference: Optional[DataMap] = None,
               tol: float = 1e-12) -> MRDReport:
    """Check monotonicity along an inclusion chain and report density gaps."""
    norms = [np.array([R.norm(p) for p in probes]) for R in chain]
    violations, incomparable = [], []
    for i in range(len(chain) - 1):
        if not chain[i].issubset(chain[i + 1]):
            incomparable.append((i, i + 1))
            continue
        for k in np.nonzero(norms[i] > norms[i + 1] + tol)[0]:
            violations.append((i, int(k), float(norms[i][k]), float(norms[i + 1][k])))
    gaps = []
    if reference is not None and chain:
        from .functionals import data_seminorm

        gaps = [data_seminorm(reference, p) - float(norms[-1][k]) for k, p in enumerate(probes)]
    return MRDReport(violations, incomparable, gaps)


@dataclass
class BasisConditionReport:
    c_M: float
    C_M: float
    c_N: float
    C_N: float

    @property
    def trial_ratio(self) -> float:
        return self.C_M / self.c_M


def basis_condition(space: TrialSpace, restriction: Restriction, wp_norm: Callable, coeff_norm: str = "inf",
                    samples: int = 1000, seed: int = 0, nodal=None, probes=None) -> BasisConditionReport:
    """Sampled constants of ``c_M ||u_a||_WP <= ||a||_M <= C_M ||u_a||_WP`` and of the
    equivalence ``c_N ||x||_inf <= ||x||_2 <= C_N ||x||_inf`` on ``x = A a``.

    ``wp_norm`` maps a trial function to its well-posedness norm.  With a
    nodal map the coefficients are nodal values.  Random directions rarely
    hit the near-cancelling combinations of a bad basis, so with ``probes``
    (domain points) the right singular vectors of the sampled basis are tried too.
    """
    from .trialspaces import NodalSpace

    if nodal is not None and not isinstance(space, NodalSpace):
        space = NodalSpace(space, nodal)
    ordm = np.inf if coeff_norm == "inf" else 2
    rng = np.random.default_rng(seed)
    A = assemble(space, restriction).entries if len(restriction) else None
    dirs = list(rng.standard_normal((samples, space.dim)))
    if probes is not None:
        dirs.extend(np.linalg.svd(space.evaluate(np.atleast_2d(probes)), full_matrices=False)[2])
    rm, rn = [], []
    for a in dirs:
        a /= np.linalg.norm(a, ordm)
        rm.append(1.0 / wp_norm(space.function(a)))
        if A is not None:
            x = A @ a
            rn.append(np.linalg.norm(x) / np.abs(x).max())
    rm = np.array(rm)
    rn = np.array(rn) if rn else np.array([np.nan])
    return BasisConditionReport(float(rm.min()), float(rm.max()), float(rn.min()), float(rn.max()))
