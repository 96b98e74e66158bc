"""End-to-end studies: stability, convergence, noise, nodal bases, MLPG norms.

Every study returns a :class:`StudyResult` whose rows carry the parameters
that produced them.  CSV is the output contract.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .discretization import GreedyBudgetExhausted, Restriction, estimate_stability, greedy_stabilize
from .domains import Disk, Interval, Rectangle
from .functionals import DataMap, PointEval, apply_all
from .kernels import RadialKernel
from .problems import (NoiseModel, ProblemSpec, perturb_data, random_smooth_field, seed_functionals,
                       trial_space_data_error, wp_error)
from .quadrature import clipped_ball_rule, disk_rule
from .solvers import RankDeficiencyError, solve, solve_chebyshev
from .trialspaces import KernelSpace, NodalSpace, PolynomialSpace, TrialSpace, fill_distance, rebase

log = logging.getLogger(__name__)

COND_LIMIT = 1e14


# -- results ------------------------------------------------------------------


@dataclass
class StudyResult:
    study: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    fitted_rate: Optional[float] = None

    @property
    def columns(self) -> list:
        cols: list = []
        for row in self.rows:
            cols.extend(k for k in row if k not in cols)
        return cols

    def column(self, name) -> list:
        return [row.get(name) for row in self.rows]

    def to_csv(self, path) -> None:
        """Write rows to ``path`` and metadata to ``path.meta.json``."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)
        meta = {"study": self.study, "fitted_rate": self.fitted_rate, "metadata": self.metadata}
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, default=str))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh)
        cols = self.columns
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in cols])

    @classmethod
    def from_csv(cls, path) -> "StudyResult":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [{k: _parse(v) for k, v in zip(header, line) if v != ""} for line in reader]
        meta_path = Path(str(path) + ".meta.json")
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            return cls(meta["study"], rows, meta["metadata"], meta["fitted_rate"])
        return cls(path.stem, rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    return str(v)


def _parse(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def rate_estimate(points) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("need at least two (h, e) pairs")
    if np.any(pts <= 0):
        raise ValueError("rate estimation needs positive h and e")
    h, e = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(h) == 0:
        raise ValueError("all h values coincide")
    return float(np.polyfit(h, e, 1)[0])


def _meta(**params) -> dict:
    return {"created": time.strftime("%Y-%m-%dT%H:%M:%S"), **params}


# -- stability of polynomial interpolation ------------------------------------


NODE_RULES = ("equidistant", "chebyshev", "equidistant-oversampled")


def node_set(rule: str, M: int, oversampling: float = 1.0, interval=(-1.0, 1.0)) -> np.ndarray:
    a, b = interval
    if rule == "equidistant":
        n = M
    elif rule == "equidistant-oversampled":
        n = max(M, int(math.ceil(oversampling * M * M)))
    elif rule == "chebyshev":
        if M == 1:
            return np.array([0.5 * (a + b)])
        t = np.cos(np.pi * np.arange(M) / (M - 1))[::-1]
        return 0.5 * (a + b) + 0.5 * (b - a) * t
    else:
        raise ValueError(f"unknown node rule {rule!r}; choose from {NODE_RULES}")
    return np.linspace(a, b, n) if n > 1 else np.array([0.5 * (a + b)])


def interval_reference(density: int = 4001, interval=(-1.0, 1.0)) -> DataMap:
    dom = Interval(*interval)
    return DataMap(lambda n, d=dom: [PointEval(tuple(p)) for p in d.dense_points(n)], density, "interval-points")


def run_stability_study(degrees: Sequence[int], node_rules: Sequence[str] = NODE_RULES,
                        oversampling: float = 1.0, reference_density: int = 4001,
                        seed: int = 0) -> StudyResult:
    """Estimated ``C(M, N)`` for point evaluations on ``[-1, 1]``; ``M`` is the space dimension."""
    ref = interval_reference(reference_density)
    rows = []
    for M in degrees:
        if M < 1:
            raise ValueError("space dimensions must be >= 1")
        space = PolynomialSpace(M - 1)
        ref_matrix = apply_all(ref.functionals(), space)
        for rule in node_rules:
            nodes = node_set(rule, M, oversampling)
            R = Restriction(tuple(PointEval((float(x),)) for x in nodes))
            est = estimate_stability(space, R, ref, seed=seed, ref_matrix=ref_matrix)
            rows.append({"M": M, "N": len(nodes), "rule": rule, "stability": est.constant,
                         "certified": est.certified, "reference_density": reference_density})
    return StudyResult("stability", rows, _meta(seed=seed, degrees=list(degrees), rules=list(node_rules),
                                                oversampling=oversampling))


# -- trial space families -----------------------------------------------------


def grid_size_for(h: float, box=((0.0, 1.0), (0.0, 1.0))) -> int:
    """Smallest uniform grid on a square whose fill distance is ``<= h`` (up to rounding)."""
    side = max(b - a for a, b in box)
    return max(2, int(round(side / (h * math.sqrt(2.0)))) + 1)


def kernel_centers(domain, h: float) -> np.ndarray:
    if isinstance(domain, Rectangle):
        return domain.grid(grid_size_for(h, domain.box))
    if isinstance(domain, Disk):
        # square grid clipped to the disk plus boundary nodes at spacing ~h
        n = grid_size_for(h, ((0, 2 * domain.radius),) * 2)
        sq = Rectangle(tuple((c - domain.radius, c + domain.radius) for c in domain.center)).grid(n)
        inner = sq[domain.distance_to_boundary(sq) > 0.5 * h]
        nb = max(8, int(math.ceil(2 * math.pi * domain.radius / (h * math.sqrt(2.0)))))
        th = 2 * np.pi * np.arange(nb) / nb
        ring = np.asarray(domain.center) + domain.radius * np.column_stack([np.cos(th), np.sin(th)])
        return np.vstack([inner, ring])
    if isinstance(domain, Interval):
        n = max(2, int(math.ceil((domain.b - domain.a) / (2 * h))) + 1)
        return np.linspace(domain.a, domain.b, n)[:, None]
    raise ValueError(f"no center rule for {type(domain).__name__}")


def kernel_family(problem: ProblemSpec, kernel: RadialKernel, fill_distances: Sequence[float]) -> list:
    return [KernelSpace(kernel, kernel_centers(problem.domain, h)) for h in fill_distances]


def _nodes(space: TrialSpace) -> Optional[np.ndarray]:
    if isinstance(space, NodalSpace):
        return space.nodal.nodes
    if isinstance(space, KernelSpace):
        return space.centers
    return None


# -- one discretize-and-solve pass --------------------------------------------


@dataclass
class Solved:
    space: TrialSpace
    restriction: Restriction
    stability: float
    certified: bool
    report: object
    flagged: str = ""

    @property
    def function(self):
        return self.space.function(self.report.coefficients)


def discretize_and_solve(problem: ProblemSpec, space: TrialSpace, target: float = 2.0,
                         solver: str = "chebyshev", ca: float = 1.5, max_size_factor: int = 40,
                         seed: int = 0, data=None) -> Solved:
    """Greedy-stabilize ``space`` against the problem's pool, then solve.

    ``ca`` is the cap on the certified ratio of the achieved residual to the
    optimal one; the Lawson solver stops once it is reached.
    """
    pool, ref = problem.pool(), problem.reference()
    flagged = ""
    try:
        g = greedy_stabilize(space, pool, target, ref, max_size_factor * space.dim,
                             seed_functionals=seed_functionals(problem, pool), seed=seed)
        R, est = g.restriction, g.estimate
    except GreedyBudgetExhausted as exc:
        R, est = exc.restriction, exc.estimate
        flagged = "budget"
    A = apply_all(R.functionals, space)
    b = problem.rhs(R.functionals) if data is None else data(R)
    rep = solve(A, b, solver, tol=ca - 1.0)
    return Solved(space, R, est.constant, est.certified, rep, flagged)


# -- convergence --------------------------------------------------------------


def run_convergence_study(problem: ProblemSpec, spaces: Sequence[TrialSpace], target: float = 2.0,
                          solver: str = "chebyshev", ca: float = 1.5, seed: int = 0,
                          max_size_factor: int = 40, params: Optional[dict] = None) -> StudyResult:
    if len(spaces) < 3:
        raise ValueError("a convergence study needs at least three trial spaces")
    grid = problem.domain.measurement_grid()
    rows = []
    for space in spaces:
        t0 = time.time()
        row = {"problem": problem.kind.value, "M": space.dim, "solver": solver, "target": target,
               "ca_cap": ca, "seed": seed}
        nodes = _nodes(space)
        row["h"] = fill_distance(nodes, grid[0]) if nodes is not None else None
        try:
            s = discretize_and_solve(problem, space, target, solver, ca, max_size_factor, seed)
        except RankDeficiencyError as exc:
            row.update(flagged="rank", note=str(exc))
            rows.append(row)
            continue
        u = s.function
        A = apply_all(s.restriction.functionals, space)
        cond = float(np.linalg.cond(A))
        flagged = s.flagged or ("condition" if cond > COND_LIMIT else "")
        row.update(N=len(s.restriction), stability=s.stability, certified=s.certified,
                   residual=s.report.residual_sup, achieved_CA=s.report.achieved_CA,
                   tsda=trial_space_data_error(problem, space), wp_error=wp_error(problem, u, grid),
                   cond=cond, flagged=flagged)
        if nodes is not None:
            row["nodal_error"] = float(np.max(np.abs(u(nodes) - problem.solution(nodes))))
        row["seconds"] = time.time() - t0
        log.info("M=%d N=%d C=%.3f err=%.3e", space.dim, row["N"], s.stability, row["wp_error"])
        rows.append(row)
    good = [(r["h"], r["wp_error"]) for r in rows
            if not r.get("flagged") and r.get("h") and r.get("wp_error", 0) > 0]
    rate = rate_estimate(good) if len(good) >= 2 else None
    meta = _meta(seed=seed, problem=problem.describe(), target=target, solver=solver, ca=ca, **(params or {}))
    return StudyResult("converge", rows, meta, rate)


# -- noise --------------------------------------------------------------------


def noise_bound(ca: float, comparison_error: float, noise: float, stability: float = 2.0) -> float:
    """Right-hand side of the noisy-data error bound.

    With a stability constant ``C`` the argument gives
    ``(C C_A + C + 1) e* + (C C_A + C) eps``; for ``C = 2`` these are the
    familiar factors ``2 C_A + 3`` and ``2 C_A + 2``.
    """
    C = max(stability, 2.0)
    return (C * ca + C + 1.0) * comparison_error + (C * ca + C) * noise


def run_noise_study(problem: ProblemSpec, space: TrialSpace, eps_list: Sequence[float] = (0.0, 1e-4, 1e-2),
                    ca: float = 1.5, seeds: int = 20, seed: int = 0, shape: str = "uniform",
                    target: float = 2.0) -> StudyResult:
    """Check the noisy-data error bound on every (eps, seed) pair.

    The comparison object is the discrete Chebyshev approximation of ``u*``
    on the reference functionals; the data-norm error of the computed
    solution is measured on the same reference set.
    """
    ref_funcs = problem.reference().functionals()
    ref_space = apply_all(ref_funcs, space)
    ref_true = apply_all(ref_funcs, problem.solution)
    comparison = solve_chebyshev(ref_space, ref_true, tol=1e-3)
    e_star = comparison.residual_sup

    g = greedy_stabilize(space, problem.pool(), target, problem.reference(), 40 * space.dim,
                         seed_functionals=seed_functionals(problem), seed=seed, ref_matrix=ref_space)
    R = g.restriction.functionals
    A = apply_all(R, space)
    clean = problem.rhs(R)
    rows = []
    for eps in eps_list:
        for k in range(seeds):
            s = seed + k
            v = perturb_data(clean, NoiseModel(eps, shape), seed=s)
            rep = solve_chebyshev(A, v, tol=ca - 1.0)
            measured = float(np.max(np.abs(ref_space @ rep.coefficients - ref_true)))
            noise = float(np.max(np.abs(v - clean)))
            bound = noise_bound(rep.achieved_CA, e_star, noise, g.estimate.constant)
            rows.append({"eps": eps, "seed": s, "N": len(R), "M": space.dim,
                         "stability": g.estimate.constant, "achieved_CA": rep.achieved_CA,
                         "comparison_error": e_star, "noise": noise, "measured": measured,
                         "bound": bound, "satisfied": bool(measured <= bound)})
    return StudyResult("noise", rows, _meta(seed=seed, problem=problem.describe(), ca=ca, shape=shape,
                                            eps=list(eps_list), seeds=seeds))


# -- nodal bases --------------------------------------------------------------


def run_nodal_study(problem: ProblemSpec, spaces: Sequence[TrialSpace], target: float = 2.0,
                    ca: float = 1.5, seed: int = 0) -> StudyResult:
    """Nodal errors against the test residual of the nodal comparison ``s*``.

    ``s*`` is the trial function whose nodal values are ``u*`` at the nodes.
    Spaces that are not yet nodal are re-based on their own centers.
    """
    grid = problem.domain.measurement_grid()
    rows = []
    for space in spaces:
        if not isinstance(space, NodalSpace):
            space = rebase(space, _nodes(space))
        nodes = space.nodal.nodes
        s = discretize_and_solve(problem, space, target, "chebyshev", ca, seed=seed)
        u_nodes = problem.solution(nodes)
        nodal_err = float(np.max(np.abs(s.report.coefficients - u_nodes)))
        s_star = space.function(u_nodes)
        funcs = s.restriction.functionals
        test_res = float(np.max(np.abs(apply_all(funcs, s_star) - problem.rhs(funcs))))
        rows.append({"M": space.dim, "N": len(funcs), "h": fill_distance(nodes, grid[0]),
                     "stability": s.stability, "nodal_error": nodal_err, "test_residual": test_res,
                     "ratio": nodal_err / test_res if test_res > 0 else 0.0,
                     "wp_error": wp_error(problem, s.function, grid), "seed": seed})
    ratios = [r["ratio"] for r in rows]
    trend_ok = all(b <= 3.0 * a for a, b in zip(ratios, ratios[1:]) if a > 0)
    return StudyResult("nodal", rows, _meta(seed=seed, problem=problem.describe(), trend_ok=trend_ok))


# -- MLPG norm check ----------------------------------------------------------


def ball_average(f, center, radius: float, contains=None, order: int = 8) -> float:
    rule = clipped_ball_rule(center, radius, contains or (lambda p: np.ones(len(p), bool)), order)
    return float(rule.weights @ f(rule.nodes) / rule.weights.sum())


def sup_ball_average(f, domain: Rectangle, radius: float, coarse: int = 41, starts: int = 5) -> float:
    """``sup_c |mean of f over B(c, r)|`` over balls inside the domain.

    A coarse scan of admissible centers seeds a bounded local maximization.
    """
    lo, hi = domain.lo + radius, domain.hi - radius
    if np.any(lo > hi):
        raise ValueError("radius too large for the domain")
    base = disk_rule((0.0, 0.0), radius, 8)

    def avg(c):
        return float(base.weights @ f(base.nodes + c) / base.weights.sum())

    xs = [np.linspace(l, h, coarse) for l, h in zip(lo, hi)]
    C = np.array(np.meshgrid(*xs, indexing="ij")).reshape(2, -1).T
    vals = np.array([abs(avg(c)) for c in C])
    best = vals.max()
    for k in np.argsort(vals)[::-1][:starts]:
        sign = np.sign(avg(C[k])) or 1.0
        res = minimize(lambda c: -sign * avg(c), C[k], bounds=list(zip(lo, hi)), method="L-BFGS-B")
        best = max(best, abs(avg(res.x)))
    return best


def run_mlpg_norm_check(n_fields: int = 20, radii: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                        seed: int = 0, domain: Optional[Rectangle] = None) -> StudyResult:
    """Sup of ball averages against the sup norm for random smooth fields."""
    domain = domain or Rectangle()
    pts, _ = domain.measurement_grid()
    rows = []
    for i in range(n_fields):
        f = random_smooth_field(seed + i, domain.box)
        sup = float(np.max(np.abs(f(pts))))
        prev = -np.inf
        for r in sorted(radii, reverse=True):
            s = sup_ball_average(f, domain, r)
            rows.append({"field": i, "seed": seed + i, "radius": r, "sup_average": s, "sup_norm": sup,
                         "relative_gap": (sup - s) / sup, "monotone": bool(s >= prev - 1e-6)})
            prev = s
    return StudyResult("mlpg-norm-check", rows, _meta(seed=seed, radii=list(radii), n_fields=n_fields))
