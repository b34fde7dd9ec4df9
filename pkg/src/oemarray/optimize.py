"""Constrained bandwidth maximization over mirror-symmetric coupling ramps.

The search runs in the cavity-eliminated picture, where each site is a
mechanical resonance with two external rates summing to a fixed budget.
The objective is the conversion FWHM; a floor on the in-band ripple is
enforced with a penalty schedule.  A brute-force grid oracle covers the
small arrays, and profiles can be summarized by their best-fit tanh
steepness.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import FrequencyGrid, SpectrumError
from .transducer import EliminatedSite
from .cascade import eliminated_spectrum, extract_bandwidth

__all__ = [
    "OptimizationProblem",
    "OptimizationResult",
    "optimize_couplings",
    "grid_oracle",
    "fit_tanh_beta",
    "eliminated_bandwidth",
    "result_to_json",
]

_PENALTY_STAGES = (1e2, 1e4, 1e6)
_FRAC_FLOOR = 1e-4


@dataclass(frozen=True)
class OptimizationProblem:
    """Bandwidth maximization instance.

    ``gamma_total`` is the per-site sum of the two external rates, held
    constant across the array; ``min_efficiency`` bounds the in-band
    ripple from below.
    """

    n_sites: int
    gamma_total: float
    min_efficiency: float = 0.99
    symmetric: bool = True

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.gamma_total <= 0:
            raise ValueError("gamma_total must be > 0")
        if not 0 < self.min_efficiency <= 1:
            raise ValueError("min_efficiency must be in (0, 1]")


@dataclass(frozen=True)
class OptimizationResult:
    gamma1_per_site: Tuple[float, ...]
    bandwidth: float
    passband_min: float
    converged: bool
    evaluations: int


def _mirror_fractions(free: np.ndarray, n: int) -> np.ndarray:
    """Complete the first-half rate fractions to a full symmetric ramp."""
    prof = np.empty(n)
    half = n // 2
    prof[:half] = free
    if n % 2:
        prof[half] = 0.5
    prof[n - half:] = 1.0 - free[::-1]
    return prof


def _grid_for(problem: OptimizationProblem, widen: int = 0) -> FrequencyGrid:
    span = 4 * problem.gamma_total * (problem.n_sites + 2) * (2 ** widen)
    return FrequencyGrid(-span, span, 1201)


def _sites_for(fracs: np.ndarray, gamma_total: float) -> List[EliminatedSite]:
    return [EliminatedSite(gamma1=float(f) * gamma_total,
                           gamma2=(1.0 - float(f)) * gamma_total)
            for f in fracs]


def _grid_metrics(fracs: np.ndarray,
                  problem: OptimizationProblem) -> Tuple[float, float]:
    """(fwhm, passband_min) from the sampled spectrum alone.

    Crossings are linearly interpolated between grid points; this is the
    cheap surrogate the local search iterates on, while final reporting
    goes through the bisection-refined extractor.
    """
    grid = _grid_for(problem)
    w = grid.points()
    t = None
    for site in _sites_for(fracs, problem.gamma_total):
        s = np.empty(w.shape + (2, 2), dtype=complex)
        g1, g2 = site.gamma1, site.gamma2
        den = 2 * (g1 + g2) - 1j * w
        s[..., 0, 0] = (-2 * (g1 - g2) - 1j * w) / den
        s[..., 1, 1] = (2 * (g1 - g2) - 1j * w) / den
        off = -4 * np.sqrt(g1 * g2) / den
        s[..., 0, 1] = off
        s[..., 1, 0] = off
        t = s if t is None else s @ t
    v = np.abs(t[..., 1, 0]) ** 2
    peak = float(v.max())
    if peak <= 0:
        return 0.0, 0.0
    half = peak / 2
    above = v >= half
    idx = np.flatnonzero(above)
    i0, i1 = int(idx[0]), int(idx[-1])
    if i0 == 0 or i1 == len(v) - 1:
        return 0.0, 0.0

    def cross(ia, ib):
        wa, wb = w[ia], w[ib]
        va, vb = v[ia], v[ib]
        return wa + (half - va) * (wb - wa) / (vb - va)

    lo = cross(i0 - 1, i0)
    hi = cross(i1, i1 + 1)
    interior = np.arange(1, len(v) - 1)
    is_max = (v[interior] >= v[interior - 1]) & (v[interior] >= v[interior + 1])
    peaks = interior[is_max & above[interior]]
    if len(peaks) == 0:
        pb_min = peak
    else:
        pb_min = float(v[peaks[0]:peaks[-1] + 1].min())
    return float(hi - lo), pb_min


def eliminated_bandwidth(gamma1_per_site: Sequence[float],
                         gamma_total: float):
    """Refined bandwidth of an explicit rate profile.

    The same pipeline the array module uses: sweep the eliminated
    cascade, then bisect the half-max crossings.
    """
    fracs = np.asarray(gamma1_per_site, dtype=float) / gamma_total
    problem = OptimizationProblem(n_sites=len(fracs), gamma_total=gamma_total,
                                  min_efficiency=1.0)
    for widen in range(3):
        grid = _grid_for(problem, widen)
        try:
            return extract_bandwidth(eliminated_spectrum(
                _sites_for(fracs, gamma_total), grid))
        except SpectrumError:
            if widen == 2:
                raise
    raise AssertionError("unreachable")


def _start_profiles(problem: OptimizationProblem, n_random: int,
                    seed: int) -> List[np.ndarray]:
    n = problem.n_sites
    m = n // 2
    d = np.arange(1, m + 1) / (n + 1)
    starts = [np.full(m, 0.5), d.copy()]
    for beta in (2.0, 4.5, 8.0):
        starts.append(0.5 * (np.tanh(beta * (d - 0.5)) + 1.0))
    rng = np.random.default_rng(seed)
    for _ in range(max(n_random, 3)):
        starts.append(rng.uniform(0.02, 0.5, size=m))
    return starts


def _local_search(start: np.ndarray, problem: OptimizationProblem):
    evals = 0

    def cost(x: np.ndarray, rho: float) -> float:
        nonlocal evals
        evals += 1
        xc = np.clip(x, _FRAC_FLOOR, 1 - _FRAC_FLOOR)
        overrun = float(np.sum((x - xc) ** 2))
        fwhm, pb = _grid_metrics(
            _mirror_fractions(xc, problem.n_sites), problem)
        if fwhm <= 0:
            return 1e3 * (1 + overrun)
        viol = max(0.0, problem.min_efficiency - pb)
        return -fwhm + rho * viol ** 2 + 1e3 * overrun

    x = start.astype(float)
    for rho in _PENALTY_STAGES:
        res = minimize(cost, x, args=(rho,), method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-12,
                                "maxiter": 400 * max(len(x), 1)})
        x = res.x
    x = np.clip(x, _FRAC_FLOOR, 1 - _FRAC_FLOOR)

    # the penalty endpoint settles a hair below the ripple floor; walk up
    # the floor's gradient until the constraint holds exactly
    def ripple_floor(v: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return _grid_metrics(_mirror_fractions(v, problem.n_sites), problem)[1]

    pb = ripple_floor(x)
    for _ in range(12):
        deficit = problem.min_efficiency - pb
        if deficit <= 0:
            break
        h = 1e-6
        grad = np.array([
            (ripple_floor(np.clip(x + h * e, _FRAC_FLOOR, 1 - _FRAC_FLOOR))
             - pb) / h
            for e in np.eye(len(x))])
        norm2 = float(grad @ grad)
        if norm2 < 1e-12:
            break
        x = np.clip(x + (1.2 * deficit / norm2) * grad,
                    _FRAC_FLOOR, 1 - _FRAC_FLOOR)
        pb = ripple_floor(x)
    return x, evals


def _finalize(fracs: np.ndarray, problem: OptimizationProblem,
              evals: int) -> OptimizationResult:
    profile = _mirror_fractions(fracs, problem.n_sites)
    gamma1 = tuple(float(f) * problem.gamma_total for f in profile)
    try:
        bw = eliminated_bandwidth(gamma1, problem.gamma_total)
    except SpectrumError:
        return OptimizationResult(gamma1_per_site=gamma1, bandwidth=0.0,
                                  passband_min=0.0, converged=False,
                                  evaluations=evals)
    feasible = bw.passband_min >= problem.min_efficiency - 1e-6
    return OptimizationResult(
        gamma1_per_site=gamma1, bandwidth=float(bw.fwhm),
        passband_min=float(bw.passband_min), converged=bool(feasible),
        evaluations=evals)


def optimize_couplings(problem: OptimizationProblem, n_random_starts: int = 3,
                       seed: int = 97, workers: int = 1) -> OptimizationResult:
    """Multi-start constrained search for the widest conversion band.

    Runs a derivative-free local search from ramp-shaped and randomized
    starting profiles with an increasing penalty on ripple below the
    efficiency floor, then reports the best feasible profile.
    """
    n = problem.n_sites
    if n == 1 or n // 2 == 0:
        return _finalize(np.empty(0), problem, evals=1)

    starts = _start_profiles(problem, n_random_starts, seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda s: _local_search(s, problem), starts))
    else:
        outcomes = [_local_search(s, problem) for s in starts]

    total_evals = sum(e for _, e in outcomes)
    candidates = [_finalize(x, problem, total_evals) for x, _ in outcomes]

    # the constrained maximum is a degenerate ridge: rearranged and even
    # rebalanced profiles reach the same bandwidth, and restarts land on
    # it with ~1e-5 solver scatter.  Treat near-equal bandwidths as ties
    # and resolve them by ripple floor, then smallest profile in
    # lexicographic order, which prefers the monotone ramp.
    pool = [c for c in candidates if c.converged] or candidates
    tol_bw = max(1e-6, 1e-3 * problem.gamma_total)
    best_bw = max(c.bandwidth for c in pool)
    near = [c for c in pool if c.bandwidth >= best_bw - tol_bw]
    best_pb = max(c.passband_min for c in near)
    near = [c for c in near if c.passband_min >= best_pb - 1e-4]
    return min(near, key=lambda c: c.gamma1_per_site)


def grid_oracle(problem: OptimizationProblem) -> OptimizationResult:
    """Brute-force reference optimizer for up to three sites.

    Exhaustive scan of the single free rate fraction at resolution 1/400
    of the budget, then a bracketed refinement around the best feasible
    point.
    """
    if problem.n_sites > 3:
        raise ValueError("grid oracle only covers n_sites <= 3")
    if problem.n_sites == 1:
        return _finalize(np.empty(0), problem, evals=1)

    evals = 0

    def measure(f: float) -> Tuple[float, float]:
        nonlocal evals
        evals += 1
        return _grid_metrics(
            _mirror_fractions(np.array([f]), problem.n_sites), problem)

    def objective(f: float) -> float:
        fwhm, pb = measure(f)
        if fwhm <= 0 or pb < problem.min_efficiency - 1e-9:
            return -np.inf
        return fwhm

    step = 1.0 / 400
    fs = np.arange(1, 201) * step
    scores = np.array([objective(f) for f in fs])
    if not np.any(np.isfinite(scores)):
        return _finalize(np.array([0.5]), problem, evals)
    f_best = fs[int(np.argmax(scores))]

    lo, hi = max(step / 2, f_best - step), min(0.5, f_best + step)
    for _ in range(60):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if objective(m1) < objective(m2):
            lo = m1
        else:
            hi = m2
    f_best = (lo + hi) / 2
    return _finalize(np.array([f_best]), problem, evals)


def fit_tanh_beta(gamma1_per_site: Sequence[float], gamma_total: float) -> float:
    """Best-fit steepness of a tanh ramp through a rate profile.

    Two virtual endpoint sites (fully unpolarized and fully polarized)
    are appended before fitting, anchoring the ramp shape even for short
    arrays.
    """
    prof = np.asarray(gamma1_per_site, dtype=float)
    n = len(prof)
    if n < 3:
        raise ValueError("need at least 3 sites to fit a ramp shape")
    if np.any(np.diff(prof) < -1e-12 * gamma_total):
        raise ValueError("profile must be monotone nondecreasing")
    y = np.concatenate([[0.0], prof, [gamma_total]])
    d = np.arange(0, n + 2) / (n + 1)

    def sse(beta: float) -> float:
        model = gamma_total / 2 * (np.tanh(beta * (d - 0.5)) + 1.0)
        return float(np.sum((y - model) ** 2))

    betas = np.logspace(-2, 1.8, 200)
    coarse = min(betas, key=sse)
    res = minimize_scalar(sse, bounds=(coarse / 2, coarse * 2),
                          method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def result_to_json(problem: OptimizationProblem, result: OptimizationResult,
                   path=None) -> dict:
    payload = {
        "n": problem.n_sites,
        "gamma_total": problem.gamma_total,
        "min_efficiency": problem.min_efficiency,
        "gamma1": list(result.gamma1_per_site),
        "bandwidth": result.bandwidth,
        "passband_min": result.passband_min,
        "converged": result.converged,
        "beta_fit": (fit_tanh_beta(result.gamma1_per_site, problem.gamma_total)
                     if problem.n_sites >= 3 else None),
    }
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload
