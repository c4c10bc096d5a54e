"""Monte Carlo machinery for the additive walk and its exit-time statistics.

The walk is ``S_n = a + sum_k rho(g_k, X_{k-1})`` along the projective orbit
``X_k = g_k . X_{k-1}`` of i.i.d. atoms; the exit time is the first ``n >= 1``
with ``S_n <= 0`` (ties count as exit).  Estimators here cover survival
probabilities, killed expectations ``V_n = E[S_n; tau > n]`` (whose plateau
estimates the harmonic function ``V``), conditional endpoint laws, the
fluctuation variance, increment covariances, and the martingale
approximation ``M_n = S_n + Theta(X_n) - Theta(X_0)`` built from a tabulated
potential, with ``sup_n |S_n - M_n| <= A = 2 sup |Theta|`` checked pathwise.

Everything is driven by the chunked kernels, so results are reproducible
bit for bit for a given seed regardless of worker count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _batch
from .matrix_core import SimplexVector
from .matrix_law import MatrixLaw
from .transfer_operator import PoissonSolution

__all__ = [
    "PathRecord",
    "SurvivalCurve",
    "HarmonicEstimate",
    "CovarianceDecay",
    "simulate_path",
    "simulate_paths",
    "survival_probability",
    "estimate_V",
    "conditional_endpoint_sample",
    "conditional_endpoint_samples",
    "mc_sigma2",
    "covariance_decay",
    "martingale_gap",
    "exit_ordering_violations",
    "harmonicity_residual",
    "build_V_evaluator",
]

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True, eq=False)
class PathRecord:
    """One realized trajectory of the walk.

    ``S[0] = start_a``; when a potential was supplied, ``M`` is the
    compensated trajectory ``M_n = S_n + Theta(X_n) - Theta(X_0)`` aligned
    with ``S``.  ``tau`` is the first step with ``S <= 0`` (None when the
    path was censored at the horizon); ``T`` is the first step with
    ``M <= 0`` within the recorded range.
    """

    start_x: np.ndarray
    start_a: float
    S: np.ndarray
    M: np.ndarray | None
    tau: int | None
    T: int | None
    horizon: int
    censored: bool
    x_final: np.ndarray


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Survival estimates ``p_hat(n) = P(tau > n)`` on a grid of times."""

    n_values: np.ndarray
    p_hat: np.ndarray
    ci_half_width: np.ndarray
    survivors: np.ndarray
    paths: int
    start_a: float
    seed: object


@dataclass(frozen=True, eq=False)
class HarmonicEstimate:
    """Plateau estimate of ``V(x, a) = lim_n E[S_n; tau > n]``."""

    start_x: np.ndarray
    start_a: float
    n_schedule: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    V_hat: float
    V_stderr: float
    plateau_n: int | None
    converged: bool
    diagnostics: str


@dataclass(frozen=True, eq=False)
class CovarianceDecay:
    """Lagged increment covariances after burn-in, with a geometric-rate fit."""

    burn_in: int
    lags: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray
    kappa_fit: float | None
    fit_lags: list
    paths: int
    note: str


def _sorted_steps(values) -> tuple:
    steps = tuple(sorted({int(v) for v in values}))
    if not steps or steps[0] < 1:
        raise ValueError("step values must be integers >= 1")
    return steps


def _theta_table(poisson: PoissonSolution | None):
    if poisson is None:
        return None, None
    return poisson.theta.grid.params, poisson.theta.values


def simulate_path(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    horizon: int,
    rng,
    poisson: PoissonSolution | None = None,
    full_horizon: bool = False,
) -> PathRecord:
    """Simulate one path, stopping at the exit unless ``full_horizon``.

    ``rng`` may be a seed or a Generator; the same seed reproduces the same
    record.  With a potential supplied (d = 2 only) the compensated
    trajectory ``M`` and its crossing time ``T`` are recorded as well.
    """
    if poisson is not None and law.dim != 2:
        raise ValueError("compensated trajectories need the d = 2 tabulated potential")
    rng = np.random.default_rng(rng)
    stack = law.atom_stack
    cumw = law.cum_weights
    coords = x.coords.copy()
    S = [float(a)]
    M = None
    theta0 = 0.0
    if poisson is not None:
        theta0 = float(poisson.theta_at(coords[0]))
        M = [float(a)]
    tau = None
    for step in range(1, horizon + 1):
        k = int(np.searchsorted(cumw, rng.random(), side="right"))
        y = stack[k] @ coords
        mass = y.sum()
        coords = y / mass
        S.append(S[-1] + math.log(mass))
        if poisson is not None:
            M.append(S[-1] + float(poisson.theta_at(coords[0])) - theta0)
        if tau is None and S[-1] <= 0.0:
            tau = step
            if not full_horizon:
                break
    S = np.asarray(S)
    M = np.asarray(M) if M is not None else None
    T = None
    if M is not None:
        hits = np.nonzero(M[1:] <= 0.0)[0]
        if hits.size:
            T = int(hits[0]) + 1
    return PathRecord(
        start_x=x.coords,
        start_a=float(a),
        S=S,
        M=M,
        tau=tau,
        T=T,
        horizon=horizon,
        censored=tau is None,
        x_final=coords,
    )


def simulate_paths(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    horizon: int,
    paths: int,
    seed,
    poisson: PoissonSolution | None = None,
    workers: int = 1,
    stop_at_exit: bool = False,
) -> list[PathRecord]:
    """Simulate a batch of full-horizon paths (truncated at tau on request).

    Memory is ``O(paths * horizon)`` because whole trajectories are kept;
    use the aggregate estimators for large budgets.
    """
    if poisson is not None and law.dim != 2:
        raise ValueError("compensated trajectories need the d = 2 tabulated potential")
    params, values = _theta_table(poisson)
    parts = _batch.run_chunks(
        _batch.record_chunk,
        (law.atom_stack, law.cum_weights, x.coords, a, horizon, params, values),
        paths,
        seed,
        workers,
    )
    records = []
    for S, M, tau, X_final in parts:
        for p in range(S.shape[0]):
            t = int(tau[p]) or None
            end = t if (stop_at_exit and t is not None) else horizon
            S_row = S[p, : end + 1].copy()
            M_row = M[p, : end + 1].copy() if M is not None else None
            T = None
            if M_row is not None:
                hits = np.nonzero(M_row[1:] <= 0.0)[0]
                if hits.size:
                    T = int(hits[0]) + 1
            records.append(
                PathRecord(
                    start_x=x.coords,
                    start_a=float(a),
                    S=S_row,
                    M=M_row,
                    tau=t,
                    T=T,
                    horizon=horizon,
                    censored=t is None,
                    x_final=X_final[p].copy(),
                )
            )
    return records


def _survival_reduce(law, x, a, n_values, paths, seed, workers, want_samples):
    parts = _batch.run_chunks(
        _batch.survival_chunk,
        (law.atom_stack, law.cum_weights, x.coords, a, n_values, want_samples),
        paths,
        seed,
        workers,
    )
    counts = np.sum([p[0] for p in parts], axis=0)
    sums = np.sum([p[1] for p in parts], axis=0)
    sums2 = np.sum([p[2] for p in parts], axis=0)
    samples = None
    if want_samples:
        samples = [np.concatenate([p[3][i] for p in parts]) for i in range(len(n_values))]
    return counts, sums, sums2, samples


def survival_probability(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    n_values,
    paths: int,
    seed,
    workers: int = 1,
    horizon: int = 10**6,
) -> SurvivalCurve:
    """Estimate ``P(tau > n)`` at every n in ``n_values`` from one path set.

    The evaluation times are nested into a single killed run, so the curve
    is monotone by construction.  CI half-widths are 95% normal.
    """
    n_values = _sorted_steps(n_values)
    if n_values[-1] > horizon:
        raise ValueError(f"evaluation time {n_values[-1]} exceeds the horizon {horizon}")
    counts, _, _, _ = _survival_reduce(law, x, a, n_values, paths, seed, workers, False)
    p_hat = counts / paths
    ci = _Z95 * np.sqrt(p_hat * (1.0 - p_hat) / paths)
    return SurvivalCurve(
        n_values=np.asarray(n_values),
        p_hat=p_hat,
        ci_half_width=ci,
        survivors=counts,
        paths=paths,
        start_a=float(a),
        seed=seed,
    )


def estimate_V(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    n_schedule,
    paths: int,
    seed,
    poisson: PoissonSolution | None = None,
    workers: int = 1,
    rel_tol: float = 0.02,
) -> HarmonicEstimate:
    """Estimate ``V(x, a)`` as the plateau of ``V_n = E[S_n; tau > n]``.

    Dead paths contribute zero to the killed expectation.  The plateau is
    the first schedule point whose estimate moved by less than
    ``max(stderr, rel_tol * V_n)`` from its predecessor; without one the
    last estimate is returned and the result is flagged unconverged.  When a
    potential is supplied, the diagnostics quote the deterministic lower
    band ``a - A`` and the empirical upper envelope ``V_hat / (1 + a)``.
    """
    n_schedule = _sorted_steps(n_schedule)
    counts, sums, sums2, _ = _survival_reduce(law, x, a, n_schedule, paths, seed, workers, False)
    est = sums / paths
    var = np.maximum(sums2 / paths - est**2, 0.0)
    se = np.sqrt(var / paths)
    plateau_n = None
    pick = len(n_schedule) - 1
    for i in range(1, len(n_schedule)):
        if abs(est[i] - est[i - 1]) < max(se[i], rel_tol * abs(est[i])):
            plateau_n = n_schedule[i]
            pick = i
            break
    converged = plateau_n is not None
    notes = [
        f"V_hat = {est[pick]:.6g} +- {se[pick]:.3g} at n = {n_schedule[pick]}",
        "plateau reached" if converged else "no plateau in the schedule; using the last estimate",
    ]
    if poisson is not None:
        notes.append(
            f"bounds: max(0, a - A) = {max(0.0, a - poisson.A):.6g} <= V_hat; "
            f"empirical upper envelope V_hat / (1 + a) = {est[pick] / (1.0 + a):.6g}"
        )
    return HarmonicEstimate(
        start_x=x.coords,
        start_a=float(a),
        n_schedule=np.asarray(n_schedule),
        estimates=est,
        stderrs=se,
        V_hat=float(est[pick]),
        V_stderr=float(se[pick]),
        plateau_n=plateau_n,
        converged=converged,
        diagnostics="; ".join(notes),
    )


def conditional_endpoint_samples(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    n_values,
    paths: int,
    seed,
    workers: int = 1,
) -> dict:
    """Survivor samples of ``S_n / sqrt(n)`` at each n, from one path set."""
    n_values = _sorted_steps(n_values)
    _, _, _, samples = _survival_reduce(law, x, a, n_values, paths, seed, workers, True)
    return {n: samples[i] / math.sqrt(n) for i, n in enumerate(n_values)}


def conditional_endpoint_sample(
    law: MatrixLaw,
    x: SimplexVector,
    a: float,
    n: int,
    paths: int,
    seed,
    workers: int = 1,
) -> np.ndarray:
    """Survivor sample of ``S_n / sqrt(n)`` at one time; errors when empty."""
    out = conditional_endpoint_samples(law, x, a, [n], paths, seed, workers)[int(n)]
    if out.size == 0:
        raise RuntimeError(f"no survivors at n = {n} from {paths} paths; lower n or raise the budget")
    return out


def mc_sigma2(
    law: MatrixLaw,
    x: SimplexVector,
    n: int,
    paths: int,
    seed,
    workers: int = 1,
):
    """Monte Carlo fluctuation variance ``var(S_n) / n`` with its stderr.

    The stderr comes from the fourth-moment formula for the sample variance,
    so it vanishes for deterministic laws.
    """
    parts = _batch.run_chunks(
        _batch.walk_chunk,
        (law.atom_stack, law.cum_weights, x.coords, 0.0, int(n), (int(n),), (), ()),
        paths,
        seed,
        workers,
    )
    S = np.concatenate([s[0] for s, _, _ in parts])
    v = float(S.var(ddof=1))
    centered = S - S.mean()
    m4 = float(np.mean(centered**4))
    stderr = math.sqrt(max(m4 - v**2, 0.0) / paths) / n
    return v / n, stderr


def covariance_decay(
    law: MatrixLaw,
    x: SimplexVector,
    burn_in: int,
    max_lag: int,
    paths: int,
    seed,
    workers: int = 1,
) -> CovarianceDecay:
    """Covariances of the increments at the burn-in step and lagged steps.

    Row l is ``cov(rho_m, rho_{m+l})`` across paths (l = 0 is the variance
    anchor).  The geometric rate ``kappa_fit`` is fitted on the variance
    anchor together with the lags l >= 1 whose covariance exceeds 3 stderr
    in magnitude; anchoring at l = 0 is conservative (the variance sits on
    or above the geometric envelope) and keeps the fit defined whenever any
    lag carries signal.  With no significant lag the window is reported
    empty and no rate is fitted.
    """
    if burn_in < 1 or max_lag < 1:
        raise ValueError("burn_in and max_lag must be >= 1")
    steps = tuple(burn_in + l for l in range(max_lag + 1))
    parts = _batch.run_chunks(
        _batch.walk_chunk,
        (law.atom_stack, law.cum_weights, x.coords, 0.0, steps[-1], (), steps, ()),
        paths,
        seed,
        workers,
    )
    rho = np.concatenate([r for _, r, _ in parts], axis=1)
    base = rho[0] - rho[0].mean()
    lags = np.arange(max_lag + 1)
    cov = np.empty(max_lag + 1)
    stderr = np.empty(max_lag + 1)
    for l in lags:
        other = rho[l] - rho[l].mean()
        prods = base * other
        cov[l] = prods.mean() * paths / (paths - 1)
        stderr[l] = prods.std(ddof=1) / math.sqrt(paths)
    window = [int(l) for l in lags[1:] if abs(cov[l]) > 3.0 * stderr[l]]
    if window:
        fit_lags = [0] + window
        slope = np.polyfit(np.asarray(fit_lags, dtype=float), np.log(np.abs(cov[fit_lags])), 1)[0]
        kappa_fit = float(math.exp(slope))
        note = f"geometric fit over lags {fit_lags}"
    else:
        fit_lags = []
        kappa_fit = None
        note = "fit window empty: lag covariances are within noise"
    return CovarianceDecay(
        burn_in=burn_in,
        lags=lags,
        cov=cov,
        stderr=stderr,
        kappa_fit=kappa_fit,
        fit_lags=fit_lags,
        paths=paths,
        note=note,
    )


def martingale_gap(records, A: float, slack: float = 0.0):
    """Pathwise sup of ``|S - M|`` and the count of paths exceeding ``A + slack``.

    ``slack`` should be the interpolation slack of the potential used to
    build the records; the bound itself is deterministic, so any violation
    indicates a broken potential or mismatched records.
    """
    max_gap = 0.0
    violations = 0
    for rec in records:
        if rec.M is None:
            raise ValueError("records carry no compensated trajectory; simulate with a potential")
        gap = float(np.abs(rec.S - rec.M).max())
        max_gap = max(max_gap, gap)
        if gap > A + slack:
            violations += 1
    return max_gap, violations


def exit_ordering_violations(records, A: float) -> int:
    """Count paths where the exit fails to precede the shifted crossing.

    For every path on which ``M`` reaches ``-A`` within the recorded range,
    the exit ``tau`` must already have happened by then (since
    ``S <= M + A``); returns the number of paths violating that ordering.
    """
    bad = 0
    for rec in records:
        if rec.M is None:
            raise ValueError("records carry no compensated trajectory; simulate with a potential")
        hits = np.nonzero(rec.M[1:] <= -A)[0]
        if hits.size:
            t_shift = int(hits[0]) + 1
            if rec.tau is None or rec.tau > t_shift:
                bad += 1
    return bad


def harmonicity_residual(
    law: MatrixLaw,
    V_evaluator,
    x: SimplexVector,
    a: float,
    paths: int,
    seed,
    workers: int = 1,
):
    """One-step harmonicity defect ``E[V(X_1, S_1); tau > 1] - V(x, a)``.

    ``V_evaluator(params, levels)`` must evaluate vectorized on the first
    simplex coordinate and the level (d = 2).  Returns the residual and the
    Monte Carlo stderr of the one-step mean; for a harmonic ``V`` the
    residual is zero up to that noise plus the evaluator's own bias.  A
    degenerate law (constant one-step increments) triggers a warning since
    the exit problem is then trivial.
    """
    if law.dim != 2:
        raise ValueError("the lattice evaluator protocol is defined for d = 2")
    parts = _batch.run_chunks(
        _batch.walk_chunk,
        (law.atom_stack, law.cum_weights, x.coords, float(a), 1, (1,), (), (1,)),
        paths,
        seed,
        workers,
    )
    S1 = np.concatenate([s[0] for s, _, _ in parts])
    P1 = np.concatenate([xr[0] for _, _, xr in parts])
    if float(S1.max()) == float(S1.min()):
        warnings.warn("law has deterministic one-step increments; exit problem is degenerate", RuntimeWarning)
    vals = np.where(S1 > 0.0, V_evaluator(P1, S1), 0.0)
    baseline = float(np.asarray(V_evaluator(np.asarray([x.coords[0]]), np.asarray([a])))[0])
    residual = float(vals.mean()) - baseline
    stderr = float(vals.std(ddof=1) / math.sqrt(paths))
    return residual, stderr


@dataclass(frozen=True, eq=False)
class _LatticeV:
    """Bilinear interpolant of ``V_hat`` over a (parameter, level) lattice.

    Zero for negative levels, linear continuation ``V(a_max) + (a - a_max)``
    above the lattice (the harmonic function has unit slope at infinity),
    and parameter clamping to the lattice range.
    """

    x_params: np.ndarray
    a_values: np.ndarray
    table: np.ndarray
    stderr_table: np.ndarray = field(repr=False, default=None)

    def __call__(self, params, levels):
        params = np.asarray(params, dtype=float)
        levels = np.asarray(levels, dtype=float)
        p = np.clip(params, self.x_params[0], self.x_params[-1])
        a_hi = self.a_values[-1]
        a = np.clip(levels, self.a_values[0], a_hi)
        ip = np.clip(np.searchsorted(self.x_params, p) - 1, 0, len(self.x_params) - 2)
        ia = np.clip(np.searchsorted(self.a_values, a) - 1, 0, len(self.a_values) - 2)
        fp = (p - self.x_params[ip]) / (self.x_params[ip + 1] - self.x_params[ip])
        fa = (a - self.a_values[ia]) / (self.a_values[ia + 1] - self.a_values[ia])
        low = (1.0 - fp) * self.table[ip, ia] + fp * self.table[ip + 1, ia]
        high = (1.0 - fp) * self.table[ip, ia + 1] + fp * self.table[ip + 1, ia + 1]
        out = (1.0 - fa) * low + fa * high
        out = out + np.maximum(levels - a_hi, 0.0)
        return np.where(levels < 0.0, 0.0, out)


def build_V_evaluator(
    law: MatrixLaw,
    x_params,
    a_values,
    n_schedule,
    paths: int,
    seed,
    workers: int = 1,
) -> _LatticeV:
    """Estimate ``V`` on a (parameter, level) lattice and wrap it bilinearly.

    One independent substream per lattice cell, spawned deterministically
    from ``seed``.  d = 2 only (the lattice lives on the first coordinate).
    """
    if law.dim != 2:
        raise ValueError("the V lattice is defined for d = 2")
    x_params = np.asarray(sorted(float(p) for p in x_params))
    a_values = np.asarray(sorted(float(v) for v in a_values))
    if a_values[0] < 0.0:
        raise ValueError("lattice levels must be >= 0")
    seeds = _batch.as_seed_sequence(seed).spawn(len(x_params) * len(a_values))
    table = np.empty((len(x_params), len(a_values)))
    stderr_table = np.empty_like(table)
    pos = 0
    for i, p in enumerate(x_params):
        x = SimplexVector(np.asarray([p, 1.0 - p]))
        for j, lvl in enumerate(a_values):
            est = estimate_V(law, x, lvl, n_schedule, paths, seeds[pos], workers=workers)
            table[i, j] = est.V_hat
            stderr_table[i, j] = est.V_stderr
            pos += 1
    return _LatticeV(x_params=x_params, a_values=a_values, table=table, stderr_table=stderr_table)
