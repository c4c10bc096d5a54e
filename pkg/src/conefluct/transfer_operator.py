"""Grid-discretized transfer operator on the two-dimensional simplex.

For ``d = 2`` the simplex is the segment ``x = (t, 1 - t)``, ``t in [0, 1]``,
so the averaging operator

    P f(x)   = sum_k w_k f(g_k . x)
    P_t f(x) = sum_k w_k exp(i t rho(g_k, x)) f(g_k . x)

is discretized exactly on a uniform parameter grid with piecewise-linear
interpolation at the mapped points.  The discretized ``P`` is row-stochastic
by construction, which gives three spectral quantities:

* the invariant weights ``nu`` (adjoint power iteration),
* the drift ``gamma = nu(rho_bar)`` and the fluctuation variance
  ``sigma^2 = -(d^2/dt^2) lambda_t |_{t=0}``, read off the dominant
  eigenvalue curvature of ``P_t`` at 0,
* the centered-drift potential ``Theta = sum_n P^n rho_bar`` solving
  ``Theta - P Theta = rho_bar``, whose sup norm calibrates the
  martingale-approximation constant ``A = 2 sup |Theta|``.

Operator work is d = 2 only; higher dimensions are refused here and covered
by the Monte Carlo layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matrix_core import PositiveMatrix, SimplexVector, act
from .matrix_law import MatrixLaw

__all__ = [
    "SimplexGrid",
    "GridFunction",
    "PoissonSolution",
    "ConvergenceError",
    "DegenerateLawError",
    "stationary_measure",
    "lyapunov_exact",
    "apply_P",
    "apply_P_t",
    "dominant_eigenvalue",
    "sigma2_spectral",
    "solve_poisson",
    "evaluate_theta",
]


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class DegenerateLawError(RuntimeError):
    """The fluctuation variance is not positive: the walk is degenerate."""


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """Uniform grid on the d = 2 simplex parametrized by the first coordinate.

    Node i is ``x_i = (t_i, 1 - t_i)`` with ``t_i = i / (resolution - 1)``,
    so the nodes are strictly increasing in the first coordinate and include
    both vertices.
    """

    resolution: int
    params: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid needs at least 2 nodes")
        t = np.linspace(0.0, 1.0, self.resolution)
        t.setflags(write=False)
        object.__setattr__(self, "params", t)

    def nodes(self) -> np.ndarray:
        """Grid nodes as (resolution, 2) simplex points."""
        return np.stack([self.params, 1.0 - self.params], axis=1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values tabulated on the nodes of a SimplexGrid (real or complex)."""

    grid: SimplexGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values)
        if v.shape != (self.grid.resolution,):
            raise ValueError(f"need one value per node, got shape {v.shape}")
        if not np.issubdtype(v.dtype, np.complexfloating):
            v = v.astype(float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def interp(self, params):
        """Piecewise-linear evaluation at arbitrary parameters in [0, 1]."""
        params = np.asarray(params, dtype=float)
        if np.issubdtype(self.values.dtype, np.complexfloating):
            re = np.interp(params, self.grid.params, self.values.real)
            im = np.interp(params, self.grid.params, self.values.imag)
            return re + 1j * im
        return np.interp(params, self.grid.params, self.values)


class _Workspace:
    """Tabulated atom actions on a grid: interpolation stencil plus cocycle.

    For node ``x_i`` and atom ``g_k`` the mapped parameter of ``g_k . x_i``
    is stored as a lower index and fraction, and ``rho(g_k, x_i)`` as a
    table.  Forward application uses the gather form
    ``f(lo) + frac * (f(hi) - f(lo))`` so that constants are preserved
    exactly; the adjoint scatters mass with the same stencil.
    """

    def __init__(self, law: MatrixLaw, grid: SimplexGrid):
        if law.dim != 2:
            raise ValueError(
                f"grid transfer operators support d = 2 only, got d = {law.dim}; "
                "use the Monte Carlo estimators for higher dimensions"
            )
        self.law = law
        self.grid = grid
        G = grid.resolution
        X = grid.nodes()
        lo, frac, rho = [], [], []
        for g in law.atom_stack:
            Y = X @ g.T
            mass = Y.sum(axis=1)
            pos = (Y[:, 0] / mass) * (G - 1)
            lo_k = np.clip(np.floor(pos).astype(np.int64), 0, G - 2)
            lo.append(lo_k)
            frac.append(pos - lo_k)
            rho.append(np.log(mass))
        self.lo = np.stack(lo)
        self.frac = np.stack(frac)
        self.rho = np.stack(rho)
        self.weights = law.weights

    def rho_bar(self) -> np.ndarray:
        return self.weights @ self.rho

    def apply(self, values: np.ndarray, phases=None) -> np.ndarray:
        out = np.zeros(self.grid.resolution, dtype=complex if phases is not None else values.dtype)
        for k, w in enumerate(self.weights):
            lo, frac = self.lo[k], self.frac[k]
            mapped = values[lo] + frac * (values[lo + 1] - values[lo])
            if phases is not None:
                mapped = phases[k] * mapped
            out = out + w * mapped
        return out

    def apply_adjoint(self, nu: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.resolution)
        for k, w in enumerate(self.weights):
            lo, frac = self.lo[k], self.frac[k]
            np.add.at(out, lo, w * nu * (1.0 - frac))
            np.add.at(out, lo + 1, w * nu * frac)
        return out

    def dense(self) -> np.ndarray:
        G = self.grid.resolution
        B = np.zeros((G, G))
        rows = np.arange(G)
        for k, w in enumerate(self.weights):
            lo, frac = self.lo[k], self.frac[k]
            np.add.at(B, (rows, lo), w * (1.0 - frac))
            np.add.at(B, (rows, lo + 1), w * frac)
        return B


def apply_P(law: MatrixLaw, f: GridFunction) -> GridFunction:
    """One application of the averaging operator to a tabulated function.

    Row-stochasticity is inherited from the gather form: constants map to
    themselves up to the floating sum of the weights.
    """
    ws = _Workspace(law, f.grid)
    return GridFunction(f.grid, ws.apply(f.values))


def apply_P_t(law: MatrixLaw, f: GridFunction, t: float) -> GridFunction:
    """One application of the frequency-t twisted operator (complex output)."""
    ws = _Workspace(law, f.grid)
    phases = np.exp(1j * t * ws.rho)
    return GridFunction(f.grid, ws.apply(f.values.astype(complex), phases))


def stationary_measure(
    law: MatrixLaw,
    grid: SimplexGrid,
    tol: float = 1e-10,
    max_iter: int = 20_000,
) -> GridFunction:
    """Invariant weights of the discretized operator on the grid nodes.

    Adjoint power iteration from the uniform start; when the plain iteration
    stalls (complex subdominant pair), the tail average of the iterates is
    used instead.  The returned weights are non-negative, sum to one, and
    satisfy ``|nu(P f) - nu(f)| <= tol`` for the polynomial test family.
    """
    ws = _Workspace(law, grid)
    G = grid.resolution
    nu = np.full(G, 1.0 / G)
    window: list[np.ndarray] = []
    err = math.inf
    for _ in range(max_iter):
        nxt = ws.apply_adjoint(nu)
        nxt /= nxt.sum()
        err = float(np.abs(nxt - nu).sum())
        nu = nxt
        window.append(nu)
        if len(window) > 16:
            window.pop(0)
        if err < tol * 1e-2:
            break
    else:
        # tail averaging damps rotating modes that block plain iteration
        avg = np.mean(window, axis=0)
        avg /= avg.sum()
        avg_err = float(np.abs(ws.apply_adjoint(avg) - avg).sum())
        if avg_err < tol * 1e-1:
            nu, err = avg, avg_err
        else:
            raise ConvergenceError("stationary measure iteration did not converge", err)
    t = grid.params
    for f in (t, t**2, np.cos(np.pi * t)):
        residual = abs(float(nu @ ws.apply(f)) - float(nu @ f))
        if residual > tol:
            raise ConvergenceError("stationary weights fail the invariance residual", residual)
    return GridFunction(grid, nu)


def lyapunov_exact(law: MatrixLaw, nu: GridFunction) -> float:
    """Drift ``gamma = nu(rho_bar)`` by quadrature against the grid weights."""
    ws = _Workspace(law, nu.grid)
    return float(nu.values @ ws.rho_bar())


def dominant_eigenvalue(
    law: MatrixLaw,
    grid: SimplexGrid,
    t: float,
    tol: float = 1e-13,
    max_iter: int = 5000,
):
    """Dominant eigenvalue of the twisted operator, with a gap surrogate.

    Power iteration from a fixed non-constant start; the eigenvalue is the
    average of the last (up to) 20 Rayleigh ratios once successive ratios
    agree within ``tol``.  ``kappa_hat`` estimates the subdominant-to-dominant
    modulus ratio from the geometric decay of the ratio increments (0.0 when
    convergence is immediate).  Raises ConvergenceError when the ratios still
    oscillate after ``max_iter`` iterations.
    """
    ws = _Workspace(law, grid)
    phases = np.exp(1j * t * ws.rho) if t != 0.0 else None
    phi = (1.0 + 0.5 * np.cos(np.pi * grid.params)).astype(complex)
    history: list[complex] = []
    for _ in range(max_iter):
        psi = ws.apply(phi, phases) if phases is not None else ws.apply(phi)
        lam = complex(np.vdot(phi, psi) / np.vdot(phi, phi))
        history.append(lam)
        scale = np.abs(psi).max()
        if scale == 0.0:
            raise ConvergenceError("iterate collapsed to zero", math.inf)
        phi = psi / scale
        if len(history) >= 30 and abs(history[-1] - history[-2]) < tol:
            break
    else:
        raise ConvergenceError(
            "power iteration ratios kept oscillating",
            abs(history[-1] - history[-2]) if len(history) > 1 else math.inf,
        )
    lam_est = complex(np.mean(history[-20:]))
    deltas = np.abs(np.diff(np.asarray(history)))
    usable = np.nonzero(deltas > 1e-14)[0]
    if usable.size >= 3:
        ks = usable[-min(usable.size, 40):]
        slope = np.polyfit(ks.astype(float), np.log(deltas[ks]), 1)[0]
        kappa_hat = float(min(math.exp(slope), 1.0))
    else:
        kappa_hat = 0.0
    return lam_est, kappa_hat


def sigma2_spectral(
    law: MatrixLaw,
    grid: SimplexGrid,
    h: float = 0.05,
    tol: float = 1e-13,
    max_iter: int = 5000,
) -> float:
    """Fluctuation variance from the eigenvalue curvature at frequency zero.

    Uses ``sigma^2(h) = 2 (1 - Re lambda_h) / h^2`` at ``h`` and ``h/2`` and
    Richardson-extrapolates the quadratic truncation error away.  Raises
    DegenerateLawError when the extrapolated value is negative beyond
    rounding, which is the degenerate (zero-variance) regime.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    lam_h, _ = dominant_eigenvalue(law, grid, h, tol=tol, max_iter=max_iter)
    lam_h2, _ = dominant_eigenvalue(law, grid, h / 2.0, tol=tol, max_iter=max_iter)
    s_h = 2.0 * (1.0 - lam_h.real) / h**2
    s_h2 = 2.0 * (1.0 - lam_h2.real) / (h / 2.0) ** 2
    value = (4.0 * s_h2 - s_h) / 3.0
    if value < -1e-8:
        raise DegenerateLawError(
            f"extrapolated curvature gives sigma^2 = {value:.3e} < 0; "
            "the additive fluctuations look degenerate"
        )
    return max(value, 0.0)


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    """Potential ``Theta`` with its truncation and cross-check diagnostics.

    ``theta`` solves ``Theta - P Theta = rho_bar - drift`` on the grid;
    ``A = 2 sup |Theta|`` is the martingale-approximation constant.
    ``residual`` is the sup norm of the defining equation, ``dense_gap`` the
    sup gap to an independent dense linear solve, ``tail_bound`` a geometric
    estimate of the discarded series tail, and ``interp_slack`` a
    second-difference estimate of the piecewise-linear interpolation error.
    """

    theta: GridFunction
    drift: float
    A: float
    truncation_n: int
    tail_bound: float
    residual: float
    dense_gap: float
    interp_slack: float

    def theta_at(self, params):
        return self.theta.interp(params)


def solve_poisson(
    law: MatrixLaw,
    nu: GridFunction,
    tol: float = 1e-10,
    max_terms: int = 20_000,
) -> PoissonSolution:
    """Sum the series ``Theta = sum_n P^n (rho_bar - drift)`` on the grid.

    The drift is removed by quadrature against ``nu`` before summing, which
    is what makes the series summable.  Terms are added until the sup norm
    of the next term falls below ``tol``; the result is cross-validated
    against a dense solve of ``(I - B + 1 nu^T) Theta = rho_bar - drift``.
    Raises ConvergenceError when the increments stop decreasing.
    """
    ws = _Workspace(law, nu.grid)
    rho_bar = ws.rho_bar()
    drift = float(nu.values @ rho_bar)
    rhs = rho_bar - drift
    theta = rhs.copy()
    term = rhs
    increments = [float(np.abs(term).max())]
    for n_terms in range(1, max_terms + 1):
        term = ws.apply(term)
        inc = float(np.abs(term).max())
        increments.append(inc)
        if inc < tol:
            break
        theta += term
        if n_terms >= 50 and inc > max(increments[n_terms - 40 : n_terms]):
            raise ConvergenceError("potential series increments stopped decreasing", inc)
    else:
        raise ConvergenceError("potential series did not reach tolerance", increments[-1])
    # geometric tail estimate from the last decade of increments
    rate = (increments[-1] / increments[-11]) ** 0.1 if len(increments) > 11 else 0.5
    tail_bound = increments[-1] * rate / (1.0 - rate) if rate < 1.0 else math.inf
    residual = float(np.abs(theta - rhs - ws.apply(theta)).max())
    G = nu.grid.resolution
    system = np.eye(G) - ws.dense() + np.outer(np.ones(G), nu.values)
    try:
        theta_dense = np.linalg.solve(system, rhs)
        dense_gap = float(np.abs(theta - theta_dense).max())
    except np.linalg.LinAlgError:
        # identity-action laws make the dense system rank-deficient; fall
        # back to the defect of the series solution in that system instead
        dense_gap = float(np.abs(system @ theta - rhs).max())
    interp_slack = float(np.abs(np.diff(theta, 2)).max() / 8.0)
    return PoissonSolution(
        theta=GridFunction(nu.grid, theta),
        drift=drift,
        A=2.0 * float(np.abs(theta).max()),
        truncation_n=len(increments) - 1,
        tail_bound=tail_bound,
        residual=residual,
        dense_gap=dense_gap,
        interp_slack=interp_slack,
    )


def evaluate_theta(sol: PoissonSolution, g: PositiveMatrix, x: SimplexVector):
    """Return ``(theta(g, x), Pbar_theta(g, x))`` for one matrix and point.

    ``theta(g, x) = rho(g, x) + Theta(g . x)`` is the martingale increment
    potential; its conditional mean given the arrival point is
    ``Pbar_theta(g, x) = Theta(g . x)``, bounded by ``A / 2``.
    """
    if g.dim != 2:
        raise ValueError("tabulated Theta is defined on the d = 2 grid only")
    y, rho = act(g, x)
    pbar = float(sol.theta.interp(y.coords[0]))
    return rho + pbar, pbar
