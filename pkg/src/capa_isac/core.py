"""Optimal ISAC waveform: K x K reduction, multiplier bisection, closed-form objective.

The stationary waveform of the weighted MUI / mismatch functional has the form

    mu j(s) = rho sum_k (c_k - z_k) conj(H_k(s)) + (1 - rho) j_d(s),
    z_k     = int H_k(s) j(s) ds,

so only K numbers z (and the multiplier mu) are unknown. They follow from

    (mu I + rho Q) z = rho Q c + (1 - rho) u,    int |j|^2 = P_t,

with Q the channel Gram matrix and u the channel/reference couplings.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .em import ApertureGeometry, Medium, User, channel_matrix
from .quadrature import DEFAULT_ORDER, aperture_nodes, gauss_legendre_rule
from .reference import ReferenceDesign, TargetSet, design_reference
from .wavenumber import WaveformExpansion

log = logging.getLogger(__name__)

BISECTION_TOL = 1e-11
MAX_EXPANSIONS = 200
MAX_BISECTIONS = 400


class BracketError(RuntimeError):
    """The power equation could not be bracketed; the scenario is degenerate."""


@dataclass(frozen=True)
class Scenario:
    aperture: ApertureGeometry
    medium: Medium
    users: tuple
    targets: Optional[TargetSet]
    power: float = 5.0
    rho: float = 0.5
    quadrature_order: int = DEFAULT_ORDER

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0,1]")
        if not self.power > 0:
            raise ValueError("transmit power must be positive")
        if self.rho > 0 and not self.users:
            raise ValueError("communication (rho > 0) requires at least one user")
        if self.rho < 1 and not self.targets:
            raise ValueError("sensing (rho < 1) requires at least one target")
        if self.targets is not None and not isinstance(self.targets, TargetSet):
            object.__setattr__(self, "targets", TargetSet(self.targets))

    @property
    def symbols(self) -> np.ndarray:
        return np.array([u.symbol for u in self.users], dtype=complex)

    def replace(self, **changes) -> "Scenario":
        fields = dict(
            aperture=self.aperture, medium=self.medium, users=self.users, targets=self.targets,
            power=self.power, rho=self.rho, quadrature_order=self.quadrature_order,
        )
        fields.update(changes)
        return Scenario(**fields)


@dataclass(frozen=True)
class CorrelationData:
    Q: np.ndarray
    u: np.ndarray
    c: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class Objective:
    f_c: float
    f_s: float
    objective: float
    reduced: float  # the j-dependent part, constants dropped
    inner_ref: complex  # int conj(j_d) j ds


@dataclass(frozen=True)
class IsacSolution:
    mu: float
    z: np.ndarray
    waveform: WaveformExpansion
    f_c: float
    f_s: float
    objective: float
    reduced_objective: float
    iterations: int
    rho: float
    power: float
    data: CorrelationData = field(repr=False)

    def summary(self) -> dict:
        return {
            "mu_star": self.mu,
            "z": [[float(v.real), float(v.imag)] for v in self.z],
            "f_c": self.f_c,
            "f_s": self.f_s,
            "objective": self.objective,
            "bisection_iters": self.iterations,
        }


def scenario_nodes(scenario: Scenario, order: Optional[int] = None):
    return aperture_nodes(scenario.aperture, gauss_legendre_rule(order or scenario.quadrature_order))


def channel_gram(scenario: Scenario, order: Optional[int] = None) -> np.ndarray:
    """Q[i, k] = int H_i(s) conj(H_k(s)) ds, Hermitian-symmetrized."""
    nodes = scenario_nodes(scenario, order)
    H = channel_matrix(scenario.users, nodes.points, scenario.medium)
    return gram_from_samples(H, nodes.weights)


def gram_from_samples(H: np.ndarray, weights: np.ndarray) -> np.ndarray:
    Q = (H * weights) @ H.conj().T
    return 0.5 * (Q + Q.conj().T)


def reference_coupling(scenario: Scenario, j_d: WaveformExpansion, order: Optional[int] = None) -> np.ndarray:
    """u[i] = int H_i(s) j_d(s) ds."""
    nodes = scenario_nodes(scenario, order)
    H = channel_matrix(scenario.users, nodes.points, scenario.medium)
    jd = j_d.evaluate(nodes.points, scenario.users, scenario.medium)
    return (H * nodes.weights) @ jd


def correlation_data(scenario: Scenario, j_d: WaveformExpansion, order: Optional[int] = None) -> CorrelationData:
    nodes = scenario_nodes(scenario, order)
    H = channel_matrix(scenario.users, nodes.points, scenario.medium)
    jd = j_d.evaluate(nodes.points, scenario.users, scenario.medium)
    Q = gram_from_samples(H, nodes.weights)
    u = (H * nodes.weights) @ jd
    return CorrelationData(Q, u, scenario.symbols)


def z_of_mu(mu: float, data: CorrelationData, rho: float) -> np.ndarray:
    K = data.n_users
    A = mu * np.eye(K) + rho * data.Q
    rhs = rho * data.Q @ data.c + (1 - rho) * data.u
    return np.linalg.solve(A, rhs)


def tilde_c(data: CorrelationData, rho: float, power: float) -> float:
    c, Q, u = data.c, data.Q, data.u
    return float(
        rho ** 2 * np.vdot(c, Q @ c).real + (1 - rho) ** 2 * power + 2 * rho * (1 - rho) * np.vdot(c, u).real
    )


def power_identity(mu: float, z: np.ndarray, data: CorrelationData, rho: float, power: float) -> float:
    """int |j(s; mu)|^2 ds from z(mu), written exactly as the power-balance identity.

    Loses precision for |mu| -> 0 (cancellation in the numerator); the
    bisection evaluates the algebraically identical eigenbasis form instead.
    """
    c, Q, u = data.c, data.Q, data.u
    num = (
        rho ** 2 * np.vdot(z, Q @ z).real
        - 2 * rho ** 2 * np.vdot(c, Q @ z).real
        - 2 * rho * (1 - rho) * np.vdot(z, u).real
        + tilde_c(data, rho, power)
    )
    return float(num / mu ** 2)


class _EigenForm:
    """Cancellation-free evaluation of int |j(mu)|^2 in the eigenbasis of Q.

    With j = sum_k beta_k conj(H_k) + alpha j_d, alpha = (1 - rho)/mu and
    beta = rho (mu I + rho Q)^{-1} (c - alpha u), the power is
    beta^H Q beta + 2 alpha Re(u^H beta) + alpha^2 P_t.
    Supports a batch of symbol vectors ``c`` of shape (..., K).
    """

    def __init__(self, Q: np.ndarray, u: np.ndarray, rho: float, power: float):
        lam, V = np.linalg.eigh(Q)
        self.lam = np.clip(lam, 0.0, None)
        self.V = V
        self.ub = V.conj().T @ u
        self.rho = rho
        self.power = power

    def project(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c) @ self.V.conj()

    def power_of(self, mu, cb: np.ndarray) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        rho = self.rho
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(rho < 1, (1 - rho) / mu, 0.0)
        a = alpha[..., None] if np.ndim(alpha) else alpha
        m = mu[..., None] if np.ndim(mu) else mu
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = rho * (cb - a * self.ub) / (m + rho * self.lam)
        p = np.sum(self.lam * np.abs(beta) ** 2, axis=-1)
        p = p + 2 * alpha * np.sum(self.ub.conj() * beta, axis=-1).real + alpha ** 2 * self.power
        return p

    def floor(self, cb: np.ndarray) -> np.ndarray:
        """Lowest admissible multiplier: below it mu I + rho Q loses definiteness
        on the components actually excited by the right-hand side."""
        rho = self.rho
        tr = max(self.lam.sum(), 1e-300)
        live = (self.lam > 1e-12 * tr) & (np.abs(cb) > 1e-14 * (np.abs(cb).max(axis=-1, keepdims=True) + 1e-300))
        lam_live = np.where(live, self.lam, np.inf)
        lmin = lam_live.min(axis=-1)
        return np.where(np.isfinite(lmin), -rho * lmin, 0.0)


def _bisect_batch(power_fn: Callable, floor: np.ndarray, target: float, tol: float):
    """Vectorized bracket + bisection of a decreasing power curve.

    Upper end doubles from 1; lower end approaches 0 by halving and, if the
    curve stays below target there, approaches the (negative) floor.
    Returns (mu, iterations, ok).
    """
    n = floor.shape[0]
    hi = np.ones(n)
    ok_hi = power_fn(hi) <= target
    for _ in range(MAX_EXPANSIONS):
        if ok_hi.all():
            break
        hi = np.where(ok_hi, hi, 2 * hi)
        ok_hi = power_fn(hi) <= target

    lo = np.ones(n)
    p_lo = power_fn(lo)
    ok_lo = p_lo >= target
    k = 0
    for k in range(1, MAX_EXPANSIONS + 1):
        if ok_lo.all():
            break
        lo = np.where(ok_lo, lo, 2.0 ** -k)
        p_lo = power_fn(lo)
        ok_lo = p_lo >= target
    if not ok_lo.all():
        # no root on mu > 0: only happens without a reference component (rho = 1)
        neg = ~ok_lo & (floor < 0)
        for k in range(1, MAX_EXPANSIONS + 1):
            cand = floor * (1 - 2.0 ** -k)
            p = power_fn(np.where(neg & ~ok_lo, cand, lo))
            lo = np.where(neg & ~ok_lo, cand, lo)
            ok_lo = ok_lo | (p >= target)
            if ok_lo.all():
                break
    ok = ok_lo & ok_hi
    lo = np.where(ok, lo, np.nan)
    hi = np.where(ok, hi, np.nan)

    mu = np.where(np.abs(power_fn(hi) - target) <= tol * target, hi, lo)
    iters = np.zeros(n, dtype=int)
    done = ~ok | (np.abs(power_fn(mu) - target) <= tol * target)
    for it in range(1, MAX_BISECTIONS + 1):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        p = power_fn(mid)
        above = p > target
        lo = np.where(~done & above, mid, lo)
        hi = np.where(~done & ~above, mid, hi)
        mu = np.where(done, mu, mid)
        iters = np.where(done, iters, it)
        done = done | (np.abs(p - target) <= tol * target) | (hi - lo <= 1e-15 * np.abs(mid))
    return mu, iters, ok


def solve_multiplier(data: CorrelationData, rho: float, power: float, tol: float = BISECTION_TOL) -> tuple[float, int]:
    """Find mu* with int |j(mu*)|^2 = P_t (relative tolerance ``tol``)."""
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0,1]")
    form = _EigenForm(data.Q, data.u, rho, power)
    cb = form.project(data.c)[None, :]
    mu, iters, ok = _bisect_batch(lambda m: form.power_of(m, cb), form.floor(cb), power, tol)
    if not ok[0]:
        probe = [float(form.power_of(np.array([m]), cb)[0]) for m in (2.0 ** -MAX_EXPANSIONS, 1.0, 2.0 ** 20)]
        raise BracketError(
            f"cannot bracket the power equation (target {power:g}); "
            f"power at mu=2^-{MAX_EXPANSIONS}, 1, 2^20: {probe}"
        )
    return float(mu[0]), int(iters[0])


def solve_multiplier_batch(Q, u, symbols, rho, power, tol=BISECTION_TOL):
    """mu* and z for many symbol vectors sharing one channel realization.

    ``symbols`` has shape (S, K); returns (mu (S,), z (S, K), ok (S,)).
    """
    form = _EigenForm(Q, u, rho, power)
    cb = form.project(symbols)
    mu, _, ok = _bisect_batch(lambda m: form.power_of(m, cb), form.floor(cb), power, tol)
    rhs = rho * cb * form.lam + (1 - rho) * form.ub
    zb = rhs / (mu[:, None] + rho * form.lam)
    z = zb @ form.V.T
    return mu, z, ok


def assemble_waveform(mu: float, z: np.ndarray, scenario: Scenario, j_d: Optional[WaveformExpansion]) -> WaveformExpansion:
    rho = scenario.rho
    beta = rho * (scenario.symbols - z) / mu if scenario.users else None
    if rho < 1 and j_d is not None:
        fourier = (1 - rho) / mu * j_d.fourier
        return WaveformExpansion(scenario.aperture, j_d.order, fourier, beta)
    return WaveformExpansion(scenario.aperture, None, None, beta)


def evaluate_objective(mu: float, z: np.ndarray, data: CorrelationData, rho: float, power: float) -> Objective:
    c, u = data.c, data.u
    f_c = float(np.sum(np.abs(z - c) ** 2))
    inner = -rho / mu * np.vdot(u, z) + rho / mu * np.vdot(u, c) + (1 - rho) / mu * power
    f_s = float(2 * power - 2 * inner.real)
    objective = rho * f_c + (1 - rho) * f_s
    reduced = float(
        rho * np.vdot(z, z).real - 2 * rho * np.vdot(z, c).real - 2 * (1 - rho) * inner.real
    )
    const = rho * float(np.vdot(c, c).real) + 2 * (1 - rho) * power
    assert abs(objective - (reduced + const)) <= 1e-9 * max(1.0, abs(objective), abs(const)), (
        "closed-form objective inconsistent with reduced form"
    )
    return Objective(f_c, f_s, objective, reduced, complex(inner))


def fredholm_residual(
    waveform: WaveformExpansion, mu: float, scenario: Scenario, j_d: Optional[WaveformExpansion], points, z=None
) -> float:
    """Normalized residual of the optimality (Fredholm) equation at sample points.

    ``z`` defaults to the channel outputs of ``waveform`` by quadrature.
    """
    pts = np.atleast_2d(points)
    users, medium, rho = scenario.users, scenario.medium, scenario.rho
    if z is None:
        nodes = scenario_nodes(scenario)
        Hn = channel_matrix(users, nodes.points, medium)
        z = (Hn * nodes.weights) @ waveform.evaluate(nodes.points, users, medium)
    j = waveform.evaluate(pts, users, medium)
    H = channel_matrix(users, pts, medium)
    rhs = rho * (np.asarray(scenario.symbols) - z) @ H.conj()
    if j_d is not None and rho < 1:
        rhs = rhs + (1 - rho) * j_d.evaluate(pts)
    res = mu * j - rhs
    return float(np.max(np.abs(res)) / np.max(np.abs(j)))


def solve(
    scenario: Scenario,
    reference: Optional[ReferenceDesign] = None,
    tol: float = BISECTION_TOL,
    data: Optional[CorrelationData] = None,
) -> IsacSolution:
    """Run the full pipeline: reference, correlations, bisection, assembly, objective."""
    j_d = None
    if scenario.rho < 1 or scenario.targets:
        if reference is None:
            reference = design_reference(scenario.targets, scenario.power, scenario.aperture, scenario.medium)
        j_d = reference.waveform()
    if data is None:
        if j_d is not None:
            data = correlation_data(scenario, j_d)
        else:
            Q = channel_gram(scenario)
            data = CorrelationData(Q, np.zeros(len(scenario.users), dtype=complex), scenario.symbols)
    mu, iters = solve_multiplier(data, scenario.rho, scenario.power, tol)
    z = z_of_mu(mu, data, scenario.rho)
    waveform = assemble_waveform(mu, z, scenario, j_d)
    obj = evaluate_objective(mu, z, data, scenario.rho, scenario.power)
    log.debug("solve rho=%.3g: mu*=%.6g after %d bisections, f_c=%.4g f_s=%.4g", scenario.rho, mu, iters, obj.f_c, obj.f_s)
    return IsacSolution(
        mu=mu, z=z, waveform=waveform, f_c=obj.f_c, f_s=obj.f_s, objective=obj.objective,
        reduced_objective=obj.reduced, iterations=iters, rho=scenario.rho, power=scenario.power, data=data,
    )
