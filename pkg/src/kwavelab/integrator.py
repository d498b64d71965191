"""Time integration of the Galerkin system.

In modal coordinates the problem is, per mode m with eigenvalue mu_m,

    eps(t) a_m'' + (1 + delta S) mu_m a_m + mu_m a_m' + lam a_m = g_m + h_m,
    S = |grad u|^2 = sum_j mu_j a_j^2.

The strong damping term mu_m a' is stiff (rates scale with mu_max), so the
default scheme is a diagonal IMEX method of order two: trapezoidal rule on
the linear terms (mu a', mu a, lam a), two-step Adams-Bashforth on the
nonlocal Kirchhoff modulation and on g (one explicit Euler bootstrap step),
eps frozen at the half step, forcing averaged over the step endpoints. Each
step is a closed-form diagonal solve, O(N^d) work. A first-order
backward-Euler variant is kept for robustness studies.

The Kirchhoff coefficient S is lagged explicitly: it rides the slow time
scale, and AB2 extrapolation preserves second order without a fixed-point
iteration.

Steppers accept a leading batch axis, so an ensemble of initial states
evolves as one array. Time stamps are generated as origin + i*dt from a
fixed origin; a resumed run reuses the parent origin, which makes split runs
bitwise identical to unsplit ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .model import ModelSpec, eval_epsilon, eval_h
from .spectral import (Basis, ModalState, eval_nonlinearity_modal,
                       grad_norm_sq)

SCHEMES = ("imex2", "backward_euler_imex1")


class BlowUpError(RuntimeError):
    """Non-finite coefficients encountered; carries the failing time."""

    def __init__(self, t: float, member: Optional[int] = None):
        self.t = t
        self.member = member
        suffix = "" if member is None else f" (ensemble member {member})"
        super().__init__(f"non-finite state at t = {t:.6g}{suffix}")


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_start: float
    t_end: float
    scheme: str = "imex2"
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        span = self.t_end - self.t_start
        n = int(round(span / self.dt))
        if abs(n * self.dt - span) > 1e-9 * max(1.0, abs(span)):
            raise ValueError("time span must be an integer number of steps")
        return n


@dataclass(frozen=True)
class ResumePoint:
    """Carry-over needed to continue a multistep run without a bootstrap."""

    nl_prev: Optional[np.ndarray]
    origin_t: float
    origin_step: int


@dataclass(frozen=True)
class Trajectory:
    basis: Basis
    times: np.ndarray
    us: np.ndarray
    vs: np.ndarray
    accel_available: bool = True
    resume: Optional[ResumePoint] = None

    def __post_init__(self):
        if self.times.ndim != 1 or self.us.shape != self.vs.shape:
            raise ValueError("inconsistent trajectory arrays")
        if self.us.shape[0] != self.times.size:
            raise ValueError("record count mismatch")
        if np.any(np.diff(self.times) <= 0) and self.times.size > 1:
            raise ValueError("times must be strictly increasing")

    @property
    def n_records(self) -> int:
        return int(self.times.size)

    def state(self, i: int) -> ModalState:
        return ModalState(self.us[i].copy(), self.vs[i].copy(), float(self.times[i]))

    @property
    def final_state(self) -> ModalState:
        return self.state(self.n_records - 1)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(float(self.times[i]), t, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"t = {t:g} is not on the recorded grid")
        return i


def _explicit_term(spec: ModelSpec, basis: Basis, u: np.ndarray) -> np.ndarray:
    """Non-stiff explicit part of eps*b': g_m(u) - delta * S * mu_m * a_m."""
    out = eval_nonlinearity_modal(spec.g, basis, u)
    if spec.delta != 0.0:
        S = np.sum(basis.eigenvalues * u ** 2, axis=-1)
        out = out - spec.delta * np.expand_dims(S, -1) * (basis.eigenvalues * u)
    return out


def _step_imex2(spec, basis, dt, t, u, v, nl_cur, nl_prev, h_lo, h_hi):
    mu = basis.eigenvalues
    eps_h, _ = eval_epsilon(spec.epsilon, t + dt / 2.0)
    nl_eff = nl_cur if nl_prev is None else 1.5 * nl_cur - 0.5 * nl_prev
    rhs_force = nl_eff + 0.5 * (h_lo + h_hi)
    stiff = mu + spec.lam
    alpha = u + (dt / 2.0) * v
    denom = eps_h + (dt * dt / 4.0) * stiff + (dt / 2.0) * mu
    v_new = (eps_h * v - (dt / 2.0) * stiff * (u + alpha)
             - (dt / 2.0) * mu * v + dt * rhs_force) / denom
    u_new = alpha + (dt / 2.0) * v_new
    return u_new, v_new


def _step_be(spec, basis, dt, t, u, v, nl_cur, h_hi):
    mu = basis.eigenvalues
    eps_e, _ = eval_epsilon(spec.epsilon, t + dt)
    stiff = mu + spec.lam
    denom = eps_e + dt * mu + dt * dt * stiff
    v_new = (eps_e * v - dt * stiff * u + dt * (nl_cur + h_hi)) / denom
    u_new = u + dt * v_new
    return u_new, v_new


def step(state: ModalState, spec: ModelSpec, basis: Basis, cfg: StepConfig,
         nl_prev: Optional[np.ndarray] = None) -> ModalState:
    """Advance one step of cfg.dt from the state's own time."""
    t = state.t
    h_lo, _ = eval_h(spec.h, basis.n_modes, t)
    h_hi, _ = eval_h(spec.h, basis.n_modes, t + cfg.dt)
    nl_cur = _explicit_term(spec, basis, state.u)
    if cfg.scheme == "imex2":
        u_new, v_new = _step_imex2(spec, basis, cfg.dt, t, state.u, state.v,
                                   nl_cur, nl_prev, h_lo, h_hi)
    else:
        u_new, v_new = _step_be(spec, basis, cfg.dt, t, state.u, state.v, nl_cur, h_hi)
    if not np.all(np.isfinite(u_new)) or not np.all(np.isfinite(v_new)):
        raise BlowUpError(t + cfg.dt)
    return ModalState(u_new, v_new, t + cfg.dt)


def run(initial: ModalState, spec: ModelSpec, basis: Basis, cfg: StepConfig,
        resume: Optional[ResumePoint] = None) -> Trajectory:
    """Integrate and record every cfg.record_every-th step.

    Passing the previous run's ``trajectory.resume`` continues the multistep
    history, so a split run reproduces an unsplit one bit for bit.
    """
    if not math.isclose(initial.t, cfg.t_start, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError("initial state time must equal cfg.t_start")
    n = cfg.n_steps
    if n % cfg.record_every != 0:
        raise ValueError("record_every must divide the step count")
    if resume is not None:
        origin_t, origin_step = resume.origin_t, resume.origin_step
        nl_prev = resume.nl_prev
    else:
        origin_t, origin_step = cfg.t_start, 0
        nl_prev = None

    n_rec = n // cfg.record_every + 1
    times = np.empty(n_rec)
    us = np.empty((n_rec, basis.n_modes))
    vs = np.empty((n_rec, basis.n_modes))
    times[0], us[0], vs[0] = cfg.t_start, initial.u, initial.v

    u, v = initial.u.copy(), initial.v.copy()
    h_lo, _ = eval_h(spec.h, basis.n_modes, cfg.t_start)
    rec = 1
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is detected below
        for i in range(n):
            t = origin_t + (origin_step + i) * cfg.dt
            t_next = origin_t + (origin_step + i + 1) * cfg.dt
            nl_cur = _explicit_term(spec, basis, u)
            h_hi, _ = eval_h(spec.h, basis.n_modes, t_next)
            if cfg.scheme == "imex2":
                u, v = _step_imex2(spec, basis, cfg.dt, t, u, v, nl_cur, nl_prev, h_lo, h_hi)
            else:
                u, v = _step_be(spec, basis, cfg.dt, t, u, v, nl_cur, h_hi)
            nl_prev, h_lo = nl_cur, h_hi
            if not math.isfinite(float(u[0])) or (i + 1) % cfg.record_every == 0:
                if not np.all(np.isfinite(u)) or not np.all(np.isfinite(v)):
                    raise BlowUpError(float(t_next))
            if (i + 1) % cfg.record_every == 0:
                times[rec], us[rec], vs[rec] = t_next, u, v
                rec += 1
    return Trajectory(basis, times, us, vs,
                      resume=ResumePoint(nl_prev, origin_t, origin_step + n))


def evolve_ensemble(us: np.ndarray, vs: np.ndarray, spec: ModelSpec, basis: Basis,
                    t_start: float, t_end: float, dt: float,
                    scheme: str = "imex2") -> tuple[np.ndarray, np.ndarray]:
    """Endpoint-only batched integration of many initial states (rows)."""
    cfg = StepConfig(dt=dt, t_start=t_start, t_end=t_end, scheme=scheme)
    n = cfg.n_steps
    u = np.array(us, dtype=float)
    v = np.array(vs, dtype=float)
    nl_prev = None
    h_lo, _ = eval_h(spec.h, basis.n_modes, t_start)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            t = t_start + i * dt
            t_next = t_start + (i + 1) * dt
            nl_cur = _explicit_term(spec, basis, u)
            h_hi, _ = eval_h(spec.h, basis.n_modes, t_next)
            if scheme == "imex2":
                u, v = _step_imex2(spec, basis, dt, t, u, v, nl_cur, nl_prev, h_lo, h_hi)
            else:
                u, v = _step_be(spec, basis, dt, t, u, v, nl_cur, h_hi)
            nl_prev, h_lo = nl_cur, h_hi
            row_max = np.max(np.abs(u), axis=-1)
            if not np.all(np.isfinite(row_max)):
                member = int(np.argmax(~np.isfinite(row_max)))
                raise BlowUpError(float(t_next), member=member)
    return u, v


def reconstruct_accel(traj: Trajectory, spec: ModelSpec, t: float) -> np.ndarray:
    """u_tt at a recorded time, solved pointwise from the modal equation."""
    if not traj.accel_available:
        raise ValueError("trajectory does not solve the second-order problem; "
                         "acceleration is not reconstructable")
    i = traj.index_of(t)
    u, v = traj.us[i], traj.vs[i]
    mu = traj.basis.eigenvalues
    S = grad_norm_sq(traj.basis, u)
    gmod = eval_nonlinearity_modal(spec.g, traj.basis, u)
    hmod, _ = eval_h(spec.h, traj.basis.n_modes, t)
    eps, _ = eval_epsilon(spec.epsilon, t)
    return (gmod + hmod - (1.0 + spec.delta * S) * mu * u - mu * v - spec.lam * u) / eps


@dataclass(frozen=True)
class DecompositionPair:
    """Splitting u = u1 + u2 with u1 carrying the initial data through the
    monotone part of the flow and u2 the forced remainder.

    u1 solves the first-order system

        (1 + delta S(t)) mu a1 + mu a1' + lam a1 = f_m,
        f = phi(u) - phi(u - u1),  phi(s) = g(s) - k_eff s,

    with u1(t0) = u(t0); u2 := u - u1 by subtraction, so the sum invariant is
    exact and the u2 equation (with psi = -eps u_tt + k_eff u + h on the
    right) serves as a residual diagnostic.
    """

    u1: Trajectory
    u2: Trajectory
    parent: Trajectory
    k_eff: float
    residual_norms: np.ndarray = field(repr=False)

    @property
    def max_residual(self) -> float:
        vals = self.residual_norms[np.isfinite(self.residual_norms)]
        return float(np.max(vals)) if vals.size else 0.0


def _phi_modal(spec: ModelSpec, basis: Basis, u: np.ndarray, k_eff: float) -> np.ndarray:
    return eval_nonlinearity_modal(spec.g, basis, u) - k_eff * u


def run_decomposition(parent: Trajectory, spec: ModelSpec,
                      residual_tol: float = 1e-3) -> DecompositionPair:
    """Integrate the u1 system on the parent's recorded grid (Heun steps) and
    evaluate the u2 residual diagnostic."""
    basis = parent.basis
    mu = basis.eigenvalues
    k_eff = max(spec.g.k, 1e-3)  # phi must be strictly decreasing
    ts, us = parent.times, parent.us
    n = parent.n_records
    a1 = np.empty_like(us)
    v1 = np.empty_like(us)
    a1[0] = us[0]

    def rhs(i_time: int, a1_val: np.ndarray) -> np.ndarray:
        u = us[i_time]
        S = grad_norm_sq(basis, u)
        f = _phi_modal(spec, basis, u, k_eff) - _phi_modal(spec, basis, u - a1_val, k_eff)
        return (f - ((1.0 + spec.delta * S) * mu + spec.lam) * a1_val) / mu

    for i in range(n - 1):
        h = float(ts[i + 1] - ts[i])
        k1 = rhs(i, a1[i])
        pred = a1[i] + h * k1
        k2 = rhs(i + 1, pred)
        a1[i + 1] = a1[i] + 0.5 * h * (k1 + k2)
        v1[i] = k1
    v1[n - 1] = rhs(n - 1, a1[n - 1])

    a2 = us - a1
    v2 = parent.vs - v1
    u1_traj = Trajectory(basis, ts.copy(), a1, v1, accel_available=False)
    u2_traj = Trajectory(basis, ts.copy(), a2, v2, accel_available=False)

    residuals = np.full(n, np.nan)
    if n >= 5:
        h = float(ts[1] - ts[0])
        # 4th-order centered derivative of a2 on the recorded grid
        d_a2 = (-a2[4:] + 8.0 * a2[3:-1] - 8.0 * a2[1:-3] + a2[:-4]) / (12.0 * h)
        for j, i in enumerate(range(2, n - 2)):
            t = float(ts[i])
            S = grad_norm_sq(basis, us[i])
            eps, _ = eval_epsilon(spec.epsilon, t)
            accel = reconstruct_accel(parent, spec, t)
            hmod, _ = eval_h(spec.h, basis.n_modes, t)
            psi = -eps * accel + k_eff * us[i] + hmod
            res = ((1.0 + spec.delta * S) * mu * a2[i] + mu * d_a2[j]
                   + spec.lam * a2[i] - _phi_modal(spec, basis, a2[i], k_eff) - psi)
            residuals[i] = math.sqrt(float(np.sum(res ** 2)))
        worst = np.nanmax(residuals)
        if worst > residual_tol:
            i_bad = int(np.nanargmax(residuals))
            warnings.warn(f"decomposition residual {worst:.3e} exceeds {residual_tol:g} "
                          f"at t = {float(ts[i_bad]):.6g}", RuntimeWarning, stacklevel=2)
    return DecompositionPair(u1_traj, u2_traj, parent, k_eff, residuals)


@dataclass(frozen=True)
class DifferenceRun:
    traj_a: Trajectory
    traj_b: Trajectory
    z: Trajectory  # u_a - u_b with time derivative v_a - v_b


def run_difference(spec_a: ModelSpec, spec_b: ModelSpec,
                   x_a: ModalState, x_b: ModalState,
                   basis: Basis, cfg: StepConfig) -> DifferenceRun:
    """Run two problems that differ only in delta and emit z = u_a - u_b."""
    if replace(spec_a, delta=0.0) != replace(spec_b, delta=0.0):
        raise ValueError("specs must agree except for delta")
    if x_a.u.shape != x_b.u.shape or x_a.u.shape[-1] != basis.n_modes:
        raise ValueError("initial states must live on the shared basis")
    ta = run(x_a, spec_a, basis, cfg)
    tb = run(x_b, spec_b, basis, cfg)
    z = Trajectory(basis, ta.times.copy(), ta.us - tb.us, ta.vs - tb.vs,
                   accel_available=False)
    return DifferenceRun(ta, tb, z)
