"""Pullback ensembles, absorbing-set checks, and attractor cloud distances.

The pullback attractor at time t* is approximated by evolving a finite
ensemble sampled from the absorbing ball of radius B(t* - tau) forward over
a long horizon tau; the endpoint set is the cloud. Truncating the horizon
replaces the nested-intersection construction, and a Cauchy-in-tau self-test
quantifies the truncation error.

Sampling is frequency-spread: coefficients are drawn with variance
proportional to 1/mu_m (and 1/eps for the velocity block), which makes the
draw isotropic in the phase-space metric, then rescaled onto the sphere or
into the ball of the target radius. Distances between clouds are Hausdorff
semi-distances in the metric of the common evaluation time, computed by
brute-force pairwise comparison.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import EnergyParams, eval_B
from .integrator import evolve_ensemble
from .model import ModelSpec, eval_epsilon
from .spectral import Basis, ModalState

SAMPLINGS = ("sphere_surface", "ball_uniform")


@dataclass(frozen=True)
class EnsembleSpec:
    n_points: int = 64
    sampling: str = "sphere_surface"
    seed: int = 0
    taus: tuple[float, ...] = (5.0, 10.0, 20.0)

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("need at least one ensemble member")
        if self.sampling not in SAMPLINGS:
            raise ValueError(f"unknown sampling {self.sampling!r}")
        taus = tuple(float(t) for t in self.taus)
        if any(t <= 0 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("taus must be positive and strictly increasing")
        object.__setattr__(self, "taus", taus)


@dataclass(frozen=True)
class AttractorCloud:
    t_star: float
    tau: float
    delta: float
    basis: Basis
    us: np.ndarray
    vs: np.ndarray

    def __post_init__(self):
        if self.us.shape != self.vs.shape or self.us.shape[-1] != self.basis.n_modes:
            raise ValueError("cloud arrays do not match the basis")

    @property
    def n_points(self) -> int:
        return int(self.us.shape[0])

    @property
    def points(self) -> list[ModalState]:
        return [ModalState(self.us[i].copy(), self.vs[i].copy(), self.t_star)
                for i in range(self.n_points)]

    def diameter(self, eps_profile) -> float:
        w = _metric_weights(self.basis, eps_profile, self.t_star)
        P = np.concatenate([self.us, self.vs], axis=1) * np.sqrt(w)
        from scipy.spatial.distance import cdist
        D = cdist(P, P)
        return float(np.max(D))


def _metric_weights(basis: Basis, eps_profile, t: float) -> np.ndarray:
    eps, _ = eval_epsilon(eps_profile, t)
    return np.concatenate([basis.eigenvalues, np.full(basis.n_modes, eps)])


def _sample_arrays(spec: ModelSpec, params: EnergyParams, basis: Basis,
                   t: float, ens: EnsembleSpec) -> tuple[np.ndarray, np.ndarray]:
    radius = eval_B(t, spec, params, method="auto")
    eps, _ = eval_epsilon(spec.epsilon, t)
    rng = np.random.default_rng(ens.seed)
    n, m = ens.n_points, basis.n_modes
    y = rng.standard_normal((n, 2 * m))
    norms = np.sqrt(np.sum(y ** 2, axis=1))
    if ens.sampling == "sphere_surface":
        scale = radius / norms
    else:
        r = radius * rng.random(n) ** (1.0 / (2 * m))
        scale = r / norms
    y *= scale[:, None]
    us = y[:, :m] / np.sqrt(basis.eigenvalues)
    vs = y[:, m:] / math.sqrt(eps)
    return us, vs


def sample_absorbing_set(spec: ModelSpec, params: EnergyParams, basis: Basis,
                         t: float, ens: EnsembleSpec) -> list[ModalState]:
    """Deterministic draw of n states with |.|_{X_t} <= B(t) (equality on the
    sphere), spread across frequencies."""
    us, vs = _sample_arrays(spec, params, basis, t, ens)
    return [ModalState(us[i], vs[i], t) for i in range(ens.n_points)]


def _evolve_batch(us, vs, spec, basis, t0, t1, dt, threads: int = 1):
    if threads <= 1 or us.shape[0] == 1:
        return evolve_ensemble(us, vs, spec, basis, t0, t1, dt)
    chunks = np.array_split(np.arange(us.shape[0]), threads)
    chunks = [c for c in chunks if c.size]
    out_u = np.empty_like(us)
    out_v = np.empty_like(vs)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futs = [pool.submit(evolve_ensemble, us[c], vs[c], spec, basis, t0, t1, dt)
                for c in chunks]
        for c, fut in zip(chunks, futs):
            u, v = fut.result()
            out_u[c], out_v[c] = u, v
    return out_u, out_v


def pullback_cloud(spec: ModelSpec, params: EnergyParams, basis: Basis,
                   ens: EnsembleSpec, t_star: float, tau: float, dt: float,
                   threads: int = 1) -> AttractorCloud:
    """Evolve an absorbing-set sample from t_star - tau to t_star."""
    us, vs = _sample_arrays(spec, params, basis, t_star - tau, ens)
    if tau > 0:
        us, vs = _evolve_batch(us, vs, spec, basis, t_star - tau, t_star, dt, threads)
    return AttractorCloud(t_star, tau, spec.delta, basis, us, vs)


def hausdorff_semidist(A: AttractorCloud, B: AttractorCloud, eps_profile) -> float:
    """sup over a in A of the distance to B, in the metric at the common
    evaluation time (asymmetric)."""
    if A.n_points == 0 or B.n_points == 0:
        raise ValueError("clouds must be nonempty")
    if A.basis != B.basis or not math.isclose(A.t_star, B.t_star, abs_tol=1e-12):
        raise ValueError("clouds must share basis and evaluation time")
    w = np.sqrt(_metric_weights(A.basis, eps_profile, A.t_star))
    P = np.concatenate([A.us, A.vs], axis=1) * w
    Q = np.concatenate([B.us, B.vs], axis=1) * w
    from scipy.spatial.distance import cdist
    D = cdist(P, Q)
    return float(np.max(np.min(D, axis=1)))


@dataclass(frozen=True)
class AbsorbingRow:
    tau: float
    fraction_inside: float
    worst_ratio: float  # max |endpoint|_{X_t} / B(t)


@dataclass(frozen=True)
class AbsorbingReport:
    t: float
    radius: float
    rows: tuple[AbsorbingRow, ...]
    empirical_T: Optional[float]  # smallest tau from which absorption holds onward

    @property
    def passed(self) -> bool:
        return self.empirical_T is not None

    def to_dict(self) -> dict:
        return {"t": self.t, "radius": self.radius,
                "empirical_T": self.empirical_T, "passed": self.passed,
                "rows": [{"tau": r.tau, "fraction_inside": r.fraction_inside,
                          "worst_ratio": r.worst_ratio} for r in self.rows]}


def verify_absorbing(spec: ModelSpec, params: EnergyParams, basis: Basis,
                     ens: EnsembleSpec, t: float, taus=None, dt: float = 1e-2,
                     threads: int = 1) -> AbsorbingReport:
    """Check that samples of the absorbing ball at t - tau land inside the
    ball at t, for each pullback horizon tau."""
    taus = ens.taus if taus is None else tuple(taus)
    radius = eval_B(t, spec, params, method="auto")
    eps_t, _ = eval_epsilon(spec.epsilon, t)
    rows = []
    for tau in taus:
        us, vs = _sample_arrays(spec, params, basis, t - tau, ens)
        if tau > 0:
            us, vs = _evolve_batch(us, vs, spec, basis, t - tau, t, dt, threads)
        xt = np.sum(basis.eigenvalues * us ** 2, axis=1) + eps_t * np.sum(vs ** 2, axis=1)
        ratios = np.sqrt(xt) / radius
        inside = ratios <= 1.0 + 1e-10
        rows.append(AbsorbingRow(float(tau), float(np.mean(inside)),
                                 float(np.max(ratios))))
    empirical_T = None
    for i in range(len(rows)):
        if all(r.fraction_inside == 1.0 for r in rows[i:]):
            empirical_T = rows[i].tau
            break
    return AbsorbingReport(t, radius, tuple(rows), empirical_T)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    dist: float


@dataclass(frozen=True)
class SweepResult:
    t_star: float
    tau: float
    rows: tuple[SweepRow, ...]
    fitted_order: Optional[float]

    def to_dict(self) -> dict:
        return {"t_star": self.t_star, "tau": self.tau,
                "fitted_order": self.fitted_order,
                "rows": [{"delta": r.delta, "dist": r.dist} for r in self.rows]}


def semicontinuity_sweep(spec: ModelSpec, params: EnergyParams, basis: Basis,
                         ens: EnsembleSpec, deltas, t_star: float, tau: float,
                         dt: float, threads: int = 1) -> SweepResult:
    """Distance from each delta-cloud to the delta = 0 cloud at time t_star.

    The same seed (hence the same initial sample) is used for every delta, so
    the columns differ only through the flow. The fitted order is the log-log
    slope of dist against delta over the positive rows.
    """
    deltas = [float(d) for d in deltas]
    if sorted(deltas, reverse=True) != deltas:
        raise ValueError("delta list must be sorted descending")
    if deltas and deltas[-1] != 0.0:
        deltas = deltas + [0.0]
    ref_cloud = pullback_cloud(spec.with_delta(0.0), params, basis, ens,
                               t_star, tau, dt, threads)
    rows = []
    for d in deltas:
        if d == 0.0:
            cloud = ref_cloud
        else:
            cloud = pullback_cloud(spec.with_delta(d), params, basis, ens,
                                   t_star, tau, dt, threads)
        rows.append(SweepRow(d, hausdorff_semidist(cloud, ref_cloud, spec.epsilon)))
    pos = [(r.delta, r.dist) for r in rows if r.delta > 0 and r.dist > 0]
    order = None
    if len(pos) >= 2:
        ld = np.log([p[0] for p in pos])
        lv = np.log([p[1] for p in pos])
        order = float(np.polyfit(ld, lv, 1)[0])
    return SweepResult(t_star, tau, tuple(rows), order)
