"""Potential generation, transfer matrices and the Prufer phase map.

Conventions used throughout the package:

* the chain has sites 1..N carrying the potential; the eigenvector
  recurrence is ``u_{k+1} = (V_k - lambda) u_k - u_{k-1}`` with ghost values
  ``u_0 = 0`` (left Dirichlet) and ``u_{N+1} = 0`` (right Dirichlet);
* the state vector ``(u_{k+1}, u_k)`` is read as the complex number
  ``z_k = u_{k+1} + i u_k = r_k exp(i phi_k)``, so ``phi_0 = 0`` encodes
  ``u_0 = 0, u_1 = 1`` and ``r_0 = 1``;
* phases live in [0, 2*pi); densities and the forward-backward gluing are
  taken mod pi because eigenvector phases carry a sign ambiguity;
* log-radii are accumulated with a renormalized unit-vector iteration so
  paths of any length never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine import derive_rng

__all__ = [
    "TWO_PI",
    "wrap_2pi",
    "wrap_pi",
    "PotentialSpec",
    "Disorder",
    "sample_disorder",
    "Transfer2",
    "transfer_matrix",
    "phase_step",
    "phase_step_inv",
    "lift_step",
    "PruferPath",
    "forward_path",
]

TWO_PI = 2.0 * np.pi


def _scalar_ok(x):
    return float(x) if np.ndim(x) == 0 else x


def wrap_2pi(phi):
    """Canonical representative in [0, 2*pi)."""
    out = np.mod(phi, TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    return _scalar_ok(out)


def wrap_pi(phi):
    """Canonical representative in [0, pi) (sign quotient)."""
    out = np.mod(phi, np.pi)
    out = np.where(out >= np.pi, 0.0, out)
    return _scalar_ok(out)


@dataclass(frozen=True)
class PotentialSpec:
    """Law of a single potential value, scaled by ``eps``.

    Only absolutely continuous families are accepted: ``uniform(lo, hi)``
    and ``gaussian(mean, std)``.  Discrete laws (Bernoulli etc.) violate the
    absolute-continuity assumption (H1) and are rejected at construction.
    """

    family: str
    lo: float = 0.0
    hi: float = 1.0
    mean: float = 0.0
    std: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ValueError(
                f"potential family {self.family!r} must have an absolutely "
                "continuous law (assumption H1); only 'uniform' and "
                "'gaussian' are supported"
            )
        if self.eps <= 0:
            raise ValueError("scale eps must be > 0")
        if self.family == "uniform" and not self.lo < self.hi:
            raise ValueError(f"uniform law needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.family == "gaussian" and not self.std > 0:
            raise ValueError(f"gaussian law needs std > 0, got {self.std}")

    @classmethod
    def uniform(cls, lo: float, hi: float, eps: float = 1.0) -> "PotentialSpec":
        return cls(family="uniform", lo=float(lo), hi=float(hi), eps=float(eps))

    @classmethod
    def gaussian(cls, mean: float, std: float, eps: float = 1.0) -> "PotentialSpec":
        return cls(family="gaussian", mean=float(mean), std=float(std), eps=float(eps))

    def scaled(self, factor: float) -> "PotentialSpec":
        """Same family with ``eps`` multiplied by ``factor``."""
        return replace(self, eps=self.eps * float(factor))

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "uniform":
            return self.eps * rng.uniform(self.lo, self.hi, size)
        return self.eps * rng.normal(self.mean, self.std, size)

    def mean_value(self) -> float:
        if self.family == "uniform":
            return self.eps * 0.5 * (self.lo + self.hi)
        return self.eps * self.mean

    def variance(self) -> float:
        if self.family == "uniform":
            return self.eps**2 * (self.hi - self.lo) ** 2 / 12.0
        return self.eps**2 * self.std**2

    def support(self, sigmas: float = 6.0) -> tuple[float, float]:
        """Effective support of the law (gaussian truncated at ``sigmas``)."""
        if self.family == "uniform":
            vals = sorted((self.eps * self.lo, self.eps * self.hi))
            return (vals[0], vals[1])
        c, s = self.eps * self.mean, self.eps * self.std * sigmas
        return (c - s, c + s)


@dataclass(frozen=True)
class Disorder:
    """One realization V_1..V_N plus the (spec, seed) that regenerates it.

    ``spec``/``seed`` may be None for hand-built realizations (test oracles
    such as the zero potential); sampled disorder always carries both.
    """

    values: np.ndarray
    seed: int | None = None
    spec: PotentialSpec | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("disorder needs at least one site")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def gershgorin(self) -> tuple[float, float]:
        """Interval [min V - 2, max V + 2] containing every eigenvalue."""
        return (float(self.values.min()) - 2.0, float(self.values.max()) + 2.0)


def sample_disorder(spec: PotentialSpec, n: int, seed: int) -> Disorder:
    """n iid draws from ``spec``; deterministic in (spec, n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = derive_rng(seed)
    return Disorder(values=spec.draw(rng, n), seed=int(seed), spec=spec)


@dataclass(frozen=True)
class Transfer2:
    """Row-major 2x2 transfer matrix ((a, b), (c, d)) with det 1."""

    a: float
    b: float
    c: float
    d: float

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, vec) -> tuple[float, float]:
        x, y = vec
        return (self.a * x + self.b * y, self.c * x + self.d * y)


def transfer_matrix(x: float) -> Transfer2:
    """One-step transfer matrix ((x, -1), (1, 0)) for local value x = v - lambda."""
    return Transfer2(float(x), -1.0, 1.0, 0.0)


def phase_step(phi, v, lam):
    """Image of ``phi`` under the transfer circle map for site value ``v``.

    Returns the angle of ``(v - lam) cos(phi) - sin(phi) + i cos(phi)``
    in [0, 2*pi).  Accepts scalars or broadcastable arrays.
    """
    x = np.asarray(v, dtype=float) - np.asarray(lam, dtype=float)
    c = np.cos(phi)
    s = np.sin(phi)
    return wrap_2pi(np.arctan2(c, x * c - s))


def phase_step_inv(phi, v, lam):
    """Inverse circle map: angle of T(v - lam)^{-1} = ((0,1),(-1,v-lam)) at phi.

    Exact inverse of :func:`phase_step` on [0, 2*pi).
    """
    x = np.asarray(v, dtype=float) - np.asarray(lam, dtype=float)
    c = np.cos(phi)
    s = np.sin(phi)
    return wrap_2pi(np.arctan2(x * s - c, s))


def lift_step(theta_prev, phi_next):
    """Unique lift of ``phi_next`` in [theta_prev - pi/2, theta_prev + 3*pi/2).

    The window has length exactly 2*pi, so the representative is unique;
    ties at the window edge resolve to the lower (closed) endpoint.
    """
    lo = np.asarray(theta_prev, dtype=float) - 0.5 * np.pi
    delta = np.mod(np.asarray(phi_next, dtype=float) - lo, TWO_PI)
    delta = np.where(delta >= TWO_PI, 0.0, delta)
    return _scalar_ok(lo + delta)


def _step_norm(phi, x):
    """(next phase, log stretch) of the unit vector at ``phi`` under T(x)."""
    c = np.cos(phi)
    s = np.sin(phi)
    top = x * c - s
    nxt = wrap_2pi(np.arctan2(c, top))
    return nxt, 0.5 * np.log(top * top + c * c)


def _step_norm_inv(phi, x):
    """Same as :func:`_step_norm` for the inverse matrix ((0,1),(-1,x))."""
    c = np.cos(phi)
    s = np.sin(phi)
    bot = x * s - c
    nxt = wrap_2pi(np.arctan2(bot, s))
    return nxt, 0.5 * np.log(s * s + bot * bot)


@dataclass(frozen=True)
class PruferPath:
    """Phases, lifts and log-radii along one trajectory at fixed lambda.

    All three arrays have length N+1; ``log_radii[0] = 0`` and
    ``exp(log_radii[k])`` equals the norm of the k-step matrix product
    applied to the initial unit vector.
    """

    phases: np.ndarray
    lifts: np.ndarray
    log_radii: np.ndarray
    lam: float

    def __post_init__(self):
        if not (len(self.phases) == len(self.lifts) == len(self.log_radii)):
            raise ValueError("phases, lifts and log_radii must have equal length")

    @property
    def n(self) -> int:
        return len(self.phases) - 1

    def amplitudes(self) -> np.ndarray:
        """Site amplitudes u_1..u_N recovered as r_{k-1} cos(phi_{k-1})."""
        r = np.exp(self.log_radii[:-1])
        return r * np.cos(self.phases[:-1])


def forward_path(d: Disorder, lam: float, phi0: float = 0.0) -> PruferPath:
    """Iterate the phase map over ``d.values`` with lifting and log-radii."""
    n = d.n
    phases = np.empty(n + 1)
    lifts = np.empty(n + 1)
    logr = np.empty(n + 1)
    phases[0] = wrap_2pi(phi0)
    lifts[0] = float(phi0)
    logr[0] = 0.0
    phi = phases[0]
    theta = lifts[0]
    x = d.values - lam
    for k in range(n):
        phi, dlog = _step_norm(phi, x[k])
        theta = lift_step(theta, phi)
        phases[k + 1] = phi
        lifts[k + 1] = theta
        logr[k + 1] = logr[k] + dlog
    return PruferPath(phases=phases, lifts=lifts, log_radii=logr, lam=float(lam))
