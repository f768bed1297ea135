"""Eigenvalues and eigenvectors for the random chain, two independent ways.

Dirichlet eigenvalues come from bisection on the lifted end phase (strictly
increasing in lambda; the eigenvalue condition is ``theta_N = pi/2 mod pi``)
and are cross-checked against a Sturm pivot count.  Eigenvectors are
reconstructed two-sided (forward from the left edge, backward from the
right, matched at the amplitude maximum) because one-sided recursion blows
up exponentially past the localization center.  Periodic eigenvalues are
the roots of the renormalized trace condition.

The ``*_cols`` kernels are vectorized over lambda lanes: ``vt`` is either a
single potential (shape ``(N,)``, shared by all lanes) or per-lane columns
(shape ``(N, L)``).  Heavy callers chunk lanes to keep memory bounded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .prufer import (
    TWO_PI,
    Disorder,
    PruferPath,
    forward_path,
    wrap_2pi,
)

__all__ = [
    "Spectrum",
    "EigvecProfile",
    "LiftingError",
    "theta_end",
    "theta_ends_cols",
    "eigenvalues_dirichlet",
    "bisect_theta_targets",
    "sturm_count",
    "sturm_counts_cols",
    "eigenvector",
    "eigenvectors_cols",
    "eigenvalues_periodic",
    "trace_gap_cols",
    "renormalized_product",
    "sturm_bisect_targets",
]

_PIVOT_TINY = 1e-300


class LiftingError(RuntimeError):
    """Crossing count does not match the matrix size; the lift is broken."""


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues, optional eigenvector columns, boundary tag."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    boundary: str
    disorder: Disorder

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))


@dataclass(frozen=True)
class EigvecProfile:
    """Log-radius profile of one eigenvector, normalized so max(q) = 0."""

    q: np.ndarray
    center: int
    lam: float


def _as_cols(vt: np.ndarray) -> np.ndarray:
    vt = np.asarray(vt, dtype=float)
    if vt.ndim not in (1, 2):
        raise ValueError("vt must have shape (N,) or (N, L)")
    return vt


def theta_ends_cols(vt: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Lifted end phase theta_N for each lambda lane (phi_0 = 0)."""
    vt = _as_cols(vt)
    lams = np.asarray(lams, dtype=float)
    phi = np.zeros_like(lams)
    theta = np.zeros_like(lams)
    half_pi = 0.5 * np.pi
    for k in range(vt.shape[0]):
        x = vt[k] - lams
        c = np.cos(phi)
        s = np.sin(phi)
        phi = np.arctan2(c, x * c - s) % TWO_PI
        lo = theta - half_pi
        delta = (phi - lo) % TWO_PI
        theta = lo + np.where(delta >= TWO_PI, 0.0, delta)
    return theta


def theta_end(d: Disorder, lam: float) -> float:
    """theta_N(lambda) from the forward path with phi_0 = 0."""
    return float(theta_ends_cols(d.values, np.asarray([lam]))[0])


def sturm_counts_cols(vt: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each lambda (pivot sign count)."""
    vt = _as_cols(vt)
    lams = np.asarray(lams, dtype=float)
    count = np.zeros(lams.shape, dtype=np.int64)
    p = np.ones_like(lams)
    for k in range(vt.shape[0]):
        if k == 0:
            p = vt[0] - lams
        else:
            p = (vt[k] - lams) - 1.0 / p
        # exact-zero pivot: resolve as lambda - 0+ (counts strictly below)
        p = np.where(p == 0.0, _PIVOT_TINY, p)
        count += p < 0.0
    return count


def sturm_count(d: Disorder, lam: float) -> int:
    return int(sturm_counts_cols(d.values, np.asarray([lam]))[0])


def bisect_theta_targets(
    vt: np.ndarray,
    targets: np.ndarray,
    lo,
    hi,
    tol: float = 1e-12,
) -> np.ndarray:
    """Solve theta_N(lambda) = target per lane by bisection in [lo, hi].

    ``lo``/``hi`` may be scalars or per-lane arrays; theta_N is strictly
    increasing in lambda, so a plain bisection localizes each solution to
    width <= tol.
    """
    targets = np.asarray(targets, dtype=float)
    lo_v = np.broadcast_to(np.asarray(lo, dtype=float), targets.shape).copy()
    hi_v = np.broadcast_to(np.asarray(hi, dtype=float), targets.shape).copy()
    width = float(np.max(hi_v - lo_v))
    n_iter = max(1, int(np.ceil(np.log2(max(width / tol, 2.0)))) + 1)
    for _ in range(n_iter):
        mid = 0.5 * (lo_v + hi_v)
        above = theta_ends_cols(vt, mid) > targets
        hi_v = np.where(above, mid, hi_v)
        lo_v = np.where(above, lo_v, mid)
    return 0.5 * (lo_v + hi_v)


def sturm_bisect_targets(
    vt: np.ndarray,
    ranks: np.ndarray,
    lo,
    hi,
    tol: float = 1e-12,
) -> np.ndarray:
    """Eigenvalue of 1-based rank ``ranks[l]`` per lane, by pivot-count bisection.

    Division-only inner loop; produces the same values as the phase route
    (both bracket the same eigenvalues) at a fraction of the cost.  Used by
    bulk consumers that need whole spectra; the phase route remains the
    reference eigensolver.
    """
    ranks = np.asarray(ranks)
    lo_v = np.broadcast_to(np.asarray(lo, dtype=float), ranks.shape).copy()
    hi_v = np.broadcast_to(np.asarray(hi, dtype=float), ranks.shape).copy()
    width = float(np.max(hi_v - lo_v))
    n_iter = max(1, int(np.ceil(np.log2(max(width / tol, 2.0)))) + 1)
    for _ in range(n_iter):
        mid = 0.5 * (lo_v + hi_v)
        ge = sturm_counts_cols(vt, mid) >= ranks
        hi_v = np.where(ge, mid, hi_v)
        lo_v = np.where(ge, lo_v, mid)
    return 0.5 * (lo_v + hi_v)


def _dirichlet_bracket(d: Disorder) -> tuple[float, float]:
    g_lo, g_hi = d.gershgorin()
    return g_lo - 1.0, g_hi + 1.0


def eigenvalues_dirichlet(d: Disorder, tol: float = 1e-12) -> Spectrum:
    """All N Dirichlet eigenvalues via phase bisection.

    Raises :class:`LiftingError` when the number of pi/2 + m*pi crossings
    between the bracket ends differs from N.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    n = d.n
    lo, hi = _dirichlet_bracket(d)
    th = theta_ends_cols(d.values, np.asarray([lo, hi]))
    crossings = int(np.floor((th[1] - 0.5 * np.pi) / np.pi)) - int(
        np.floor((th[0] - 0.5 * np.pi) / np.pi)
    )
    if crossings != n:
        raise LiftingError(
            f"expected {n} lift crossings in [{lo}, {hi}], found {crossings}"
        )
    targets = 0.5 * np.pi + np.pi * np.arange(n)
    lams = bisect_theta_targets(d.values, targets, lo, hi, tol)
    return Spectrum(eigenvalues=lams, eigenvectors=None, boundary="dirichlet", disorder=d)


# ---------------------------------------------------------------------------
# two-sided eigenvector reconstruction


def _two_sided_log_amplitudes(vt: np.ndarray, lams: np.ndarray):
    """Left/right shooting log-amplitudes log|u_k| and signs, per lane.

    Returns (la_left, sg_left, la_right, sg_right), each of shape (L, N)
    with column k holding site k+1.
    """
    vt = _as_cols(vt)
    n = vt.shape[0]
    lams = np.asarray(lams, dtype=float)
    n_lanes = lams.shape[0]
    la_l = np.empty((n_lanes, n))
    sg_l = np.empty((n_lanes, n))
    la_r = np.empty((n_lanes, n))
    sg_r = np.empty((n_lanes, n))

    with np.errstate(divide="ignore"):
        phi = np.zeros(n_lanes)
        logr = np.zeros(n_lanes)
        for k in range(n):
            c = np.cos(phi)
            s = np.sin(phi)
            la_l[:, k] = logr + np.log(np.abs(c))
            sg_l[:, k] = np.sign(c)
            x = vt[k] - lams
            top = x * c - s
            phi = np.arctan2(c, top) % TWO_PI
            logr = logr + 0.5 * np.log(top * top + c * c)

        psi = np.full(n_lanes, 0.5 * np.pi)
        logr = np.zeros(n_lanes)
        for j in range(n, 0, -1):
            c = np.cos(psi)
            s = np.sin(psi)
            la_r[:, j - 1] = logr + np.log(np.abs(s))
            sg_r[:, j - 1] = np.sign(s)
            x = vt[j - 1] - lams
            bot = x * s - c
            psi = np.arctan2(bot, s) % TWO_PI
            logr = logr + 0.5 * np.log(s * s + bot * bot)
    return la_l, sg_l, la_r, sg_r


def eigenvectors_cols(vt: np.ndarray, lams: np.ndarray):
    """Normalized eigenvectors for converged Dirichlet eigenvalues.

    Returns (u, log_amp) with shape (L, N): unit-norm amplitudes and the
    stitched log|u_k| before normalization (max 0 per lane).  The two
    shooting branches are matched at the site where their combined
    amplitude peaks, which is where both are numerically trustworthy.
    """
    la_l, sg_l, la_r, sg_r = _two_sided_log_amplitudes(vt, lams)
    n_lanes, n = la_l.shape
    m = np.argmax(la_l + la_r, axis=1)
    rows = np.arange(n_lanes)
    cols = np.arange(n)[None, :]
    use_left = cols <= m[:, None]

    la_lm = la_l[rows, m][:, None]
    la_rm = la_r[rows, m][:, None]
    log_amp = np.where(use_left, la_l - la_lm, la_r - la_rm)
    sign = np.where(
        use_left,
        sg_l * sg_l[rows, m][:, None],
        sg_r * sg_r[rows, m][:, None],
    )
    log_amp = log_amp - np.max(log_amp, axis=1, keepdims=True)
    u = sign * np.exp(log_amp)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    return u, log_amp


def residual_inf(vt: np.ndarray, lams: np.ndarray, u: np.ndarray) -> np.ndarray:
    """max_k |(-u_{k-1} + (V_k - lam) u_k - u_{k+1})| per lane (ghosts = 0)."""
    vt = _as_cols(vt)
    x = (vt.T if vt.ndim == 2 else vt[None, :]) - lams[:, None]
    left = np.zeros_like(u)
    left[:, 1:] = u[:, :-1]
    right = np.zeros_like(u)
    right[:, :-1] = u[:, 1:]
    return np.max(np.abs(-left + x * u - right), axis=1)


def _profile_from_log_amp(log_amp: np.ndarray) -> np.ndarray:
    """Log-radius profile q_k = log r_k, k = 0..N, normalized to max 0."""
    n_lanes, n = log_amp.shape
    padded = np.full((n_lanes, n + 2), -np.inf)
    padded[:, 1 : n + 1] = log_amp
    q = 0.5 * np.logaddexp(2.0 * padded[:, 1:], 2.0 * padded[:, :-1])
    return q - np.max(q, axis=1, keepdims=True)


def eigenvector(d: Disorder, lam: float, residual_tol: float = 1e-8):
    """(EigvecProfile, unit eigenvector) for a converged eigenvalue.

    Raises RuntimeError naming the worst site when the recurrence residual
    exceeds ``residual_tol``.
    """
    lams = np.asarray([lam], dtype=float)
    u, log_amp = eigenvectors_cols(d.values, lams)
    res = residual_inf(d.values, lams, u)
    if res[0] > residual_tol:
        x = d.values - lam
        left = np.concatenate(([0.0], u[0, :-1]))
        right = np.concatenate((u[0, 1:], [0.0]))
        site = int(np.argmax(np.abs(-left + x * u[0] - right))) + 1
        raise RuntimeError(
            f"eigenvector residual {res[0]:.3e} > {residual_tol:.1e} at site {site}"
        )
    q = _profile_from_log_amp(log_amp)[0]
    profile = EigvecProfile(q=q, center=int(np.argmax(q)), lam=float(lam))
    return profile, u[0]


# ---------------------------------------------------------------------------
# periodic boundary conditions


def trace_gap_cols(vt: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Scaled trace condition tr(M_hat) - 2 exp(-s) per lambda lane.

    The product is renormalized by its max-abs entry every step, with the
    log scale s carried separately; the returned value has the same sign as
    tr(M_N) - 2 since exp(s) > 0.
    """
    vt = _as_cols(vt)
    lams = np.asarray(lams, dtype=float)
    a = np.ones_like(lams)
    b = np.zeros_like(lams)
    c = np.zeros_like(lams)
    dd = np.ones_like(lams)
    s = np.zeros_like(lams)
    for k in range(vt.shape[0]):
        x = vt[k] - lams
        na = x * a - c
        nb = x * b - dd
        a, b, c, dd = na, nb, a, b
        m = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(dd)))
        a /= m
        b /= m
        c /= m
        dd /= m
        s += np.log(m)
    return (a + dd) - 2.0 * np.exp(-s)


def _refine_sign_changes(vt, lo, hi, g_lo, tol):
    """Vector bisection on the trace gap over bracket arrays."""
    lo = lo.copy()
    hi = hi.copy()
    width = float(np.max(hi - lo))
    n_iter = max(1, int(np.ceil(np.log2(max(width / tol, 2.0)))) + 1)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        g_mid = trace_gap_cols(vt, mid)
        same = (g_mid > 0) == (g_lo > 0)
        lo = np.where(same, mid, lo)
        g_lo = np.where(same, g_mid, g_lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _refine_minima(vt, lo, hi, tol):
    """Golden-section minimization of |trace gap| over bracket arrays."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0

    def f(x):
        return np.abs(trace_gap_cols(vt, x))

    a = lo.copy()
    b = hi.copy()
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1 = f(x1)
    f2 = f(x2)
    width = float(np.max(b - a))
    n_iter = max(1, int(np.ceil(np.log(max(width / tol, 2.0)) / np.log(1.0 / inv_phi))))
    for _ in range(n_iter):
        left = f1 < f2  # minimum lies in [a, x2]
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        new_x = np.where(left, b - inv_phi * (b - a), a + inv_phi * (b - a))
        new_f = f(new_x)
        # shrink left: x2 <- x1, x1 <- new; shrink right: x1 <- x2, x2 <- new
        x1, x2 = np.where(left, new_x, x2), np.where(left, x1, new_x)
        f1, f2 = np.where(left, new_f, f2), np.where(left, f1, new_f)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def eigenvalues_periodic(d: Disorder, grid: int = 4096, tol: float = 1e-12) -> Spectrum:
    """Roots of tr(M_N(lambda)) = 2 located on a grid and refined.

    Sign changes give simple roots; strictly positive local minima that
    come within rounding of zero are reported as (unresolved) double roots.
    A UserWarning names the located count whenever it differs from N --
    near-tangent pairs on a too-coarse grid are the usual cause.
    """
    if grid < 8:
        raise ValueError("grid must be >= 8")
    lo, hi = _dirichlet_bracket(d)
    lams = np.linspace(lo, hi, int(grid))
    g = trace_gap_cols(d.values, lams)

    roots = []
    flips = np.nonzero(np.signbit(g[:-1]) != np.signbit(g[1:]))[0]
    if flips.size:
        refined = _refine_sign_changes(d.values, lams[flips], lams[flips + 1], g[flips], tol)
        roots.extend(refined.tolist())

    # tangencies: |g| dips toward zero with no sign change across the triple
    interior = np.arange(1, len(lams) - 1)
    ag = np.abs(g)
    same_sign = (np.signbit(g[interior - 1]) == np.signbit(g[interior])) & (
        np.signbit(g[interior]) == np.signbit(g[interior + 1])
    )
    is_dip = (ag[interior] < ag[interior - 1]) & (ag[interior] <= ag[interior + 1]) & same_sign
    cand = interior[is_dip]
    if cand.size:
        xm, gm = _refine_minima(d.values, lams[cand - 1], lams[cand + 1], tol)
        scale = np.maximum(1.0, np.maximum(ag[cand - 1], ag[cand + 1]))
        touch = gm <= 1e-6 * scale
        for x in xm[touch]:
            roots.extend([float(x), float(x)])

    roots = np.sort(np.asarray(roots, dtype=float))
    if len(roots) != d.n:
        warnings.warn(
            f"periodic trace condition located {len(roots)} roots, expected {d.n}",
            UserWarning,
            stacklevel=2,
        )
    return Spectrum(eigenvalues=roots, eigenvectors=None, boundary="periodic", disorder=d)


def renormalized_product(values: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Scaled transfer product: returns (M_hat, s) with M_N = exp(s) M_hat.

    M_hat is renormalized by its max-abs entry every step, so
    det(M_hat) = exp(-2 s) up to rounding for any chain length.
    """
    a, b, c, dd = 1.0, 0.0, 0.0, 1.0
    s = 0.0
    for v in np.asarray(values, dtype=float):
        x = v - lam
        a, b, c, dd = x * a - c, x * b - dd, a, b
        m = max(abs(a), abs(b), abs(c), abs(dd))
        a, b, c, dd = a / m, b / m, c / m, dd / m
        s += np.log(m)
    return np.array([[a, b], [c, dd]]), float(s)


def periodic_profile(d: Disorder, lam: float) -> np.ndarray:
    """Log-amplitude profile around the ring at a located trace root.

    Takes the kernel direction of the renormalized M_N (both eigenvalues of
    M_N are 1 at a root, so the scaled matrix is numerically rank one),
    propagates it once around the ring and returns log r_0..log r_N
    normalized to max 0.
    """
    vt = d.values
    mat, _ = renormalized_product(vt, lam)
    _, _, vh = np.linalg.svd(mat)
    z = vh[-1]  # right singular vector of the smallest singular value

    logr = np.empty(d.n + 1)
    logr[0] = 0.0
    top, bot = float(z[0]), float(z[1])
    for k in range(d.n):
        x = vt[k] - lam
        top, bot = x * top - bot, top
        nrm = np.hypot(top, bot)
        logr[k + 1] = logr[k] + np.log(nrm)
        top /= nrm
        bot /= nrm
    return logr - logr.max()


def path_for_eigenvalue(d: Disorder, lam: float) -> PruferPath:
    """Forward Prufer path at an eigenvalue (the eigenvector phase path)."""
    return forward_path(d, lam, phi0=0.0)
