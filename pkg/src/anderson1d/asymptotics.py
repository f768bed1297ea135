"""Lyapunov exponent, limit variance, invariant measure, DOS and mixing.

All estimators run many independent chains in numpy lanes; standard errors
come from the spread across chains (chains are iid, so no autocorrelation
correction is needed beyond choosing the per-chain length).
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .engine import derive_rng, parallel_map_reduce
from .fbprocess import EmpiricalDensity
from .prufer import TWO_PI, PotentialSpec
from .spectrum import sturm_counts_cols

__all__ = [
    "LyapunovEstimate",
    "lyapunov",
    "lyapunov_grid",
    "weak_disorder_reference",
    "InvariantMeasure",
    "invariant_measure",
    "DosCurve",
    "dos_counting",
    "dos_invariant",
    "MixingEstimate",
    "mixing_estimate",
    "WalkPath",
    "rescaled_walk",
    "rescaled_walks",
    "WalkStats",
    "walk_stats",
    "ParamTable",
    "build_param_table",
]


# ---------------------------------------------------------------------------
# Lyapunov exponent and limit variance


@dataclass(frozen=True)
class LyapunovEstimate:
    """Per-step growth rate and variance of log |M_n e| with uncertainties."""

    lam: float
    gamma: float
    sigma2: float
    se_gamma: float
    se_sigma2: float
    steps: int


def _chain_log_sums(spec: PotentialSpec, lams: np.ndarray, length: int,
                    burnin: int, rng: np.random.Generator) -> np.ndarray:
    """Sum of one-step log stretches per lane after burn-in."""
    n_lanes = lams.size
    a = np.ones(n_lanes)
    b = np.zeros(n_lanes)
    total = np.zeros(n_lanes)
    for i in range(burnin + length):
        x = spec.draw(rng, n_lanes) - lams
        na = x * a - b
        nb = a
        nrm = np.sqrt(na * na + nb * nb)
        a = na / nrm
        b = nb / nrm
        if i >= burnin:
            total += np.log(nrm)
    return total


def lyapunov(spec: PotentialSpec, lam: float, steps: int = 400_000,
             batches: int = 64, burnin: int = 1000, seed: int = 0) -> LyapunovEstimate:
    """Estimate gamma and sigma^2 from ``batches`` independent chains.

    gamma is the grand mean of the one-step log stretches; sigma^2 is the
    variance of the per-chain sums divided by the chain length, which
    absorbs the autocorrelation of the stretches.  Warns when fewer than 30
    batches are requested (the sigma^2 uncertainty becomes unreliable).
    """
    if steps < 10_000:
        raise ValueError("steps must be >= 1e4")
    if batches < 2:
        raise ValueError("batches must be >= 2")
    if batches < 30:
        _warnings.warn(
            f"only {batches} batches; sigma^2 standard error is unreliable below 30",
            UserWarning, stacklevel=2,
        )
    length = max(1, steps // batches)
    rng = derive_rng(seed, 0)
    sums = _chain_log_sums(spec, np.full(batches, float(lam)), length, burnin, rng)
    gamma = float(sums.sum() / (batches * length))
    sigma2 = float(sums.var(ddof=1) / length)
    se_gamma = float(np.sqrt(max(sigma2, 0.0) / (batches * length)))
    se_sigma2 = float(sigma2 * np.sqrt(2.0 / (batches - 1)))
    return LyapunovEstimate(lam=float(lam), gamma=gamma, sigma2=sigma2,
                            se_gamma=se_gamma, se_sigma2=se_sigma2,
                            steps=batches * length)


def lyapunov_grid(spec: PotentialSpec, lams: np.ndarray, steps: int = 200_000,
                  batches: int = 32, burnin: int = 1000, seed: int = 0):
    """Vectorized :func:`lyapunov` over a lambda grid; returns 4 arrays."""
    lams = np.asarray(lams, dtype=float)
    length = max(1, steps // batches)
    lanes = np.repeat(lams, batches)
    rng = derive_rng(seed, 1)
    sums = _chain_log_sums(spec, lanes, length, burnin, rng).reshape(lams.size, batches)
    gamma = sums.sum(axis=1) / (batches * length)
    sigma2 = sums.var(axis=1, ddof=1) / length
    se_gamma = np.sqrt(np.maximum(sigma2, 0.0) / (batches * length))
    se_sigma2 = sigma2 * np.sqrt(2.0 / (batches - 1))
    return gamma, sigma2, se_gamma, se_sigma2


def weak_disorder_reference(lam: float, eps: float, var_v: float) -> tuple[float, float]:
    """Small-coupling reference values (gamma_ref, sigma2_ref).

    Plug-in arithmetic of the quoted asymptotics: gamma_ref =
    var_v * eps^2 / (4 - lam^2) and sigma2_ref = 2 * gamma_ref, valid only
    inside the band |lam| < 2.
    """
    if abs(lam) >= 2.0:
        raise ValueError("weak-disorder reference needs |lam| < 2")
    g = var_v * eps * eps / (4.0 - lam * lam)
    return g, 2.0 * g


# ---------------------------------------------------------------------------
# invariant measure of the phase chain (mod pi)


@dataclass(frozen=True)
class InvariantMeasure:
    density: EmpiricalDensity
    operator_density: EmpiricalDensity
    tv_operator: float
    lam: float
    warnings: tuple[str, ...] = ()


def _phase_step_arr(phi, x):
    c = np.cos(phi)
    s = np.sin(phi)
    return np.arctan2(c, x * c - s) % TWO_PI


def _quadrature(spec: PotentialSpec, points: int = 64):
    """Nodes/weights integrating the potential law (midpoint or Gauss-Hermite)."""
    if spec.family == "uniform":
        t = (np.arange(points) + 0.5) / points
        nodes = spec.eps * (spec.lo + (spec.hi - spec.lo) * t)
        weights = np.full(points, 1.0 / points)
    else:
        x, w = np.polynomial.hermite_e.hermegauss(points)
        nodes = spec.eps * (spec.mean + spec.std * x)
        weights = w / w.sum()
    return nodes, weights


def transfer_operator_matrix(spec: PotentialSpec, lam: float, bins: int,
                             points: int = 64) -> np.ndarray:
    """Bin-to-bin stochastic matrix of the phase chain mod pi."""
    nodes, weights = _quadrature(spec, points)
    centers = (np.arange(bins) + 0.5) * (np.pi / bins)
    p = np.zeros((bins, bins))
    for v, w in zip(nodes, weights):
        img = _phase_step_arr(centers, v - lam) % np.pi
        idx = np.minimum((img / (np.pi / bins)).astype(int), bins - 1)
        np.add.at(p, (np.arange(bins), idx), w)
    return p


def _operator_fixed_point(p: np.ndarray, iters: int = 5000, tol: float = 1e-13):
    b = p.shape[0]
    dist = np.full(b, 1.0 / b)
    for _ in range(iters):
        nxt = dist @ p
        nxt /= nxt.sum()
        if np.abs(nxt - dist).sum() < tol:
            dist = nxt
            break
        dist = nxt
    return dist


def _stationary_histograms(spec: PotentialSpec, lams: np.ndarray, bins: int,
                           burnin: int, steps: int, rng: np.random.Generator,
                           chains: int = 64) -> np.ndarray:
    """Pooled stationary histograms (probability per bin), one row per lambda."""
    n_lam = lams.size
    lanes = np.repeat(lams, chains)
    phi = rng.random(lanes.size) * TWO_PI
    for _ in range(burnin):
        phi = _phase_step_arr(phi, spec.draw(rng, lanes.size) - lanes)
    kept = max(1, steps // chains)
    counts = np.zeros((n_lam, bins), dtype=np.int64)
    width = np.pi / bins
    lam_idx = np.repeat(np.arange(n_lam), chains)
    for _ in range(kept):
        phi = _phase_step_arr(phi, spec.draw(rng, lanes.size) - lanes)
        idx = np.minimum(((phi % np.pi) / width).astype(int), bins - 1)
        np.add.at(counts, (lam_idx, idx), 1)
    return counts / counts.sum(axis=1, keepdims=True)


def invariant_measure(spec: PotentialSpec, lam: float, bins: int = 256,
                      burnin: int = 2000, steps: int = 1_000_000,
                      seed: int = 0, chains: int = 1024,
                      tv_warn: float = 0.05) -> InvariantMeasure:
    """Long-run phase histogram mod pi plus a transfer-operator cross-check.

    The cross-check builds the binned transition matrix by quadrature over
    the potential law, power-iterates to its fixed point and reports the
    total-variation distance to the sampled histogram.
    """
    if bins < 64:
        raise ValueError("bins must be >= 64")
    rng = derive_rng(seed, 2)
    probs = _stationary_histograms(spec, np.asarray([float(lam)]), bins,
                                   burnin, steps, rng, chains=chains)[0]
    width = np.pi / bins
    hist = EmpiricalDensity(density=probs / width, samples=steps)
    fixed = _operator_fixed_point(transfer_operator_matrix(spec, lam, bins))
    op = EmpiricalDensity(density=fixed / width, samples=0)
    tv = hist.tv(op)
    warns: tuple[str, ...] = ()
    if tv > tv_warn:
        warns = (f"histogram vs operator fixed point TV {tv:.3f} > {tv_warn}",)
        _warnings.warn(warns[0], UserWarning, stacklevel=2)
    return InvariantMeasure(density=hist, operator_density=op, tv_operator=tv,
                            lam=float(lam), warnings=warns)


# ---------------------------------------------------------------------------
# density of states, two independent routes


@dataclass(frozen=True)
class DosCurve:
    """Binned density of eigenvalues per site and unit lambda."""

    lam_centers: np.ndarray
    density: np.ndarray
    method: str
    stderr: np.ndarray | None = None

    @property
    def bin_width(self) -> float:
        return float(self.lam_centers[1] - self.lam_centers[0])

    def integral(self) -> float:
        return float(self.density.sum() * self.bin_width)


def _dos_span(spec: PotentialSpec) -> tuple[float, float]:
    lo, hi = spec.support()
    return lo - 2.0, hi + 2.0


def _dos_block(args):
    spec, n, m, edges, seed, bi = args
    rng = derive_rng(seed, bi)
    hists = np.empty((m, edges.size - 1))
    for r in range(m):
        v = spec.draw(rng, n)
        counts = sturm_counts_cols(v, edges)
        hists[r] = np.diff(counts) / n
    return hists


def dos_counting(spec: PotentialSpec, n: int, realizations: int, bins: int,
                 seed: int = 0, span: tuple[float, float] | None = None,
                 workers: int = 1) -> DosCurve:
    """Realization-averaged eigenvalue histogram via exact pivot counts.

    Sturm counts at the bin edges give the exact per-bin eigenvalue numbers
    without solving for individual eigenvalues.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    lo, hi = span if span is not None else _dos_span(spec)
    edges = np.linspace(lo, hi, bins + 1)
    block = max(1, min(realizations, 25))
    tasks = []
    done = 0
    bi = 0
    while done < realizations:
        m = min(block, realizations - done)
        tasks.append((spec, n, m, edges, seed, bi))
        done += m
        bi += 1
    rows = parallel_map_reduce(_dos_block, tasks,
                               lambda acc, r: acc + [r], [], workers=workers)
    hists = np.vstack(rows)
    width = (hi - lo) / bins
    dens = hists.mean(axis=0) / width
    se = hists.std(axis=0, ddof=1) / np.sqrt(hists.shape[0]) / width if realizations > 1 else None
    return DosCurve(lam_centers=0.5 * (edges[:-1] + edges[1:]), density=dens,
                    method="counting", stderr=se)


def dos_invariant(spec: PotentialSpec, lam_grid: np.ndarray, bins: int = 256,
                  steps: int = 200_000, burnin: int = 2000, seed: int = 0,
                  operator_check: bool = True,
                  tv_warn: float = 0.05) -> DosCurve:
    """DOS from the stationary phase law:
    integral of sin^2(phi) m(phi) m(pi/2 - phi) over the half circle.

    The reflection is exact on the binned grid (even ``bins``).  With
    ``operator_check`` each stationary histogram is also compared against
    the transfer-operator fixed point and warnings are propagated.
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    if bins % 2:
        raise ValueError("bins must be even (the reflection maps bins to bins)")
    rng = derive_rng(seed, 3)
    probs = _stationary_histograms(spec, lam_grid, bins, burnin, steps, rng)
    width = np.pi / bins
    m_dens = probs / width
    refl_idx = (bins // 2 - 1 - np.arange(bins)) % bins
    centers = (np.arange(bins) + 0.5) * width
    sin2 = np.sin(centers) ** 2
    dens = (sin2 * m_dens * m_dens[:, refl_idx]).sum(axis=1) * width

    if operator_check:
        for i, lam in enumerate(lam_grid):
            fixed = _operator_fixed_point(transfer_operator_matrix(spec, lam, bins))
            tv = 0.5 * np.abs(fixed - probs[i]).sum()
            if tv > tv_warn:
                _warnings.warn(
                    f"lambda={lam:g}: stationary histogram vs operator TV "
                    f"{tv:.3f} > {tv_warn}", UserWarning, stacklevel=2,
                )
    return DosCurve(lam_centers=lam_grid, density=dens, method="invariant")


# ---------------------------------------------------------------------------
# correlation decay of the phase chain


@dataclass(frozen=True)
class MixingEstimate:
    lags: np.ndarray
    corr: dict
    kappa: dict
    r2: dict
    kappa_max: float
    warnings: tuple[str, ...] = ()


_MIXING_FUNCS = ("sin2", "cos2", "cos4")


def _apply_test_func(name: str, phases: np.ndarray) -> np.ndarray:
    if name == "sin2":
        return np.sin(phases) ** 2
    if name == "cos2":
        return np.cos(2.0 * phases)
    return np.cos(4.0 * phases)


def mixing_estimate(spec: PotentialSpec, lam: float, max_lag: int = 40,
                    steps: int = 1_000_000, seed: int = 0,
                    chains: int = 64, burnin: int = 2000) -> MixingEstimate:
    """Autocorrelation decay rate of bounded phase observables.

    Fits |corr(lag)| ~ C kappa^lag by least squares on the log over the
    contiguous head of lags resolvable above the sampling noise floor.
    Warns when a fit has R^2 < 0.9.
    """
    length = steps // chains
    if max_lag > steps / 100:
        raise ValueError("max_lag must be <= steps/100")
    if length <= 2 * max_lag:
        raise ValueError("per-chain length too short for the requested lag")
    rng = derive_rng(seed, 4)
    phi = rng.random(chains) * TWO_PI
    for _ in range(burnin):
        phi = _phase_step_arr(phi, spec.draw(rng, chains) - lam)
    series = np.empty((chains, length))
    for t in range(length):
        phi = _phase_step_arr(phi, spec.draw(rng, chains) - lam)
        series[:, t] = phi % np.pi

    lags = np.arange(max_lag + 1)
    floor = max(0.02, 4.0 / np.sqrt(chains * length))
    corr: dict = {}
    kappa: dict = {}
    r2: dict = {}
    warns: list[str] = []
    for name in _MIXING_FUNCS:
        f = _apply_test_func(name, series)
        f = f - f.mean()
        denom = float((f * f).sum())
        ac = np.empty(max_lag + 1)
        ac[0] = 1.0
        for k in range(1, max_lag + 1):
            ac[k] = float((f[:, :-k] * f[:, k:]).sum()) / denom
        corr[name] = ac
        head = 0
        for k in range(1, max_lag + 1):
            if abs(ac[k]) > floor:
                head = k
            else:
                break
        if head < 3:
            kappa[name] = float("nan")
            r2[name] = float("nan")
            warns.append(f"{name}: correlation sinks below noise floor by lag 3")
            continue
        y = np.log(np.abs(ac[1 : head + 1]))
        x = lags[1 : head + 1].astype(float)
        design = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fit = design @ coef
        ss_res = float(((y - fit) ** 2).sum())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        kappa[name] = float(np.exp(coef[0]))
        r2[name] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        if r2[name] < 0.9:
            warns.append(f"{name}: exponential fit R^2 {r2[name]:.3f} < 0.9")
    for w in warns:
        _warnings.warn(w, UserWarning, stacklevel=2)
    finite = [v for v in kappa.values() if np.isfinite(v)]
    return MixingEstimate(lags=lags, corr=corr, kappa=kappa, r2=r2,
                          kappa_max=float(max(finite)) if finite else float("nan"),
                          warnings=tuple(warns))


# ---------------------------------------------------------------------------
# the rescaled random walk


@dataclass(frozen=True)
class WalkPath:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values[0] != 0.0:
            raise ValueError("W(0) must be 0")


def _walk_matrix(spec: PotentialSpec, lam: float, n: int, gamma: float,
                 sigma: float, n_paths: int, rng: np.random.Generator,
                 t_points: int) -> tuple[np.ndarray, np.ndarray]:
    keep = np.unique(np.minimum((np.linspace(0, 1, t_points) * n).astype(int), n))
    t = keep / n
    a = np.ones(n_paths)
    b = np.zeros(n_paths)
    logr = np.zeros(n_paths)
    out = np.empty((n_paths, keep.size))
    keep_set = {int(k): i for i, k in enumerate(keep)}
    if 0 in keep_set:
        out[:, keep_set[0]] = 0.0
    for step in range(1, n + 1):
        x = spec.draw(rng, n_paths) - lam
        na = x * a - b
        nb = a
        nrm = np.sqrt(na * na + nb * nb)
        a = na / nrm
        b = nb / nrm
        logr += np.log(nrm)
        if step in keep_set:
            out[:, keep_set[step]] = (logr - gamma * step) / (sigma * np.sqrt(n))
    return t, out


def rescaled_walk(spec: PotentialSpec, lam: float, n: int, gamma: float,
                  sigma: float, seed: int = 0) -> WalkPath:
    """One path W(t) = (log|M_{nt} e| - gamma nt) / (sigma sqrt(n)), t in [0,1]."""
    rng = derive_rng(seed, 5)
    t, w = _walk_matrix(spec, lam, n, gamma, sigma, 1, rng, t_points=n + 1)
    return WalkPath(t=t, values=w[0])


def rescaled_walks(spec: PotentialSpec, lam: float, n: int, gamma: float,
                   sigma: float, n_paths: int, seed: int = 0,
                   t_points: int = 21) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble of walks sampled on a coarse t grid; returns (t, (paths, t))."""
    rng = derive_rng(seed, 5)
    return _walk_matrix(spec, lam, n, gamma, sigma, n_paths, rng, t_points)


@dataclass(frozen=True)
class WalkStats:
    increment_mean: float
    increment_var_ratio: float  # Var(W(t+s)-W(t)) / s, pooled
    skewness: float
    excess_kurtosis: float
    half_increment_corr: float
    final_var: float


def walk_stats(t: np.ndarray, paths: np.ndarray) -> WalkStats:
    """Donsker-style diagnostics over an ensemble of rescaled walks."""
    from scipy import stats as sps

    inc = np.diff(paths, axis=1)
    dt = np.diff(t)
    z = inc / np.sqrt(dt)
    z = z.ravel()
    mid = np.argmin(np.abs(t - 0.5))
    first = paths[:, mid] - paths[:, 0]
    second = paths[:, -1] - paths[:, mid]
    corr = float(np.corrcoef(first, second)[0, 1])
    return WalkStats(
        increment_mean=float(z.mean()),
        increment_var_ratio=float(z.var(ddof=1)),
        skewness=float(sps.skew(z)),
        excess_kurtosis=float(sps.kurtosis(z)),
        half_increment_corr=corr,
        final_var=float(paths[:, -1].var(ddof=1)),
    )


# ---------------------------------------------------------------------------
# interpolation tables used by the experiments


@dataclass(frozen=True)
class ParamTable:
    """gamma(lambda), sigma(lambda) and DOS on a common grid, interpolated."""

    lams: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    dos: np.ndarray | None = None

    def gamma_at(self, lam) -> np.ndarray:
        return np.interp(lam, self.lams, self.gamma)

    def sigma_at(self, lam) -> np.ndarray:
        return np.interp(lam, self.lams, self.sigma)

    def dos_at(self, lam) -> np.ndarray:
        if self.dos is None:
            raise ValueError("table was built without a DOS column")
        return np.interp(lam, self.lams, self.dos, left=0.0, right=0.0)


def build_param_table(spec: PotentialSpec, n_lambda: int = 100,
                      steps: int = 200_000, batches: int = 32,
                      seed: int = 0, with_dos: bool = False,
                      dos_n: int = 1000, dos_realizations: int = 40) -> ParamTable:
    """Tabulate gamma, sigma (and optionally the DOS) on a uniform grid."""
    lo, hi = _dos_span(spec)
    lams = np.linspace(lo, hi, n_lambda)
    gamma, sigma2, _, _ = lyapunov_grid(spec, lams, steps=steps, batches=batches,
                                        seed=seed)
    dos = None
    if with_dos:
        curve = dos_counting(spec, dos_n, dos_realizations, n_lambda,
                             seed=seed + 1, span=(lo, hi))
        dos = np.interp(lams, curve.lam_centers, curve.density, left=0.0, right=0.0)
    return ParamTable(lams=lams, gamma=gamma, sigma=np.sqrt(np.maximum(sigma2, 0.0)),
                      dos=dos)
