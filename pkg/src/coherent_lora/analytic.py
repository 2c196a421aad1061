"""Analytical symbol and frame error rates of the coherent receiver.

Noise convention: per-sample complex noise variance is ``1/snr`` for a
unit-power desired signal, so after the unnormalized DFT the real part of
every bin has variance ``sigma2 = N / (2 snr)`` and the wanted bin has mean
``N``. All Q-function arguments below are of the form ``x / sqrt(2 sigma2)``.

Averages over the interferer symbols, time offset and phase are proper
expectations: uniform weights over ``(s_i1, s_i2)`` pairs, a periodic
rectangle rule over ``tau in [0, N)`` and over ``omega in [0, 2 pi)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import mpmath
import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr

from coherent_lora import kernels
from coherent_lora.chirp import LoraParams
from coherent_lora.errors import ConfigurationError, DomainError, NumericalError, NumericalWarning
from coherent_lora.interference import (
    InterfererConfig,
    cluster_centers,
    projection_closed_form,
    projection_terms,
    symbol_patterns,
)

PROBABILITY_SLACK = 1e-9
KL_A = 1.4
KL_B = 1.135
FIT_COEFFS = (1.161, 0.2074, 0.2775, 0.0153)
SF_COST_LIMIT = 9

Method = Literal["exact", "bound", "approx"]
AwgnForm = Literal["fitted", "exact"]


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretization of the outer integrals.

    ``pair_samples`` replaces the full ``N**2`` grid of interferer symbol
    pairs by that many distinct pairs drawn without replacement (seeded by
    ``pair_seed``); ``None`` keeps every pair.
    """

    y_width: float = 10.0
    y_points: int = 401
    eps: float = 0.2
    rho: float = math.pi / 2
    pair_samples: int | None = None
    pair_seed: int = 0

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("must be positive", "eps")
        if not self.rho > 0:
            raise ConfigurationError("must be positive", "rho")
        if self.y_points < 3:
            raise ConfigurationError("must be at least 3", "y_points")
        if not self.y_width > 0:
            raise ConfigurationError("must be positive", "y_width")
        if self.pair_samples is not None and self.pair_samples < 1:
            raise ConfigurationError("must be at least 1", "pair_samples")

    def tau_grid(self, N: int) -> np.ndarray:
        count = max(int(round(N / self.eps)), 1)
        return np.arange(count) * (N / count)

    def omega_grid(self) -> np.ndarray:
        count = max(int(round(2 * math.pi / self.rho)), 1)
        return np.arange(count) * (2 * math.pi / count)

    def pairs(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        total = N * N
        if self.pair_samples is None or self.pair_samples >= total:
            flat = np.arange(total)
        else:
            rng = np.random.default_rng(self.pair_seed)
            flat = np.sort(rng.choice(total, size=self.pair_samples, replace=False))
        return flat // N, flat % N

    @property
    def is_default(self) -> bool:
        return self == QuadratureSpec()


@dataclass(frozen=True)
class SerResult:
    value: float
    method: str
    cost: int
    remainder_bound: float | None = field(default=None)

    def __float__(self) -> float:
        return self.value


def _checked(value, what: str):
    """Validate a probability without clamping away real errors."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{what}: non-finite result")
    if np.any(arr < -PROBABILITY_SLACK) or np.any(arr > 1 + PROBABILITY_SLACK):
        raise NumericalError(f"{what}: value {arr.min():.3g}..{arr.max():.3g} outside [0, 1]")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def snr_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def noise_sigma(N: int, snr_db):
    """Standard deviation of the real part of a DFT bin."""
    return np.sqrt(N / (2.0 * snr_linear(snr_db)))


def q_function(x):
    """Gaussian tail probability Q(x)."""
    out = ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def q_power_approx(x, q: int):
    """Exponential-fit approximation of Q(x)**q.

    Uses Q(x) ~ (1 - exp(-1.4 x)) exp(-x^2/2) / (1.135 sqrt(2 pi) x) for
    x >= 0 and the reflection 1 - Q(-x) for negative x.
    """
    if q < 1:
        raise DomainError("q must be >= 1")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    safe = np.where(ax == 0, 1.0, ax)
    core = -np.expm1(-KL_A * safe) * np.exp(-0.5 * safe * safe) / (KL_B * math.sqrt(2 * math.pi) * safe)
    single = np.where(ax == 0, KL_A / (KL_B * math.sqrt(2 * math.pi)), core)
    single = np.where(x < 0, 1.0 - single, single)
    out = single ** q
    return float(out) if out.ndim == 0 else out


def _gauss_nodes(center, sigma, quad: QuadratureSpec):
    u = np.linspace(-quad.y_width, quad.y_width, quad.y_points)
    return center + sigma * u, u


def awgn_error_probability(N: int, snr_db, quad: QuadratureSpec | None = None):
    """Coherent SER under AWGN for an ``N``-bin detector (any N >= 2)."""
    quad = quad or QuadratureSpec()
    sigma = float(noise_sigma(N, snr_db))
    y, u = _gauss_nodes(N, sigma, quad)
    integrand = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) * -np.expm1((N - 1) * log_ndtr(y / sigma))
    return np.trapezoid(integrand, u)


def ser_awgn_exact(p: LoraParams, snr_db: float, quad: QuadratureSpec | None = None) -> SerResult:
    quad = quad or QuadratureSpec()
    value = awgn_error_probability(p.N, snr_db, quad)
    return SerResult(_checked(value, "ser_awgn_exact"), "exact", quad.y_points)


def _binomial_node(Q: float, M: int, qm: int, coeffs, dps: int, power: Callable | None, x: float):
    """Truncated alternating sum and absolute tail at one node, in extended precision."""
    with mpmath.workdps(dps):
        acc = mpmath.mpf(0)
        if power is None:
            Qm = mpmath.mpf(Q)
            term_pow = mpmath.mpf(1)
            for q in range(1, qm + 1):
                term_pow *= Qm
                acc += (-1) ** (q + 1) * coeffs[q] * term_pow
            tail = mpmath.mpf(0)
            for q in range(qm + 1, M + 1):
                term_pow *= Qm
                tail += coeffs[q] * term_pow
        else:
            for q in range(1, qm + 1):
                acc += (-1) ** (q + 1) * coeffs[q] * mpmath.mpf(power(x, q))
            tail = mpmath.mpf(0)
            Qm = mpmath.mpf(Q)
            term_pow = Qm ** (qm + 1) if qm < M else mpmath.mpf(0)
            for q in range(qm + 1, M + 1):
                tail += coeffs[q] * term_pow
                term_pow *= Qm
        return float(acc), float(tail)


def ser_awgn_binomial(p: LoraParams, snr_db: float, q_max: int | None = 64,
                      quad: QuadratureSpec | None = None, approx_powers: bool = False) -> SerResult:
    """Coherent AWGN SER through the alternating binomial expansion of the CDF product.

    The expansion is summed in extended precision on the nodes with y >= 0;
    below zero the product is evaluated directly since the expansion
    diverges there once truncated. Terms past ``q_max`` are dropped and the
    integral of their absolute sum is reported as ``remainder_bound``.
    ``q_max=None`` keeps all ``N - 1`` terms.
    """
    quad = quad or QuadratureSpec()
    N = p.N
    M = N - 1
    qm = M if q_max is None else min(int(q_max), M)
    if qm < 1:
        raise DomainError("q_max must be >= 1")
    sigma = float(noise_sigma(N, snr_db))
    y, u = _gauss_nodes(N, sigma, quad)
    weight = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    # Largest binomial coefficient bounds the size of any partial sum.
    top = gammaln(M + 1) - gammaln(M // 2 + 1) - gammaln(M - M // 2 + 1)
    dps = 30 + int(math.ceil(top / math.log(10)))
    with mpmath.workdps(dps):
        coeffs = [mpmath.binomial(M, q) for q in range(M + 1)]
    power = q_power_approx if approx_powers else None
    vals = np.empty_like(y)
    tails = np.zeros_like(y)
    for i, yy in enumerate(y):
        x = yy / sigma
        if yy < 0:
            vals[i] = -math.expm1(M * float(log_ndtr(x)))
            continue
        vals[i], tails[i] = _binomial_node(float(ndtr(-x)), M, qm, coeffs, dps, power, x)
    bad = (vals > 1 + 1e-6) | (vals < -1e-6)
    if np.any(bad):
        warnings.warn(
            f"binomial partial sums leave [0, 1] at {int(bad.sum())} nodes "
            f"(max {vals.max():.3g}); truncation at q_max={qm} is not converged",
            NumericalWarning, stacklevel=2)
    value = np.trapezoid(weight * vals, u)
    remainder = float(np.trapezoid(weight * tails, u))
    return SerResult(_checked(value, "ser_awgn_binomial"), "binomial", quad.y_points * qm, remainder)


def awgn_fitted_value(sf: int, snr_db):
    a, b, c, d = FIT_COEFFS
    N = 2 ** sf
    s2 = 1.0 / (2.0 * N * snr_linear(snr_db))
    arg = (1.0 - np.sqrt(s2) * (a + b * sf)) / np.sqrt(s2 + s2 * (c - d * sf))
    return ndtr(-arg)


def ser_awgn_fitted(p: LoraParams, snr_db: float) -> SerResult:
    return SerResult(_checked(awgn_fitted_value(p.sf, snr_db), "ser_awgn_fitted"), "fitted", 1)


def awgn_ser(p: LoraParams, snr_db, form: AwgnForm = "fitted", quad: QuadratureSpec | None = None):
    """AWGN SER as a plain float or array, in the requested form."""
    if form == "fitted":
        return _checked(awgn_fitted_value(p.sf, snr_db), "awgn_ser")
    if form == "exact":
        vals = [awgn_error_probability(p.N, s, quad) for s in np.atleast_1d(snr_db)]
        return _checked(vals[0] if np.ndim(snr_db) == 0 else np.array(vals), "awgn_ser")
    raise ConfigurationError(f"unknown AWGN form {form!r}", "awgn")


def ser_conditional_exact(s: int, cfg: InterfererConfig, p: LoraParams, snr_db: float,
                          quad: QuadratureSpec | None = None) -> float:
    """Error probability of symbol ``s`` for one fixed interferer realization."""
    quad = quad or QuadratureSpec()
    N = p.N
    if not 0 <= s < N:
        raise DomainError(f"symbol {s} outside 0..{N - 1}")
    mu = np.ascontiguousarray(np.atleast_2d(projection_closed_form(None, cfg, p)), dtype=float)
    out = np.empty_like(mu)
    kernels.exact_error_probs(mu, float(noise_sigma(N, snr_db)), quad.y_width, quad.y_points, out)
    return _checked(out[0, s], "ser_conditional_exact")


@dataclass(frozen=True)
class TauProfile:
    """Per-offset conditional SER averaged over symbols, pairs and phase.

    ``values[i, j]`` belongs to ``taus[i]`` and ``snr_db[j]``. For the
    ``approx`` method it holds the interference-driven part only, i.e. the
    excess of the reduced Q-sum over its interference-free value.
    """

    taus: np.ndarray
    snr_db: np.ndarray
    values: np.ndarray
    method: str
    cost: int


def _d_bins(s1, s2, tau, tau_cfo, N, K):
    c1, c2 = cluster_centers(s1, s2, tau, tau_cfo, N)
    off = np.arange(K) - (K - 1) // 2
    d1 = (c1[:, None] + off) % N
    d2 = (c2[:, None] + off) % N
    bins = np.concatenate([d1, d2], axis=1)
    valid = np.ones(bins.shape, dtype=bool)
    # Overlapping windows: keep each bin once.
    dup = (d2[:, :, None] == d1[:, None, :]).any(axis=2)
    valid[:, K:] = ~dup
    return bins, valid


def _patterns(s1, s2, tau, tau_cfo, N, bins=None, cache=None):
    """Unit-amplitude complex pattern for each pair at the given bins (all when None)."""
    if bins is None:
        first, second = cache if cache is not None else symbol_patterns(tau, tau_cfo, N)
        return first[s1] + second[s2]
    if cache is not None:
        first, second = cache
        return first[s1[:, None], bins] + second[s2[:, None], bins]
    amp, theta = projection_terms(s1[:, None], s2[:, None], tau, tau_cfo, N, bins)
    return np.sum(amp * np.exp(1j * theta), axis=-1)


def _project(W, amp, omegas):
    """Stack Re(amp * e^{j omega} W) over the phase grid along the first axis."""
    rot = amp * np.exp(1j * omegas)
    V = (rot[:, None, None] * W[None]).real
    return np.ascontiguousarray(V.reshape(-1, W.shape[1]))


def _check_method(method):
    if method not in ("exact", "bound", "approx"):
        raise ConfigurationError(f"unknown analytic method {method!r}", "method")


def _check_k(K, N):
    if K % 2 == 0 or not 1 <= K < N:
        raise DomainError(f"K must be odd with 1 <= K < N, got {K}")


def interference_profile(p: LoraParams, snr_db, p_i_db: float, tau_cfo: float = 0.0,
                         quad: QuadratureSpec | None = None, method: Method = "approx",
                         K: int = 5, search: Literal["full", "reduced"] = "full",
                         allow_expensive: bool = False) -> TauProfile:
    """Conditional SER on every offset of the quadrature grid.

    ``method`` selects the per-realization evaluator: ``exact`` integrates
    the Gaussian order statistics, ``bound`` is the maximum-projection
    Q-average (``search`` chooses the competitor set) and ``approx`` is the
    reduced |D|+1 Q-function form.
    """
    _check_method(method)
    quad = quad or QuadratureSpec()
    N = p.N
    if method == "exact" and p.sf > SF_COST_LIMIT and quad.pair_samples is None and not allow_expensive:
        raise ConfigurationError(f"exact evaluation at SF={p.sf} over all symbol pairs is prohibitively "
            "expensive; set pair_samples or allow_expensive=True", "quad")
    if method == "approx" or search == "reduced":
        _check_k(K, N)
    if search not in ("full", "reduced"):
        raise ConfigurationError(f"unknown search {search!r}", "search")
    snr = np.atleast_1d(np.asarray(snr_db, dtype=float))
    scales = np.ascontiguousarray(np.sqrt(snr_linear(snr) / N))
    sigmas = noise_sigma(N, snr)
    amp = 10.0 ** (p_i_db / 20.0)
    taus = quad.tau_grid(N)
    omegas = quad.omega_grid()
    s1, s2 = quad.pairs(N)
    n_cfg = s1.size * omegas.size
    values = np.zeros((taus.size, snr.size))
    full_grid = s1.size * 2 * K >= N * N
    cost = 0
    for i, tau in enumerate(taus):
        if method == "approx":
            bins, valid = _d_bins(s1, s2, tau, tau_cfo, N, K)
            cache = symbol_patterns(tau, tau_cfo, N) if full_grid else None
            W = _patterns(s1, s2, tau, tau_cfo, N, bins, cache)
            V = _project(W, amp, omegas)
            mask = np.ascontiguousarray(np.tile(valid, (omegas.size, 1)), dtype=np.uint8)
            acc = np.zeros(snr.size)
            kernels.pairwise_q_sums(V, mask, N, scales, acc)
            values[i] = acc / n_cfg
            cost += n_cfg * (2 * K + 1) * snr.size
            continue
        W = _patterns(s1, s2, tau, tau_cfo, N)
        V = _project(W, amp, omegas)
        if method == "bound":
            if search == "full":
                eligible = np.ones(V.shape, dtype=np.uint8)
            else:
                bins, valid = _d_bins(s1, s2, tau, tau_cfo, N, K)
                eligible = np.zeros((s1.size, N), dtype=np.uint8)
                rows = np.repeat(np.arange(s1.size), bins.shape[1])
                eligible[rows, bins.ravel()] = 1
                eligible = np.ascontiguousarray(np.tile(eligible, (omegas.size, 1)))
            acc = np.zeros(snr.size)
            kernels.max_projection_sums(V, eligible, scales, acc)
            values[i] = acc / n_cfg
            cost += n_cfg * N * snr.size
        else:
            out = np.empty_like(V)
            for j, sigma in enumerate(sigmas):
                kernels.exact_error_probs(V, float(sigma), quad.y_width, quad.y_points, out)
                values[i, j] = out.mean()
            cost += n_cfg * N * quad.y_points * snr.size
    if method == "approx":
        values = np.maximum(values - ndtr(-N * scales)[None, :], 0.0)
    return TauProfile(taus, snr, _checked(values, f"{method} profile"), method, cost)


def _scalar(snr_db):
    if np.ndim(snr_db) != 0:
        raise DomainError("snr_db must be a scalar here; use interference_profile for sweeps")
    return float(snr_db)


def ser_interference_full(p: LoraParams, snr_db: float, p_i_db: float, tau_cfo: float = 0.0,
                          quad: QuadratureSpec | None = None, allow_expensive: bool = False) -> SerResult:
    """Average SER under interference from the exact conditional integral."""
    prof = interference_profile(p, _scalar(snr_db), p_i_db, tau_cfo, quad, "exact",
                                allow_expensive=allow_expensive)
    return SerResult(_checked(prof.values[:, 0].mean(), "ser_interference_full"), "exact", prof.cost)


def ser_bound_qmax(p: LoraParams, snr_db: float, p_i_db: float, tau_cfo: float = 0.0,
                   quad: QuadratureSpec | None = None, search: Literal["full", "reduced"] = "full",
                   K: int = 5) -> SerResult:
    """Maximum-projection lower bound on the average SER."""
    prof = interference_profile(p, _scalar(snr_db), p_i_db, tau_cfo, quad, "bound", K=K, search=search)
    return SerResult(_checked(prof.values[:, 0].mean(), "ser_bound_qmax"), "bound", prof.cost)


def combine_noise(p_noise, p_interference):
    return p_noise + (1.0 - p_noise) * p_interference


def ser_approx(p: LoraParams, snr_db: float, p_i_db: float, tau_cfo: float = 0.0,
               quad: QuadratureSpec | None = None, K: int = 5, awgn: AwgnForm = "fitted") -> SerResult:
    """Reduced Q-sum interference term combined with the AWGN SER."""
    prof = interference_profile(p, _scalar(snr_db), p_i_db, tau_cfo, quad, "approx", K=K)
    p_n = awgn_ser(p, float(snr_db), awgn, quad)
    value = combine_noise(p_n, prof.values[:, 0].mean())
    return SerResult(_checked(value, "ser_approx"), "approx", prof.cost + 1)


def symbol_error_given_tau(prof: TauProfile, p: LoraParams, awgn: AwgnForm = "fitted",
                           quad: QuadratureSpec | None = None) -> np.ndarray:
    """Per-offset symbol error probability, shape ``(n_tau, n_snr)``."""
    if prof.method != "approx":
        return prof.values
    p_n = np.atleast_1d(awgn_ser(p, prof.snr_db, awgn, quad))
    return combine_noise(p_n[None, :], prof.values)


def fer_from_profile(prof: TauProfile, F: int, p: LoraParams, awgn: AwgnForm = "fitted",
                     quad: QuadratureSpec | None = None) -> np.ndarray:
    if F < 1:
        raise DomainError("F must be >= 1")
    ps = symbol_error_given_tau(prof, p, awgn, quad)
    return _checked(np.mean(-np.expm1(F * np.log1p(-ps)), axis=0), "fer_collision")


def fer_partial_from_profile(prof: TauProfile, F: int, p: LoraParams, awgn: AwgnForm = "fitted",
                             quad: QuadratureSpec | None = None) -> np.ndarray:
    if F < 1:
        raise DomainError("F must be >= 1")
    ps = symbol_error_given_tau(prof, p, awgn, quad)
    p_n = np.atleast_1d(awgn_ser(p, prof.snr_db, awgn, quad))
    total = np.zeros(prof.snr_db.size)
    for f_i in range(1, F + 1):
        log_ok = f_i * np.log1p(-ps) + (F - f_i) * np.log1p(-p_n)[None, :]
        total += np.mean(-np.expm1(log_ok), axis=0)
    return _checked(total / F, "fer_partial_average")


def _profile_for(p, snr_db, p_i_db, tau_cfo, quad, method, K, allow_expensive):
    return interference_profile(p, snr_db, p_i_db, tau_cfo, quad, method, K=K,
                                allow_expensive=allow_expensive)


def fer_collision(F: int, p: LoraParams, snr_db, p_i_db: float, tau_cfo: float = 0.0,
                  quad: QuadratureSpec | None = None, method: Method = "approx", K: int = 5,
                  awgn: AwgnForm = "fitted", allow_expensive: bool = False):
    """FER over a collision interval of ``F`` symbols sharing one offset.

    Accepts a scalar or an array of SNR values.
    """
    if F < 1:
        raise DomainError("F must be >= 1")
    prof = _profile_for(p, snr_db, p_i_db, tau_cfo, quad, method, K, allow_expensive)
    out = fer_from_profile(prof, F, p, awgn, quad)
    return float(out[0]) if np.ndim(snr_db) == 0 else out


def fer_partial_average(F: int, p: LoraParams, snr_db, p_i_db: float, tau_cfo: float = 0.0,
                        quad: QuadratureSpec | None = None, method: Method = "approx", K: int = 5,
                        awgn: AwgnForm = "fitted", allow_expensive: bool = False):
    """FER averaged over 1..F interfered symbols, the rest seeing AWGN only."""
    if F < 1:
        raise DomainError("F must be >= 1")
    prof = _profile_for(p, snr_db, p_i_db, tau_cfo, quad, method, K, allow_expensive)
    out = fer_partial_from_profile(prof, F, p, awgn, quad)
    return float(out[0]) if np.ndim(snr_db) == 0 else out
