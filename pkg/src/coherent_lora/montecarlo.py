"""Monte Carlo symbol and frame error rates under AWGN and same-SF interference.

Trials are grouped into fixed-size blocks. Block ``b`` draws from a Philox
stream keyed by ``(seed, b)``, so the outcome of every trial depends only on
the seed and its index, never on the number of workers or the order in which
blocks finish.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal, TextIO

import numpy as np
from scipy.stats import norm

from coherent_lora.chirp import TWO_PI, LoraParams, _reference
from coherent_lora.errors import ConfigurationError
from coherent_lora.interference import DEFAULT_OVERSAMPLING, interferer_samples, quantize_tau

BLOCK_SIZE = 1024
BLOCK_SAMPLES = 1 << 21
Receiver = Literal["coherent", "noncoherent"]
RECEIVERS = ("coherent", "noncoherent")


@dataclass(frozen=True)
class TrialConfig:
    """One simulated operating point.

    ``p_i_db = -inf`` disables the interferer. ``lambda_cfo`` is the
    interferer's carrier offset in DFT bins; its integer part only relabels
    bins, so values in [0, 1) cover every distinct case.
    """

    params: LoraParams
    snr_db: float
    p_i_db: float = -math.inf
    lambda_cfo: float = 0.0
    receiver: Receiver = "coherent"
    F: int = 1
    sigma_tr2: float = 0.0
    n_trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigurationError("must be >= 1", "n_trials")
        if not self.sigma_tr2 >= 0:
            raise ConfigurationError("must be >= 0", "sigma_tr2")
        if self.F < 1:
            raise ConfigurationError("must be >= 1", "F")
        if self.receiver not in RECEIVERS:
            raise ConfigurationError(f"must be one of {RECEIVERS}", "receiver")
        if not math.isfinite(self.snr_db):
            raise ConfigurationError("must be finite", "snr_db")
        if not math.isfinite(self.lambda_cfo):
            raise ConfigurationError("must be finite", "lambda_cfo")
        if math.isnan(self.p_i_db) or self.p_i_db == math.inf:
            raise ConfigurationError("must be finite or -inf", "p_i_db")
        if self.seed < 0:
            raise ConfigurationError("must be non-negative", "seed")


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    z = float(norm.ppf(0.5 + level / 2))
    phat = errors / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # Guard the endpoints against rounding so the interval always holds phat.
    return min(max(center - half, 0.0), phat), max(min(center + half, 1.0), phat)


@dataclass(frozen=True)
class ErrorRateEstimate:
    errors: int
    trials: int
    rate: float
    ci95: tuple[float, float]
    seed: int

    @classmethod
    def from_counts(cls, errors: int, trials: int, seed: int) -> "ErrorRateEstimate":
        return cls(int(errors), int(trials), errors / trials, wilson_interval(errors, trials), seed)


def default_block_size(N: int, frame_len: int) -> int:
    """Trials per block; a pure function of the shape so trial streams stay fixed."""
    return max(16, min(BLOCK_SIZE, BLOCK_SAMPLES // (N * frame_len)))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _frame_block(cfg: TrialConfig, frame_len: int, tracking: bool, block: int, size: int) -> int:
    """Simulate ``size`` frames of block ``block``; return the number of frame errors."""
    rng = block_rng(cfg.seed, block)
    N = cfg.params.N
    F = frame_len
    n = np.arange(N)
    # Draw every variable unconditionally so the streams line up across settings.
    s = rng.integers(0, N, size=(size, F))
    seq = rng.integers(0, N, size=(size, F + 1))
    tau = quantize_tau(rng.uniform(0.0, N, size=size), DEFAULT_OVERSAMPLING)
    omega = rng.uniform(0.0, TWO_PI, size=size)
    phi = rng.uniform(0.0, TWO_PI, size=size)
    z_tr = rng.standard_normal((size, F))
    noise = rng.standard_normal((size, F, N, 2))

    std = math.sqrt(10.0 ** (-cfg.snr_db / 10.0) / 2.0)
    y = std * (noise[..., 0] + 1j * noise[..., 1])
    if cfg.p_i_db > -math.inf:
        amp = 10.0 ** (cfg.p_i_db / 20.0)
        x_i = interferer_samples(seq[:, :-1], seq[:, 1:], tau[:, None], N)
        m = np.arange(F)[:, None]
        cyc = (n[None, :] + m * N) * cfg.lambda_cfo / N
        c_i = np.exp(1j * TWO_PI * (cyc - np.floor(cyc)))
        theta = omega + phi
        y += amp * np.exp(1j * theta)[:, None, None] * c_i[None] * x_i
    Y = np.fft.fft(y * np.conj(_reference(N)), axis=-1)
    rows = np.arange(size)[:, None]
    cols = np.arange(F)[None, :]
    Y[rows, cols, s] += N * np.exp(1j * phi)[:, None]
    if cfg.receiver == "coherent":
        phase = phi[:, None]
        if tracking:
            phase = phase + math.sqrt(cfg.sigma_tr2) * z_tr
        s_hat = np.argmax((Y * np.exp(-1j * phase)[..., None]).real, axis=-1)
    else:
        s_hat = np.argmax(np.abs(Y), axis=-1)
    return int(np.count_nonzero(np.any(s_hat != s, axis=1)))


def _block_task(args):
    cfg, frame_len, tracking, block, size = args
    return _frame_block(cfg, frame_len, tracking, block, size)


def _emit(stream: TextIO | None, **event):
    if stream is not None:
        stream.write(json.dumps(event) + "\n")
        stream.flush()


def _run(cfg: TrialConfig, frame_len: int, tracking: bool, workers: int, min_errors: int | None,
         progress: TextIO | None, block_size: int | None) -> ErrorRateEstimate:
    if block_size is None:
        block_size = default_block_size(cfg.params.N, frame_len)
    n_blocks = -(-cfg.n_trials // block_size)
    sizes = [min(block_size, cfg.n_trials - b * block_size) for b in range(n_blocks)]
    tasks = [(cfg, frame_len, tracking, b, sizes[b]) for b in range(n_blocks)]
    errors = trials = 0
    wave = max(workers, 1)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, n_blocks, wave):
            chunk = tasks[start:start + wave]
            counts = list(pool.map(_block_task, chunk)) if pool else [_block_task(t) for t in chunk]
            # Consume in block order so early stopping picks the same prefix for any worker count.
            for task, count in zip(chunk, counts):
                errors += count
                trials += task[4]
                if min_errors is not None and errors >= min_errors:
                    break
            else:
                lo, hi = wilson_interval(errors, trials)
                _emit(progress, event="progress", trials=trials, errors=errors,
                      rate=errors / trials, ci_low=lo, ci_high=hi)
                continue
            break
    finally:
        if pool:
            pool.shutdown()
    est = ErrorRateEstimate.from_counts(errors, trials, cfg.seed)
    _emit(progress, event="done", trials=trials, errors=errors, rate=est.rate,
          ci_low=est.ci95[0], ci_high=est.ci95[1])
    return est


def simulate_symbols(cfg: TrialConfig, workers: int = 1, min_errors: int | None = None,
                     progress: TextIO | None = None, block_size: int | None = None) -> ErrorRateEstimate:
    """Symbol error rate with a fresh interferer realization per trial.

    Draws s, both interfering symbols, tau, omega and the channel phase
    uniformly; the coherent receiver de-rotates by the true channel phase.
    ``cfg.F`` and ``cfg.sigma_tr2`` are ignored.
    """
    return _run(cfg, 1, False, workers, min_errors, progress, block_size)


def simulate_frames(cfg: TrialConfig, workers: int = 1, min_errors: int | None = None,
                    progress: TextIO | None = None, block_size: int | None = None) -> ErrorRateEstimate:
    """Frame error rate over a collision interval of ``cfg.F`` symbols.

    Offset, interferer phase and channel phase are held for the frame; the
    interferer payload is i.i.d. uniform and its carrier-offset phase
    advances from symbol to symbol. The coherent receiver de-rotates every
    symbol by the channel phase plus a Gaussian tracking error of variance
    ``cfg.sigma_tr2``.
    """
    return _run(cfg, cfg.F, True, workers, min_errors, progress, block_size)


@dataclass(frozen=True)
class RequiredSnr:
    snr_db: float | None
    reachable: bool
    floor: float | None
    evaluations: int
    note: str = ""


def _analytic_fer(cfg: TrialConfig, snr_db: float, quad, K: int, analytic_method: str) -> float:
    from coherent_lora.analytic import fer_collision

    if cfg.receiver != "coherent":
        raise ConfigurationError("analytic FER exists only for the coherent receiver", "receiver")
    if cfg.sigma_tr2 != 0:
        raise ConfigurationError("analytic FER assumes perfect phase knowledge", "sigma_tr2")
    return fer_collision(cfg.F, cfg.params, snr_db, cfg.p_i_db, cfg.lambda_cfo, quad,
                         method=analytic_method, K=K)


def required_snr(target_fer: float, sir_db: float, template: TrialConfig,
                 bracket: tuple[float, float] = (-20.0, 10.0), method: Literal["mc", "analytic"] = "mc",
                 tol_db: float = 0.1, rel_tol: float = 0.05, workers: int = 1, quad=None, K: int = 5,
                 analytic_method: str = "approx", progress: TextIO | None = None) -> RequiredSnr:
    """Smallest SNR meeting ``target_fer`` at the given SIR, by bisection.

    Monte Carlo evaluations reuse the template seed at every SNR, so the
    estimates share random numbers and vary smoothly along the search.
    """
    if not 0 < target_fer < 1:
        raise ConfigurationError("must lie in (0, 1)", "target_fer")
    lo, hi = bracket
    if not lo < hi:
        raise ConfigurationError("lower end must be below upper end", "bracket")
    if method not in ("mc", "analytic"):
        raise ConfigurationError(f"unknown method {method!r}", "method")
    base = replace(template, p_i_db=-sir_db)
    evaluations = 0

    def evaluate(snr):
        nonlocal evaluations
        evaluations += 1
        if method == "analytic":
            val = _analytic_fer(base, snr, quad, K, analytic_method)
            out = (val, (val, val))
        else:
            est = simulate_frames(replace(base, snr_db=snr), workers=workers)
            out = (est.rate, est.ci95)
        _emit(progress, event="bisect", snr_db=snr, fer=out[0], ci_low=out[1][0], ci_high=out[1][1])
        return out

    f_hi, _ = evaluate(hi)
    if f_hi > target_fer:
        return RequiredSnr(None, False, f_hi, evaluations, "error floor above target within bracket")
    f_lo, _ = evaluate(lo)
    if f_lo <= target_fer:
        return RequiredSnr(lo, False, None, evaluations, "target already met at the lower bracket end")
    while hi - lo >= tol_db:
        mid = 0.5 * (lo + hi)
        fer, (c_lo, c_hi) = evaluate(mid)
        if method == "mc" and c_lo >= target_fer * (1 - rel_tol) and c_hi <= target_fer * (1 + rel_tol):
            return RequiredSnr(mid, True, None, evaluations)
        if fer > target_fer:
            lo = mid
        else:
            hi = mid
    return RequiredSnr(0.5 * (lo + hi), True, None, evaluations)


__all__ = [
    "BLOCK_SIZE",
    "ErrorRateEstimate",
    "RequiredSnr",
    "TrialConfig",
    "block_rng",
    "default_block_size",
    "required_snr",
    "simulate_frames",
    "simulate_symbols",
    "wilson_interval",
]
