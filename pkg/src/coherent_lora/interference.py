"""Same-SF interferer model: waveform, CFO, received pattern and closed forms.

The interfering window seen by one desired symbol holds the tail of symbol
``s_i1`` followed, ``tau`` chips after the desired symbol start, by the head
of ``s_i2``. After dechirping, each of the four chirp branches (two per
interfering symbol, split at the frequency fold) is a pure tone over a run of
consecutive samples, so every DFT bin is a sum of four Dirichlet-kernel terms
``A_j * exp(i * theta_j)``. Those terms are what ``projection_terms`` returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from coherent_lora.chirp import TWO_PI, LoraParams, _reference, chirp_cycles, generate_symbol
from coherent_lora.errors import DomainError

# |sin| below this is treated as a removable singularity of the Dirichlet ratio
SINGULAR_EPS = 1e-12
DEFAULT_OVERSAMPLING = 32


def round_half_away(x):
    """Round to nearest integer, halves away from zero."""
    x = np.asarray(x, dtype=float)
    r = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return int(r) if r.ndim == 0 else r.astype(np.int64)


@dataclass(frozen=True)
class InterfererConfig:
    s_i1: int
    s_i2: int
    tau: float
    tau_cfo: float = 0.0
    m: int = 1
    p_i_db: float = 0.0
    omega: float = 0.0

    @property
    def L(self) -> int:
        return int(np.floor(self.tau))

    @property
    def lam(self) -> float:
        return self.tau - np.floor(self.tau)

    @property
    def L_cfo(self) -> int:
        return int(np.floor(self.tau_cfo))

    @property
    def lam_cfo(self) -> float:
        return self.tau_cfo - np.floor(self.tau_cfo)

    @property
    def amplitude(self) -> float:
        return 10.0 ** (self.p_i_db / 20.0)

    def validate(self, p: LoraParams) -> None:
        N = p.N
        for name in ("s_i1", "s_i2"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < N:
                raise DomainError(f"{name} must be an integer in 0..{N - 1}, got {v}")
        if not 0.0 <= self.tau < N:
            raise DomainError(f"tau must lie in [0, {N}), got {self.tau}")
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")


def _require_chip_rate(p: LoraParams) -> None:
    if p.oversampling != 1:
        raise DomainError("interference model is defined at fs = B (bandwidth_ratio == 1)")


def interferer_samples(s1, s2, tau, N: int) -> np.ndarray:
    """Vectorised interferer window; ``s1, s2, tau`` broadcast to a batch shape.

    Returns an array of shape ``batch + (N,)``.
    """
    s1 = np.asarray(s1)[..., None]
    s2 = np.asarray(s2)[..., None]
    tau = np.asarray(tau, dtype=float)[..., None]
    n = np.arange(N)
    L, lam = _split(tau)
    c = L + (lam > 0)
    first = n < c
    whole = np.where(first, n + N - L, n - L)
    s = np.where(first, s1, s2)
    fold = np.where(first, c - s1, N - s2 + c)
    off = np.where(n < fold, 0.5, 1.5)
    return np.exp(1j * TWO_PI * _lead_cycles(whole, lam, s, off, N))


def interferer_waveform(cfg: InterfererConfig, p: LoraParams) -> np.ndarray:
    """N samples of the (unit-power, CFO-free) interfering window."""
    _require_chip_rate(p)
    cfg.validate(p)
    return interferer_samples(cfg.s_i1, cfg.s_i2, cfg.tau, p.N)


def quantize_tau(tau, factor: int = DEFAULT_OVERSAMPLING):
    """Offset realised by a nearest-sample shift on a ``factor``-times oversampled grid."""
    return round_half_away(np.asarray(tau, dtype=float) * factor) / factor


def oversampled_interferer(cfg: InterfererConfig, p: LoraParams,
                           factor: int = DEFAULT_OVERSAMPLING) -> np.ndarray:
    """Interferer built by oversampling, concatenating, shifting and decimating.

    The realised offset is ``quantize_tau(cfg.tau, factor)``.
    """
    _require_chip_rate(p)
    cfg.validate(p)
    N = p.N
    fine = LoraParams(p.sf, 1.0 / factor)
    stream = np.concatenate([generate_symbol(cfg.s_i1, fine), generate_symbol(cfg.s_i2, fine)])
    shift = int(round_half_away(cfg.tau * factor))
    start = factor * N - shift
    return stream[start:start + factor * N:factor]


def cfo_phasor(cfg: InterfererConfig, p: LoraParams) -> np.ndarray:
    """exp(j 2 pi (n + (m-1) N) tau_cfo / N) for n = 0..N-1."""
    N = p.N
    n = np.arange(N)
    cyc = n * cfg.tau_cfo / N + (cfg.m - 1) * cfg.tau_cfo
    return np.exp(1j * TWO_PI * (cyc - np.floor(cyc)))


def received_pattern(cfg: InterfererConfig, p: LoraParams) -> np.ndarray:
    """DFT of the dechirped interferer, scaled by sqrt(P_I) exp(j omega)."""
    x = interferer_waveform(cfg, p) * cfo_phasor(cfg, p)
    gain = cfg.amplitude * np.exp(1j * cfg.omega)
    return gain * np.fft.fft(x * np.conj(_reference(p.N)))


def _split(x):
    x = np.asarray(x, dtype=float)
    whole = np.floor(x)
    return whole, x - whole


def _pi_over_n(whole, frac, N):
    """pi * (whole + frac) / N with the integer part reduced mod 2N first."""
    return np.pi * (np.mod(whole, 2 * N) + frac) / N


def _frac(x):
    return x - np.floor(x)


def _sincos_split(whole, frac, N):
    """sin and cos of pi (whole + frac) / N, reduced about the nearest multiple of N.

    ``whole`` is integral; the residue is formed before any large sum so its
    relative accuracy survives next to zeros of the sine.
    """
    w = np.mod(whole, 2 * N)
    j = np.round((w + frac) / N)
    resid = (w - j * N) + frac
    sign = 1.0 - 2.0 * np.mod(j, 2)
    ang = np.pi * resid / N
    return sign * np.sin(ang), sign * np.cos(ang)


def _dirichlet(whole, frac, length, N):
    """sin(pi d L / N) / sin(pi d / N) for d = whole + frac, L'Hopital limit at poles."""
    sa, ca = _sincos_split(whole, frac, N)
    saL, caL = _sincos_split(whole * length, frac * length, N)
    singular = np.abs(sa) < SINGULAR_EPS
    safe = np.where(singular, 1.0, sa)
    return np.where(singular, length * caL / np.where(singular, ca, 1.0), saL / safe)


def _lead_cycles(U, lam, s, off, N):
    """Fractional part of u^2/(2N) + u (s/N - off) for u = U - lam, U integer.

    Segment constants use u = N - tau (first symbol) and u = -tau (second).
    """
    cyc = (np.mod(U * U, 2 * N) / (2 * N) - U * lam / N + lam * lam / (2 * N)
           + np.mod(U * s, N) / N - _frac(U * off) - lam * (s / N - off))
    return _frac(cyc)


def projection_terms(s1, s2, tau, tau_cfo, N, k, m=1, omega=0.0):
    """Amplitudes and phases of the four branch terms at bin(s) ``k``.

    Arguments broadcast against each other; outputs carry a trailing axis of
    length 4 ordered (s_i1 before fold, s_i1 after fold, s_i2 before fold,
    s_i2 after fold). Bin ``k`` of the unit-amplitude pattern equals
    ``sum(A * exp(1j * theta), axis=-1)``.

    Integer and fractional parts of ``tau`` and ``tau_cfo`` are carried
    separately so the Dirichlet ratios stay accurate next to their poles.
    """
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    k = np.asarray(k, dtype=float)
    L, lam = _split(tau)
    Lc, lamc = _split(tau_cfo)
    c = L + (lam > 0)
    head1 = np.maximum(c - s1, 0.0)
    end2 = np.minimum(N - s2 + c, N)
    cfo_cycles = _frac((m - 1) * lamc)
    segs = (
        (s1, head1, c - s1 - 1, _lead_cycles(N - L, lam, s1, 0.5, N)),
        (s1, c - head1, head1 + c - 1, _lead_cycles(N - L, lam, s1, 1.5, N)),
        (s2, end2 - c, c + end2 - 1, _lead_cycles(-L, lam, s2, 0.5, N)),
        (s2, np.maximum(s2 - c, 0.0), 2 * N - s2 + c - 1, _lead_cycles(-L, lam, s2, 1.5, N)),
    )
    amps, thetas = [], []
    for s, length, index_sum, const in segs:
        whole = s - k - L + Lc
        frac = lamc - lam
        amps.append(_dirichlet(whole, frac, length, N))
        phase = _pi_over_n(whole * index_sum, frac * index_sum, N)
        thetas.append(phase + TWO_PI * _frac(const + cfo_cycles) + omega)
    return np.stack(np.broadcast_arrays(*amps), axis=-1), np.stack(np.broadcast_arrays(*thetas), axis=-1)


def projection_closed_form(k, cfg: InterfererConfig, p: LoraParams):
    """Real part of the de-rotated interference pattern at bin(s) ``k``.

    ``k=None`` evaluates every bin.
    """
    _require_chip_rate(p)
    cfg.validate(p)
    N = p.N
    if k is None:
        k = np.arange(N)
    amp, theta = projection_terms(cfg.s_i1, cfg.s_i2, cfg.tau, cfg.tau_cfo, N, k,
                                  m=cfg.m, omega=cfg.omega)
    val = cfg.amplitude * np.sum(amp * np.cos(theta), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def symbol_patterns(tau: float, tau_cfo: float, N: int, m: int = 1):
    """Unit-amplitude pattern contributions of each possible s_i1 and s_i2.

    Returns ``(first, second)``, both ``(N, N)`` complex arrays indexed
    ``[symbol, bin]``; the full pattern for ``(s1, s2)`` at phase 0 is
    ``first[s1] + second[s2]``.
    """
    s = np.arange(N)[:, None]
    k = np.arange(N)[None, :]
    amp, theta = projection_terms(s, s, tau, tau_cfo, N, k, m=m)
    terms = amp * np.exp(1j * theta)
    return terms[..., 0] + terms[..., 1], terms[..., 2] + terms[..., 3]


class BinSets(NamedTuple):
    d1: np.ndarray
    d2: np.ndarray

    @property
    def union(self) -> np.ndarray:
        return np.union1d(self.d1, self.d2)


def cluster_centers(s1, s2, tau, tau_cfo, N: int):
    shift = round_half_away(np.asarray(tau, dtype=float) - tau_cfo)
    return (N - shift + np.asarray(s1)) % N, (N - shift + np.asarray(s2)) % N


def relevant_bins(cfg: InterfererConfig, K: int, p: LoraParams) -> BinSets:
    """The K-bin windows around the two interference cluster centres."""
    if int(K) != K or K % 2 == 0:
        raise DomainError(f"K must be an odd integer, got {K}")
    N = p.N
    if not 1 <= K < N:
        raise DomainError(f"K must lie in 1..{N - 1}, got {K}")
    c1, c2 = cluster_centers(cfg.s_i1, cfg.s_i2, cfg.tau, cfg.tau_cfo, N)
    offs = np.arange(K) - (K - 1) // 2
    return BinSets((c1 + offs) % N, (c2 + offs) % N)
