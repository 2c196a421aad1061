"""LoRa chirp modulation, the dechirp+DFT front end and the two detectors.

Samples are complex128 numpy arrays. With ``bandwidth_ratio == 1`` a symbol
is ``N = 2**sf`` samples long; with ``bandwidth_ratio = 1/os`` it is
``os * N`` samples long and sample ``n`` sits at chip time ``n / os``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from coherent_lora.errors import DomainError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class LoraParams:
    sf: int
    bandwidth_ratio: float = 1.0

    def __post_init__(self):
        if int(self.sf) != self.sf or not 7 <= self.sf <= 12:
            raise DomainError(f"spreading factor must be an integer in 7..12, got {self.sf}")
        if not 0.0 < self.bandwidth_ratio <= 1.0:
            raise DomainError(f"bandwidth_ratio must lie in (0, 1], got {self.bandwidth_ratio}")
        os = 1.0 / self.bandwidth_ratio
        if abs(os - round(os)) > 1e-9:
            raise DomainError("1/bandwidth_ratio must be an integer oversampling factor")

    @property
    def N(self) -> int:
        return 1 << self.sf

    @property
    def oversampling(self) -> int:
        return int(round(1.0 / self.bandwidth_ratio))


def chirp_cycles(t, s, N, fold_offset):
    """Phase in cycles (reduced mod 1) of a chirp of symbol ``s`` at chip time ``t``.

    ``fold_offset`` is 1/2 before the frequency fold and 3/2 after it.
    Broadcasts over all arguments.
    """
    t = np.asarray(t, dtype=float)
    cyc = t * t / (2.0 * N) + t * (np.asarray(s, dtype=float) / N - fold_offset)
    return cyc - np.floor(cyc)


def generate_symbol(s: int, p: LoraParams) -> np.ndarray:
    """Phase-continuous upchirp for symbol ``s``; every symbol starts at phase 0."""
    N = p.N
    if int(s) != s or not 0 <= s < N:
        raise DomainError(f"symbol must be an integer in 0..{N - 1}, got {s}")
    s = int(s)
    if p.oversampling == 1:
        # Exact integer phase: (n^2 + (2s - N) n) / (2N) cycles.
        n = np.arange(N, dtype=np.int64)
        num = (n * n + (2 * s - N) * n) % (2 * N)
        return np.exp(1j * np.pi * num / N)
    os = p.oversampling
    t = np.arange(N * os) / os
    off = np.where(t < N - s, 0.5, 1.5)
    return np.exp(1j * TWO_PI * chirp_cycles(t, s, N, off))


def generate_reference(p: LoraParams) -> np.ndarray:
    return generate_symbol(0, p)


def _reference(N: int) -> np.ndarray:
    n = np.arange(N, dtype=np.int64)
    return np.exp(1j * np.pi * ((n * n - N * n) % (2 * N)) / N)


def dechirp_dft(y, p: LoraParams) -> np.ndarray:
    """Unnormalized N-point DFT of ``y * conj(x_ref)``.

    ``y`` may be a single N-sample slice or a batch with symbols on the last axis.
    """
    y = np.asarray(y)
    N = p.N
    if y.shape[-1] != N:
        raise DomainError(f"expected {N} samples on the last axis, got {y.shape[-1]}")
    return np.fft.fft(y * np.conj(_reference(N)), axis=-1)


def detect_noncoherent(spectrum) -> np.ndarray | int:
    """Bin of largest magnitude; ties go to the lowest index."""
    idx = np.argmax(np.abs(np.asarray(spectrum)), axis=-1)
    return int(idx) if np.ndim(idx) == 0 else idx


def detect_coherent(spectrum, phi_hat) -> np.ndarray | int:
    """Bin with the largest real part after de-rotating by ``phi_hat``.

    ``phi_hat`` may be a scalar or one angle per row of a batched spectrum.
    """
    sp = np.asarray(spectrum)
    rot = np.exp(-1j * np.asarray(phi_hat, dtype=float))
    if np.ndim(rot):
        rot = rot[..., None]
    idx = np.argmax((sp * rot).real, axis=-1)
    return int(idx) if np.ndim(idx) == 0 else idx


class PhaseEstimate(NamedTuple):
    phase: float
    degenerate: bool


def estimate_phase(preamble_spectra: Sequence[np.ndarray], n_pr: int | None = None) -> PhaseEstimate:
    """Channel phase from the bin-0 values of dechirped preamble upchirps.

    A vanishing sum has no defined angle; the estimate is then 0 and flagged.
    """
    spectra = list(preamble_spectra)
    if n_pr is None:
        n_pr = len(spectra)
    if n_pr < 1 or n_pr > len(spectra):
        raise DomainError(f"n_pr must lie in 1..{len(spectra)}, got {n_pr}")
    bins0 = np.array([np.asarray(sp)[0] for sp in spectra[:n_pr]])
    total = bins0.sum()
    scale = np.abs(bins0).sum()
    if scale == 0.0 or abs(total) <= 1e-12 * scale:
        return PhaseEstimate(0.0, True)
    return PhaseEstimate(float(np.angle(total) % TWO_PI), False)


def apply_awgn(y, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add circular complex Gaussian noise of total variance ``10**(-snr_db/10)``."""
    if not np.isfinite(snr_db):
        raise DomainError("snr_db must be finite")
    y = np.asarray(y)
    std = np.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    noise = rng.standard_normal(y.shape + (2,))
    return y + std * (noise[..., 0] + 1j * noise[..., 1])
