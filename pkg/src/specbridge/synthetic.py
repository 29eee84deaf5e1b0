"""Seeded synthetic corpus: short harmonic segments with enough high-band
structure that bandwidth extension and gap inpainting are non-trivial."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Waveform


@dataclass(frozen=True)
class CorpusConfig:
    sample_rate: int = 8000
    seg_seconds: float = 1.024
    n_segments: int = 512
    f0_min: float = 100.0
    f0_max: float = 2000.0
    max_harmonics: int = 8
    noise_prob: float = 0.3
    noise_level: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_segments < 1:
            raise ValueError("n_segments must be positive")
        if not 0 < self.f0_min < self.f0_max < self.sample_rate / 2:
            raise ValueError("f0 range must lie inside (0, Nyquist)")


def generate_segment(rng: np.random.Generator, cfg: CorpusConfig) -> Waveform:
    """One random harmonic segment: 2-4 tones, each with a stack of decaying
    harmonics below Nyquist, random onset/offset envelopes, optional noise."""
    n = int(round(cfg.seg_seconds * cfg.sample_rate))
    t = np.arange(n) / cfg.sample_rate
    x = np.zeros(n)
    nyq = cfg.sample_rate / 2.0
    n_tones = int(rng.integers(2, 5))
    for _ in range(n_tones):
        f0 = float(rng.uniform(cfg.f0_min, cfg.f0_max))
        n_h = int(rng.integers(1, cfg.max_harmonics + 1))
        amp = float(rng.uniform(0.1, 0.4))
        onset = float(rng.uniform(0.0, 0.5)) * cfg.seg_seconds
        length = float(rng.uniform(0.4, 1.0)) * cfg.seg_seconds
        env = np.clip((t - onset) / 0.01, 0.0, 1.0) * np.clip(
            (onset + length - t) / 0.01, 0.0, 1.0
        )
        tone = np.zeros(n)
        for h in range(1, n_h + 1):
            f = f0 * h
            if f >= 0.95 * nyq:
                break
            phase = float(rng.uniform(0.0, 2.0 * np.pi))
            decay = 0.7 ** (h - 1)
            tone += decay * np.sin(2.0 * np.pi * f * t + phase)
        x += amp * env * tone
    if rng.uniform() < cfg.noise_prob:
        x += cfg.noise_level * rng.standard_normal(n)
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= float(rng.uniform(0.5, 0.95)) / peak
    return Waveform(x, cfg.sample_rate)


def generate_corpus(cfg: CorpusConfig) -> list[Waveform]:
    rng = np.random.default_rng(cfg.seed)
    return [generate_segment(rng, cfg) for _ in range(cfg.n_segments)]
