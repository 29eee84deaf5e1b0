"""Shared fixtures: small-scale STFT setups, signal factories, and the
session-scoped toy training run reused by the acceptance gates."""

from __future__ import annotations

import time

import numpy as np
import pytest

from specbridge.bridge import BridgeSchedule, DegradationConfig
from specbridge.spectral import StftParams, Waveform, factorize, stft
from specbridge.synthetic import CorpusConfig, generate_corpus
from specbridge.training import TrainConfig, train_toy

# one result line per acceptance criterion, printed after the session
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_sessionfinish(session, exitstatus):
    if not ACCEPTANCE_RESULTS:
        return
    tr = session.config.pluginmanager.get_plugin("terminalreporter")
    write = tr.write_line if tr else print
    write("")
    write("=" * 72)
    write("ACCEPTANCE CRITERIA")
    write("=" * 72)
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        write(f"[{name}] {status} — {detail}")
    write("=" * 72)


@pytest.fixture(scope="session")
def criterion():
    """Record + assert one acceptance criterion result."""

    def _check(name: str, ok: bool, detail: str):
        ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
        assert ok, f"[{name}] {detail}"

    return _check


TOY_SR = 8000
TOY_PARAMS = StftParams(fft_size=256, win_length=256, hop=128)


@pytest.fixture(scope="session")
def toy_params() -> StftParams:
    return TOY_PARAMS


def sine_wave(freq: float, seconds: float, sr: int = TOY_SR, amp: float = 0.5) -> Waveform:
    t = np.arange(int(round(seconds * sr))) / sr
    return Waveform(amp * np.sin(2.0 * np.pi * freq * t), sr)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def eval_segments() -> list[Waveform]:
    """Held-out harmonic segments (seed disjoint from the training corpus)."""
    cfg = CorpusConfig(
        sample_rate=TOY_SR, seg_seconds=2.56, n_segments=8, seed=777, noise_prob=0.0
    )
    return generate_corpus(cfg)


@pytest.fixture(scope="session")
def trained_toy():
    """Train the toy denoiser once per session (the expensive fixture).

    Returns (model, loss_history, train_seconds); reused by the learning
    gate, the step-count robustness check, and the CLI determinism check.
    """
    corpus = generate_corpus(
        CorpusConfig(sample_rate=TOY_SR, seg_seconds=1.024, n_segments=512, seed=11)
    )
    dataset = [factorize(stft(w, TOY_PARAMS)) for w in corpus]
    degradation = DegradationConfig(
        sample_rate=TOY_SR,
        sigma_fill=1.0,
        task="both",
        bwe_min_hz=1000.0,
        gap_min_s=0.1,
        gap_max_s=0.5,
    )
    cfg = TrainConfig(
        steps=2000,
        batch_size=4,
        lr=2e-4,
        seed=7,
        channels=32,
        blocks=7,
        window_frames=64,
    )
    t0 = time.monotonic()
    model, history = train_toy(
        dataset, cfg, degradation, TOY_PARAMS, BridgeSchedule(), progress=True
    )
    elapsed = time.monotonic() - t0
    return model, history, elapsed
