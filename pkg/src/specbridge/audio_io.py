"""WAV file reading/writing and resampling."""

from __future__ import annotations

import numpy as np
from scipy.fft import dct, idct
from scipy.io import wavfile
from scipy.signal import resample_poly

from .spectral import Waveform


class AudioReadError(RuntimeError):
    """Unreadable, corrupted, or unsupported audio input."""


_PCM_SCALE = {
    np.dtype(np.int16): 2.0**15,
    np.dtype(np.int32): 2.0**31,
}


def read_wav(path) -> Waveform:
    """Load a mono WAV file as float64 samples in [-1, 1]; PCM16/24/32 and
    float32/64 payloads supported."""
    try:
        sr, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioReadError(f"{path}: cannot read WAV file ({exc})") from exc
    if data.ndim != 1:
        raise AudioReadError(
            f"{path}: expected mono audio, got {data.shape[1]} channels"
        )
    if data.size == 0:
        raise AudioReadError(f"{path}: file contains no samples")
    if data.dtype in _PCM_SCALE:
        samples = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioReadError(f"{path}: unsupported sample format {data.dtype}")
    if not np.all(np.isfinite(samples)):
        raise AudioReadError(f"{path}: non-finite samples")
    return Waveform(samples, int(sr))


def write_wav(path, wave: Waveform, bit_depth: str = "float32") -> None:
    """Write a mono WAV; ``bit_depth`` is "float32" (default), "float64"
    (lossless round trip), or "pcm16"."""
    if bit_depth == "float32":
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float32))
    elif bit_depth == "float64":
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float64))
    elif bit_depth == "pcm16":
        clipped = np.clip(wave.samples, -1.0, 1.0)
        wavfile.write(
            path,
            wave.sample_rate,
            np.round(clipped * 32767.0).astype(np.int16),
        )
    else:
        raise ValueError(f"unsupported bit depth {bit_depth!r}")


def lowpass_brickwall(wave: Waveform, cutoff_hz: float) -> Waveform:
    """Remove all content at or above ``cutoff_hz``.

    The signal is filtered in the DCT-I domain, i.e. brickwalled on its
    even-symmetric extension. The result is exactly bandlimited on that
    extension, so it stays smooth across the record edges and survives
    reflect-padded re-analysis without regenerating energy above the cutoff.
    """
    if not 0.0 < cutoff_hz <= wave.sample_rate / 2:
        raise ValueError("cutoff_hz must lie in (0, sample_rate/2]")
    x = np.asarray(wave.samples, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("need at least two samples to filter")
    coef = dct(x, type=1)
    freqs = np.arange(len(x)) * wave.sample_rate / (2.0 * (len(x) - 1))
    coef[freqs >= cutoff_hz] = 0.0
    return Waveform(idct(coef, type=1), wave.sample_rate)


def zero_intervals(wave: Waveform, intervals: list[tuple[int, int]]) -> Waveform:
    """Silence the given [start, end) sample intervals."""
    out = np.array(wave.samples, dtype=np.float64)
    for start, end in intervals:
        if start < 0 or end > len(out) or start >= end:
            raise ValueError(f"interval ({start}, {end}) outside the record")
        out[start:end] = 0.0
    return Waveform(out, wave.sample_rate)


def resample(wave: Waveform, target_sr: int) -> Waveform:
    """Polyphase windowed-sinc resampling (scipy resample_poly defaults)."""
    if target_sr <= 0:
        raise ValueError("target sample rate must be positive")
    if target_sr == wave.sample_rate:
        return wave
    g = np.gcd(wave.sample_rate, target_sr)
    out = resample_poly(wave.samples, target_sr // g, wave.sample_rate // g)
    return Waveform(out, target_sr)
