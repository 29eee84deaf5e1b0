"""Spectral representation: STFT analysis/synthesis and the factorized
magnitude/phase tensor used throughout the restoration pipeline.

A complex spectrogram ``S`` of shape ``(N, W)`` (subbands x frames) is
factorized into a real tensor ``X`` of shape ``(N, W, 3)``:

    X[..., 0] = |S| ** rho          (compressed magnitude)
    X[..., 1] = cos(angle(S))
    X[..., 2] = sin(angle(S))

Reconstruction inverts the compression and, by default, projects the two
phase channels back onto the unit circle (nearest rotation in the
Frobenius sense) before reassembling the complex values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERATE_PHASE_FLOOR = 1e-12


def _hann_periodic(length: int) -> np.ndarray:
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {samples.shape}")
        if samples.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class StftParams:
    """Analysis/synthesis parameters. Frames are centered: the signal is
    reflect-padded by ``fft_size // 2`` on both sides, giving
    ``1 + len(x) // hop`` frames."""

    fft_size: int = 2048
    win_length: int = 2048
    hop: int = 512
    window: str = "hann"

    def __post_init__(self) -> None:
        if self.fft_size <= 0 or self.win_length <= 0 or self.hop <= 0:
            raise ValueError("fft_size, win_length and hop must be positive")
        if self.win_length > self.fft_size:
            raise ValueError("win_length must not exceed fft_size")
        if self.hop > self.win_length:
            raise ValueError("hop must not exceed win_length")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        self._check_cola()

    @property
    def n_subbands(self) -> int:
        return self.fft_size // 2 + 1

    def window_array(self) -> np.ndarray:
        """Periodic Hann window, zero-padded (centered) to fft_size."""
        win = _hann_periodic(self.win_length)
        if self.win_length == self.fft_size:
            return win
        out = np.zeros(self.fft_size)
        off = (self.fft_size - self.win_length) // 2
        out[off : off + self.win_length] = win
        return out

    def num_frames(self, n_samples: int) -> int:
        return 1 + n_samples // self.hop

    def _check_cola(self) -> None:
        # Overlap-added squared window must be bounded away from zero so the
        # synthesis normalization is well conditioned.
        w2 = self.window_array() ** 2
        ola = np.zeros(self.hop)
        for k in range(self.fft_size // self.hop + 1):
            seg = w2[k * self.hop : (k + 1) * self.hop]
            ola[: seg.size] += seg
        if np.min(ola) < 1e-6 * np.max(ola):
            raise ValueError(
                f"window/hop combination fails the overlap-add coverage check "
                f"(win={self.win_length}, hop={self.hop})"
            )


@dataclass
class ComplexSpec:
    """Complex spectrogram, shape (n_subbands, n_frames)."""

    data: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise ValueError(f"spectrogram must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite values")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def re(self) -> np.ndarray:
        return self.data.real

    @property
    def im(self) -> np.ndarray:
        return self.data.imag

    @property
    def mag(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass
class FactorizedSpec:
    """Factorized real spectrogram, shape (n_subbands, n_frames, 3).

    Channel 0 holds the rho-compressed magnitude; channels 1 and 2 hold the
    cos/sin phase pair. Intermediate diffusion states reuse this container,
    so no range constraints are enforced on the channels themselves.
    """

    data: np.ndarray
    rho: float = 0.25
    sample_rate: int = 44100

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(
                f"factorized tensor must have shape (N, W, 3), got {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("factorized tensor contains non-finite values")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def mag_c(self) -> np.ndarray:
        return self.data[..., 0]

    @property
    def cos_theta(self) -> np.ndarray:
        return self.data[..., 1]

    @property
    def sin_theta(self) -> np.ndarray:
        return self.data[..., 2]

    @property
    def n_subbands(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "FactorizedSpec":
        return FactorizedSpec(self.data.copy(), rho=self.rho, sample_rate=self.sample_rate)


def stft(wave: Waveform, params: StftParams) -> ComplexSpec:
    """Centered STFT with reflect padding.

    ``1 + len(x) // hop`` frames; subband i sits at frequency
    ``i * sample_rate / fft_size``.
    """
    x = wave.samples
    pad = params.fft_size // 2
    if x.size <= pad:
        raise ValueError(
            f"input of {x.size} samples is too short for fft_size {params.fft_size}"
        )
    xp = np.pad(x, pad, mode="reflect")
    n_frames = params.num_frames(x.size)
    frames = np.lib.stride_tricks.sliding_window_view(xp, params.fft_size)[
        :: params.hop
    ][:n_frames]
    win = params.window_array()
    spec = np.fft.rfft(frames * win, n=params.fft_size, axis=1)
    return ComplexSpec(spec.T.copy(), sample_rate=wave.sample_rate)


def istft(spec: ComplexSpec, params: StftParams, out_len: int) -> Waveform:
    """Inverse STFT via squared-window-normalized overlap-add.

    Exact inverse of :func:`stft` (up to float rounding) when called with the
    same parameters and the original length.
    """
    if spec.data.shape[0] != params.n_subbands:
        raise ValueError(
            f"spectrogram has {spec.data.shape[0]} subbands, params imply "
            f"{params.n_subbands}"
        )
    if out_len <= 0:
        raise ValueError("out_len must be positive")
    n_frames = spec.data.shape[1]
    fft = params.fft_size
    hop = params.hop
    win = params.window_array()
    frames_td = np.fft.irfft(spec.data.T, n=fft, axis=1)
    total = (n_frames - 1) * hop + fft
    acc = np.zeros(total)
    env = np.zeros(total)
    w2 = win * win
    for k in range(n_frames):
        off = k * hop
        acc[off : off + fft] += frames_td[k] * win
        env[off : off + fft] += w2
    good = env > 1e-10 * np.max(env)
    acc[good] /= env[good]
    pad = fft // 2
    out = acc[pad : pad + out_len]
    if out.size < out_len:
        out = np.pad(out, (0, out_len - out.size))
    return Waveform(out, sample_rate=spec.sample_rate)


def factorize(
    spec: ComplexSpec, rho: float = 0.25, zero_floor: float = 1e-12
) -> FactorizedSpec:
    """Split a complex spectrogram into (|S|**rho, cos(theta), sin(theta)).

    Zero-magnitude cells take the phase convention (cos, sin) = (1, 0).
    Cells whose magnitude is below ``zero_floor`` times the spectrogram peak
    are pure arithmetic residue with meaningless angles, so they are treated
    as zeros too (phases snapped deterministically, magnitude zeroed).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    mag = np.abs(spec.data)
    mag[mag <= zero_floor * np.max(mag)] = 0.0
    nz = mag > 0.0
    cos = np.ones_like(mag)
    sin = np.zeros_like(mag)
    np.divide(spec.data.real, mag, out=cos, where=nz)
    np.divide(spec.data.imag, mag, out=sin, where=nz)
    out = np.stack([mag**rho, cos, sin], axis=-1)
    return FactorizedSpec(out, rho=rho, sample_rate=spec.sample_rate)


def svdo_plus(cos_raw, sin_raw):
    """Project raw (cos, sin) channels onto the closest planar rotation.

    For the rotation-structured 2x2 matrix [[c, -s], [s, c]] the nearest
    orthogonal matrix with det=+1 is simply the pair rescaled to unit norm;
    this closed form replaces the full SVD. Near-zero pairs (norm below
    ``DEGENERATE_PHASE_FLOOR``) fall back to the identity rotation (1, 0).
    Accepts scalars or arrays.
    """
    c = np.asarray(cos_raw, dtype=np.float64)
    s = np.asarray(sin_raw, dtype=np.float64)
    norm = np.hypot(c, s)
    degenerate = norm < DEGENERATE_PHASE_FLOOR
    safe = np.where(degenerate, 1.0, norm)
    c_out = np.where(degenerate, 1.0, c / safe)
    s_out = np.where(degenerate, 0.0, s / safe)
    return c_out, s_out


def count_degenerate_phase(cos_raw, sin_raw) -> int:
    """Number of (cos, sin) cells that fall below the degeneracy floor."""
    norm = np.hypot(np.asarray(cos_raw, float), np.asarray(sin_raw, float))
    return int(np.count_nonzero(norm < DEGENERATE_PHASE_FLOOR))


def phase_ortho_error(cos_raw, sin_raw):
    """Squared Frobenius distance between the raw rotation-structured matrix
    [[c, -s], [s, c]] and its orthogonalized version: 2*(hypot(c, s) - 1)**2.
    """
    norm = np.hypot(np.asarray(cos_raw, float), np.asarray(sin_raw, float))
    return 2.0 * (norm - 1.0) ** 2


def reconstruct(x: FactorizedSpec, orthogonalize: bool = True) -> ComplexSpec:
    """Invert :func:`factorize`.

    The magnitude channel is clamped at zero before the 1/rho power. With
    ``orthogonalize`` enabled (default) the phase channels are renormalized
    via :func:`svdo_plus`; disabled, the raw channels are used as-is.
    """
    mag = np.clip(x.mag_c, 0.0, None) ** (1.0 / x.rho)
    cos, sin = x.cos_theta, x.sin_theta
    if orthogonalize:
        cos, sin = svdo_plus(cos, sin)
    data = mag * (cos + 1j * sin)
    return ComplexSpec(data, sample_rate=x.sample_rate)


def band_average_magnitude(
    spec: ComplexSpec, bands: "list[tuple[float, float]]"
) -> np.ndarray:
    """Mean |S| over each frequency band (half-open [lo, hi); a band whose
    upper edge reaches Nyquist also includes the Nyquist subband).

    Frequencies are subband centers ``i * sample_rate / fft_size`` with
    fft_size inferred from the subband count.
    """
    n = spec.data.shape[0]
    fft_size = 2 * (n - 1)
    nyquist = spec.sample_rate / 2.0
    freqs = np.arange(n) * spec.sample_rate / fft_size
    mag = np.abs(spec.data)
    out = np.empty(len(bands))
    for b, (lo, hi) in enumerate(bands):
        if not 0.0 <= lo < hi or hi > nyquist + 1e-9:
            raise ValueError(f"band ({lo}, {hi}) outside [0, Nyquist={nyquist}]")
        sel = (freqs >= lo) & (freqs < hi)
        if hi >= nyquist - 1e-9:
            sel |= np.isclose(freqs, nyquist)
        if not np.any(sel):
            raise ValueError(f"band ({lo}, {hi}) contains no subbands")
        out[b] = float(np.mean(mag[sel]))
    return out


def bands_2khz(sample_rate: int, width_hz: float = 2000.0) -> "list[tuple[float, float]]":
    """Contiguous fixed-width bands covering [0, Nyquist]."""
    nyq = sample_rate / 2.0
    edges = [0.0]
    while edges[-1] + width_hz < nyq:
        edges.append(edges[-1] + width_hz)
    edges.append(nyq)
    return list(zip(edges[:-1], edges[1:]))
