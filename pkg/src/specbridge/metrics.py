"""Objective magnitude-domain metrics and the fixed evaluation protocols.

LSD: per-frame RMS over subbands of log10(ref_mag**2 / est_mag**2), averaged
over frames; magnitudes floored at 1e-8 before the log. Region-restricted
variants limit the subband mean and/or the frame mean to a selection.

SiSpec: scale-invariant ratio on flattened magnitudes. The default projects
the estimate onto the reference (invariant to scaling of the estimate); the
alternative ``printed`` form normalizes the projection by the estimate's own
energy instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .bridge import cutoff_to_subband, inpaint_gap_grid
from .spectral import ComplexSpec, StftParams, Waveform, stft

MAG_FLOOR = 1e-8
SISPEC_CAP_DB = 100.0


def lsd(
    mag_ref: np.ndarray,
    mag_est: np.ndarray,
    floor: float = MAG_FLOOR,
    subband_mask: np.ndarray | None = None,
    frame_mask: np.ndarray | None = None,
) -> float:
    """Log-spectral distance between magnitude spectrograms of shape (N, W)."""
    mag_ref = np.asarray(mag_ref, dtype=np.float64)
    mag_est = np.asarray(mag_est, dtype=np.float64)
    if mag_ref.shape != mag_est.shape or mag_ref.ndim != 2:
        raise ValueError(
            f"magnitude shapes must match and be 2-D, got {mag_ref.shape} "
            f"vs {mag_est.shape}"
        )
    if np.any(mag_ref < 0) or np.any(mag_est < 0):
        raise ValueError("magnitudes must be non-negative")
    r = np.maximum(mag_ref, floor)
    e = np.maximum(mag_est, floor)
    term = 2.0 * (np.log10(r) - np.log10(e))
    sq = term * term
    if subband_mask is not None:
        subband_mask = np.asarray(subband_mask, dtype=bool)
        if subband_mask.shape != (mag_ref.shape[0],) or not subband_mask.any():
            raise ValueError("subband_mask must be a non-empty subband selection")
        sq = sq[subband_mask]
    per_frame = np.sqrt(np.mean(sq, axis=0))
    if frame_mask is not None:
        frame_mask = np.asarray(frame_mask, dtype=bool)
        if frame_mask.shape != (mag_ref.shape[1],) or not frame_mask.any():
            raise ValueError("frame_mask must be a non-empty frame selection")
        per_frame = per_frame[frame_mask]
    return float(np.mean(per_frame))


def sispec(
    mag_ref: np.ndarray,
    mag_est: np.ndarray,
    printed_form: bool = False,
    cap_db: float = SISPEC_CAP_DB,
) -> float:
    """Scale-invariant spectrogram-to-noise ratio in dB on flattened
    magnitudes; degenerate error/target norms are capped at +/- cap_db."""
    ref = np.asarray(mag_ref, dtype=np.float64).ravel()
    est = np.asarray(mag_est, dtype=np.float64).ravel()
    if ref.shape != est.shape:
        raise ValueError("magnitude shapes must match")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference magnitude is identically zero")
    if printed_form:
        est_energy = float(np.dot(est, est))
        if est_energy == 0.0:
            return -cap_db
        target = (np.dot(est, ref) / est_energy) * ref
    else:
        target = (np.dot(est, ref) / ref_energy) * ref
    err = est - target
    num = float(np.dot(target, target))
    den = float(np.dot(err, err))
    if num == 0.0:
        return -cap_db
    if den == 0.0:
        return cap_db
    val = 10.0 * np.log10(num / den)
    return float(np.clip(val, -cap_db, cap_db))


@dataclass
class EvalEntry:
    """Metrics for one reference/restored pair."""

    stem: str
    task: str
    lsd: float
    sispec: float
    lsd_masked: float
    sispec_masked: float
    cutoff_hz: float | None = None
    gap_ms: float | None = None
    period_s: float | None = None
    n_gaps: int | None = None


@dataclass
class EvalReport:
    """Batch evaluation results plus aggregate means."""

    task: str
    entries: list[EvalEntry] = field(default_factory=list)

    def aggregate(self) -> dict[str, float]:
        if not self.entries:
            return {}
        keys = ("lsd", "sispec", "lsd_masked", "sispec_masked")
        return {
            f"mean_{k}": float(np.mean([getattr(e, k) for e in self.entries]))
            for k in keys
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "task": self.task,
            "aggregate": self.aggregate(),
            "entries": [asdict(e) for e in self.entries],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    def txt_lines(self) -> list[str]:
        lines = [f"task: {self.task}"]
        for e in self.entries:
            extra = ""
            if e.cutoff_hz is not None:
                extra = f" cutoff={e.cutoff_hz:.0f}Hz"
            if e.gap_ms is not None:
                extra = f" gap={e.gap_ms:.0f}ms x{e.n_gaps}"
            lines.append(
                f"{e.stem}{extra}: lsd={e.lsd:.4f} sispec={e.sispec:.2f}dB "
                f"lsd_masked={e.lsd_masked:.4f} sispec_masked={e.sispec_masked:.2f}dB"
            )
        agg = self.aggregate()
        if agg:
            lines.append(
                "mean: lsd={mean_lsd:.4f} sispec={mean_sispec:.2f}dB "
                "lsd_masked={mean_lsd_masked:.4f} "
                "sispec_masked={mean_sispec_masked:.2f}dB".format(**agg)
            )
        return lines

    def write_txt(self, path) -> None:
        with open(path, "w") as f:
            f.write("\n".join(self.txt_lines()) + "\n")


def _aligned_mags(
    ref: Waveform, est: Waveform, params: StftParams
) -> tuple[np.ndarray, np.ndarray]:
    if ref.sample_rate != est.sample_rate:
        raise ValueError(
            f"sample rates differ: {ref.sample_rate} vs {est.sample_rate}"
        )
    if abs(len(ref) - len(est)) > params.hop:
        raise ValueError(
            f"length mismatch beyond one hop: {len(ref)} vs {len(est)} samples"
        )
    n = min(len(ref), len(est))
    ref_t = Waveform(ref.samples[:n], ref.sample_rate)
    est_t = Waveform(est.samples[:n], est.sample_rate)
    return stft(ref_t, params).mag, stft(est_t, params).mag


def eval_protocol_bwe(
    ref: Waveform,
    restored: Waveform,
    cutoff_hz: float,
    params: StftParams,
    stem: str = "",
) -> EvalEntry:
    """Full-band metrics plus metrics restricted to the reconstructed band
    (subbands at or above the cutoff)."""
    mag_ref, mag_est = _aligned_mags(ref, restored, params)
    n_keep = cutoff_to_subband(cutoff_hz, params.fft_size, ref.sample_rate)
    if n_keep >= mag_ref.shape[0]:
        raise ValueError(f"cutoff {cutoff_hz} Hz leaves no subbands to evaluate")
    band = np.zeros(mag_ref.shape[0], dtype=bool)
    band[n_keep:] = True
    return EvalEntry(
        stem=stem,
        task="bandwidth_extension",
        cutoff_hz=float(cutoff_hz),
        lsd=lsd(mag_ref, mag_est),
        sispec=sispec(mag_ref, mag_est),
        lsd_masked=lsd(mag_ref, mag_est, subband_mask=band),
        sispec_masked=sispec(mag_ref[band], mag_est[band]),
    )


def eval_protocol_inpaint(
    ref: Waveform,
    restored: Waveform,
    gap_ms: float,
    period_s: float,
    params: StftParams,
    stem: str = "",
) -> EvalEntry:
    """Full metrics plus metrics restricted to the deterministic gap grid
    (one centered gap per full period)."""
    mag_ref, mag_est = _aligned_mags(ref, restored, params)
    n_samples = min(len(ref), len(restored))
    _, frame_iv = inpaint_gap_grid(
        n_samples, ref.sample_rate, gap_ms, period_s, params.hop
    )
    if not frame_iv:
        raise ValueError(
            f"input of {n_samples / ref.sample_rate:.2f}s holds no full "
            f"{period_s}s period"
        )
    frames = np.zeros(mag_ref.shape[1], dtype=bool)
    for w1, w2 in frame_iv:
        frames[w1 : min(w2 + 1, frames.size)] = True
    return EvalEntry(
        stem=stem,
        task="inpainting",
        gap_ms=float(gap_ms),
        period_s=float(period_s),
        n_gaps=len(frame_iv),
        lsd=lsd(mag_ref, mag_est),
        sispec=sispec(mag_ref, mag_est),
        lsd_masked=lsd(mag_ref, mag_est, frame_mask=frames),
        sispec_masked=sispec(mag_ref[:, frames], mag_est[:, frames]),
    )
