"""Denoisers: the analytic oracle, the trainable toy network, and the
noise-level partition router that dispatches between specialists.

Every denoiser predicts the normalized displacement
``eps = (x_t - x0) / sigma(t)`` from the noisy tensor ``x_t`` and the time
``t``; the sampler folds that back into an x0 estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn as nn

from .bridge import BridgeSchedule
from .spectral import FactorizedSpec, StftParams


@runtime_checkable
class Denoiser(Protocol):
    """Minimal contract the sampler relies on."""

    window_frames: int | None

    def evaluate(self, x_t: FactorizedSpec, t: float) -> FactorizedSpec:
        ...


def _check_t(t: float) -> float:
    if not 0.0 < t <= 1.0:
        raise ValueError(f"denoiser time must lie in (0, 1], got {t}")
    return float(t)


class OracleDenoiser:
    """Analytic denoiser with access to the clean reference: returns the
    exact displacement (x_t - x0) / sigma(t). Used to exercise the sampler
    without any learned model."""

    def __init__(self, x0_ref: FactorizedSpec, schedule: BridgeSchedule | None = None):
        self.x0_ref = x0_ref
        self.schedule = schedule or BridgeSchedule()
        self.window_frames: int | None = None

    def evaluate(self, x_t: FactorizedSpec, t: float) -> FactorizedSpec:
        return self.evaluate_window(x_t, t, offset=0)

    def evaluate_window(self, x_t: FactorizedSpec, t: float, offset: int) -> FactorizedSpec:
        """Evaluate on a frame-window crop starting at ``offset`` (frames past
        the reference width wrap cyclically, matching the tiling padder)."""
        t = _check_t(t)
        w = x_t.n_frames
        full = self.x0_ref.n_frames
        idx = (offset + np.arange(w)) % full
        ref = self.x0_ref.data[:, idx, :]
        if ref.shape != x_t.data.shape:
            raise ValueError(
                f"window shape {x_t.data.shape} incompatible with reference "
                f"{self.x0_ref.data.shape}"
            )
        sig = float(self.schedule.sigma(t))
        return FactorizedSpec(
            (x_t.data - ref) / sig, rho=x_t.rho, sample_rate=x_t.sample_rate
        )


def sinusoidal_time_embedding(t: torch.Tensor, dim: int = 128) -> torch.Tensor:
    """Continuous-time sinusoidal features, shape (batch, dim)."""
    half = dim // 2
    freqs = torch.exp(
        torch.linspace(
            math.log(1.0), math.log(1000.0), half, dtype=t.dtype, device=t.device
        )
    )
    ang = 2.0 * math.pi * t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)


class _ResBlock(nn.Module):
    """Dilated residual conv block with a per-channel time-embedding bias.

    No normalization layers: keeping the block purely convolutional preserves
    equivariance to time-frame shifts.
    """

    def __init__(self, channels: int, dilation: tuple[int, int], emb_dim: int):
        super().__init__()
        df, dt = dilation
        self.conv1 = nn.Conv2d(
            channels, channels, 3, padding=(df, dt), dilation=(df, dt)
        )
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.emb_proj = nn.Linear(emb_dim, channels)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, h: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        y = self.conv1(h)
        y = y + self.emb_proj(emb)[:, :, None, None]
        y = torch.nn.functional.silu(y)
        y = self.conv2(y)
        return h + y


def _dilation_schedule(n_subbands: int, blocks: int) -> list[tuple[int, int]]:
    """(freq, time) dilations whose stacked receptive field spans the whole
    subband axis and a generous time context."""
    freq: list[int] = []
    d = 1
    while sum(freq) < (n_subbands - 1) // 2 and len(freq) < blocks:
        freq.append(d)
        d *= 2
    while len(freq) < blocks:
        freq.append(1)
    time = [1, 1, 2, 4, 8, 8, 4, 2, 1, 1][:blocks]
    while len(time) < blocks:
        time.append(1)
    return list(zip(freq, time))


class ToyDenoiserNet(nn.Module):
    """Small dilated CNN over the 3-channel factorized tensor plus a static
    normalized-frequency channel, conditioned on t via sinusoidal embeddings."""

    def __init__(
        self,
        n_subbands: int,
        channels: int = 32,
        blocks: int = 7,
        emb_dim: int = 128,
    ):
        super().__init__()
        self.n_subbands = n_subbands
        self.channels = channels
        self.emb_dim = emb_dim
        self.conv_in = nn.Conv2d(4, channels, 3, padding=1)
        self.blocks = nn.ModuleList(
            _ResBlock(channels, dil, emb_dim)
            for dil in _dilation_schedule(n_subbands, blocks)
        )
        self.emb_mlp = nn.Sequential(
            nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
        )
        self.conv_out = nn.Conv2d(channels, 3, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        # x: (B, 3, N, W); t: (B,)
        b, _, n, w = x.shape
        if n != self.n_subbands:
            raise ValueError(f"expected {self.n_subbands} subbands, got {n}")
        freq = torch.linspace(0.0, 1.0, n, dtype=x.dtype, device=x.device)
        freq = freq[None, None, :, None].expand(b, 1, n, w)
        h = self.conv_in(torch.cat([x, freq], dim=1))
        emb = self.emb_mlp(sinusoidal_time_embedding(t, self.emb_dim))
        for block in self.blocks:
            h = block(h, emb)
        return self.conv_out(h)


@dataclass
class ToyDenoiser:
    """Trained (or freshly initialized) toy network plus the metadata needed
    to reuse it: STFT convention, compression exponent, schedule, window
    width, and the time interval it was trained for."""

    net: ToyDenoiserNet
    stft_params: StftParams
    rho: float = 0.25
    beta_max: float = 1.0
    window_frames: int | None = 64
    t_interval: tuple[float, float] = (0.0, 1.0)
    sample_rate: int = 44100

    def __post_init__(self) -> None:
        lo, hi = self.t_interval
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"bad t interval {self.t_interval}")
        self.net.eval()

    @property
    def dtype(self) -> torch.dtype:
        return next(self.net.parameters()).dtype

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.net.parameters())

    def evaluate(self, x_t: FactorizedSpec, t: float) -> FactorizedSpec:
        t = _check_t(t)
        with torch.no_grad():
            xt = torch.from_numpy(np.ascontiguousarray(x_t.data.transpose(2, 0, 1)))
            xt = xt.to(self.dtype)[None]
            tv = torch.full((1,), t, dtype=self.dtype)
            out = self.net(xt, tv)[0]
        data = out.double().numpy().transpose(1, 2, 0)
        return FactorizedSpec(data, rho=x_t.rho, sample_rate=x_t.sample_rate)

    def evaluate_window(self, x_t: FactorizedSpec, t: float, offset: int) -> FactorizedSpec:
        return self.evaluate(x_t, t)


class PartitionRouter:
    """Dispatch to time-range specialists over half-open intervals (lo, hi].

    Intervals must be contiguous and cover (0, 1]; a boundary value routes to
    the lower interval (the one whose ``hi`` equals it).
    """

    def __init__(self, members: "list[tuple[float, float, Denoiser]]"):
        if not members:
            raise ValueError("router needs at least one member")
        members = sorted(members, key=lambda m: m[0])
        lo0, _, _ = members[0]
        if lo0 != 0.0:
            raise ValueError("first interval must start at 0")
        prev_hi = 0.0
        for lo, hi, _ in members:
            if lo != prev_hi:
                raise ValueError(f"intervals not contiguous at {lo} (expected {prev_hi})")
            if not lo < hi <= 1.0:
                raise ValueError(f"bad interval ({lo}, {hi}]")
            prev_hi = hi
        if prev_hi != 1.0:
            raise ValueError("intervals must cover (0, 1]")
        self.members = members
        windows = [d.window_frames for _, _, d in members]
        self.window_frames: int | None = (
            None if all(w is None for w in windows)
            else min(w for w in windows if w is not None)
        )

    def route(self, t: float) -> Denoiser:
        t = _check_t(t)
        for lo, hi, d in self.members:
            if t <= hi:
                return d
        raise AssertionError("unreachable: intervals cover (0, 1]")

    def evaluate(self, x_t: FactorizedSpec, t: float) -> FactorizedSpec:
        return self.route(t).evaluate(x_t, t)

    def evaluate_window(self, x_t: FactorizedSpec, t: float, offset: int) -> FactorizedSpec:
        d = self.route(t)
        if hasattr(d, "evaluate_window"):
            return d.evaluate_window(x_t, t, offset)
        return d.evaluate(x_t, t)


def partition_intervals(n_parts: int, beta_max: float = 1.0) -> "list[tuple[float, float]]":
    """Split (0, 1] into ``n_parts`` intervals holding equal shares of the
    accumulated variance sigma2. For two parts the boundary is 1/2; for four
    parts the first boundary is 2 ** (-4/3)."""
    if n_parts < 1:
        raise ValueError("need at least one part")
    sched = BridgeSchedule(beta_max=beta_max)
    total = sched.terminal_sigma2()
    bounds = [0.0]
    for k in range(1, n_parts):
        bounds.append(float(sched.sigma2_inverse(total * k / n_parts)))
    bounds.append(1.0)
    return list(zip(bounds[:-1], bounds[1:]))
