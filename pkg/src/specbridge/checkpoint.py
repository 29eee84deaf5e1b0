"""Deterministic checkpoint container for toy denoisers.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header
(format version, model metadata, tensor directory), then the raw
little-endian C-order tensor bytes back to back. Unlike zip-based formats
the container embeds no timestamps, so identical models serialize to
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .denoise import PartitionRouter, ToyDenoiser, ToyDenoiserNet
from .spectral import StftParams

MAGIC = b"SBCKPT01"
FORMAT_VERSION = 1


def save_checkpoint(path, model: ToyDenoiser) -> None:
    tensors = []
    blobs = []
    offset = 0
    state = model.net.state_dict()
    for name in sorted(state):
        arr = state[name].detach().cpu().numpy()
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        raw = np.ascontiguousarray(arr).tobytes()
        tensors.append(
            {
                "name": name,
                "dtype": "float32",
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "model": {
            "n_subbands": model.net.n_subbands,
            "channels": model.net.channels,
            "blocks": len(model.net.blocks),
            "emb_dim": model.net.emb_dim,
            "rho": model.rho,
            "beta_max": model.beta_max,
            "window_frames": model.window_frames,
            "t_interval": list(model.t_interval),
            "sample_rate": model.sample_rate,
            "stft": {
                "fft_size": model.stft_params.fft_size,
                "win_length": model.stft_params.win_length,
                "hop": model.stft_params.hop,
                "window": model.stft_params.window,
            },
        },
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint64(len(head)).tobytes())
        f.write(head)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path) -> ToyDenoiser:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (head_len,) = np.frombuffer(f.read(8), dtype=np.uint64)
        header = json.loads(f.read(int(head_len)).decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint format version "
                f"{header.get('format_version')}"
            )
        payload = f.read()
    meta = header["model"]
    net = ToyDenoiserNet(
        n_subbands=meta["n_subbands"],
        channels=meta["channels"],
        blocks=meta["blocks"],
        emb_dim=meta["emb_dim"],
    )
    state = {}
    for entry in header["tensors"]:
        start = entry["offset"]
        raw = payload[start : start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.copy())
    net.load_state_dict(state)
    s = meta["stft"]
    return ToyDenoiser(
        net=net,
        stft_params=StftParams(
            fft_size=s["fft_size"],
            win_length=s["win_length"],
            hop=s["hop"],
            window=s["window"],
        ),
        rho=meta["rho"],
        beta_max=meta["beta_max"],
        window_frames=meta["window_frames"],
        t_interval=tuple(meta["t_interval"]),
        sample_rate=meta["sample_rate"],
    )


def load_denoiser_stack(paths):
    """One checkpoint -> the model itself; several -> a PartitionRouter over
    their (disjoint, covering) t intervals."""
    models = [load_checkpoint(p) for p in paths]
    if not models:
        raise ValueError("no checkpoints given")
    if len(models) == 1:
        return models[0]
    return PartitionRouter([(m.t_interval[0], m.t_interval[1], m) for m in models])
