"""Run configuration echo and manifest writing for the CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .spectral import StftParams

MANIFEST_SCHEMA_VERSION = 1


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def stft_to_dict(p: StftParams) -> dict:
    return {
        "fft_size": p.fft_size,
        "win_length": p.win_length,
        "hop": p.hop,
        "window": p.window,
    }


def stft_from_dict(d: dict) -> StftParams:
    return StftParams(
        fft_size=int(d["fft_size"]),
        win_length=int(d["win_length"]),
        hop=int(d["hop"]),
        window=d.get("window", "hann"),
    )


@dataclass
class RunConfig:
    """Full parameterization of a CLI run, echoed verbatim into manifests."""

    command: str
    seed: int = 0
    task: str | None = None
    sample_rate: int | None = None
    stft: dict | None = None
    rho: float | None = None
    beta_max: float | None = None
    sigma_fill: float | None = None
    num_steps: int | None = None
    deterministic: bool | None = None
    clamp_known_region: bool | None = None
    window_frames: int | None = None
    window_hop: int | None = None
    cutoff_hz: float | None = None
    gap_ms: float | None = None
    period_s: float | None = None
    checkpoints: list[str] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["extra"]:
            d.pop("extra")
        return {k: v for k, v in d.items() if v is not None}


@dataclass
class Manifest:
    """Run record written next to every command's outputs. Carries
    wall-clock timings, so manifests are not expected to be byte-identical
    across runs (the data products are)."""

    config: RunConfig
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timings_s: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add_input(self, path) -> None:
        self.inputs[Path(path).name] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[Path(path).name] = sha256_file(path)

    def write(self, path) -> None:
        doc = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "tool_version": __version__,
            "config": self.config.to_dict(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_s": {k: round(v, 4) for k, v in self.timings_s.items()},
            "notes": self.notes,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
