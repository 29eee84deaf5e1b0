"""Batch command-line interface.

Commands:
    degrade         apply a deterministic degradation to WAV files
    restore         run the reverse sampler on degraded WAVs (+ sidecars)
    train-toy       train the toy denoiser on the synthetic corpus
    eval            score restored WAVs against references
    roundtrip-check analysis/synthesis numerical self-test

Exit codes: 0 success, 1 usage/configuration error, 2 data error
(missing/corrupt/mismatched files), 3 numerical invariant failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import (
    AudioReadError,
    lowpass_brickwall,
    read_wav,
    resample,
    write_wav,
    zero_intervals,
)
from .bridge import (
    BridgeSchedule,
    DegradationConfig,
    bwe_mask,
    cutoff_to_subband,
    inpaint_gap_grid,
    inpaint_mask,
)
from .checkpoint import load_denoiser_stack, save_checkpoint
from .denoise import OracleDenoiser, partition_intervals
from .metrics import EvalReport, eval_protocol_bwe, eval_protocol_inpaint
from .runconfig import Manifest, RunConfig, stft_from_dict, stft_to_dict
from .sampling import SamplerConfig, plan_windows, restore, restore_long
from .spectral import (
    StftParams,
    bands_2khz,
    factorize,
    istft,
    phase_ortho_error,
    reconstruct,
    stft,
    count_degenerate_phase,
)
from .synthetic import CorpusConfig, generate_corpus
from .training import TrainConfig, train_toy

SIDECAR_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class NumericalCheckError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _collect_wavs(path_str: str) -> list[Path]:
    p = Path(path_str)
    if p.is_file():
        return [p]
    if p.is_dir():
        found = sorted(p.glob("*.wav"))
        if not found:
            raise DataError(f"{p}: directory contains no .wav files")
        return found
    raise DataError(f"{path_str}: no such file or directory")


def _stft_params(args) -> StftParams:
    try:
        return StftParams(
            fft_size=args.fft_size, win_length=args.win_length, hop=args.hop
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_stft_flags(p: argparse.ArgumentParser, fft=2048, win=2048, hop=512) -> None:
    p.add_argument("--fft-size", type=int, default=fft)
    p.add_argument("--win-length", type=int, default=win)
    p.add_argument("--hop", type=int, default=hop)


def _sidecar_path(wav_path: Path) -> Path:
    return wav_path.with_suffix(".mask.json")


def _load_sidecar(path: Path) -> dict:
    if not path.is_file():
        raise DataError(f"{path}: missing degradation sidecar")
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupt sidecar ({exc})") from exc
    if doc.get("schema_version") != SIDECAR_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported sidecar schema")
    return doc


def cmd_degrade(args) -> int:
    params = _stft_params(args)
    if args.task == "bandwidth_extension" and args.cutoff_hz is None:
        raise UsageError("bandwidth_extension requires --cutoff-hz")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.task == "identity":
        return _degrade_identity(args, out_dir, params)
    cfg = RunConfig(
        command="degrade",
        seed=args.seed,
        task=args.task,
        sample_rate=args.sample_rate,
        stft=stft_to_dict(params),
        cutoff_hz=args.cutoff_hz,
        gap_ms=args.gap_ms,
        period_s=args.period_s,
    )
    manifest = Manifest(config=cfg)
    t0 = time.monotonic()
    for wav_path in _collect_wavs(args.input):
        wave = read_wav(wav_path)
        manifest.add_input(wav_path)
        if args.sample_rate is not None and wave.sample_rate != args.sample_rate:
            wave = resample(wave, args.sample_rate)
            manifest.notes.setdefault("resampled", {})[wav_path.name] = {
                "to_hz": args.sample_rate,
                "method": "polyphase_kaiser",
            }
        n = params.fft_size // 2 + 1
        w = params.num_frames(len(wave))
        sidecar: dict = {
            "schema_version": SIDECAR_SCHEMA_VERSION,
            "task": args.task,
            "sample_rate": wave.sample_rate,
            "stft": stft_to_dict(params),
            "n_samples": len(wave),
            "n_subbands": n,
            "n_frames": w,
        }
        if args.task == "bandwidth_extension":
            try:
                n_keep = cutoff_to_subband(
                    args.cutoff_hz, params.fft_size, wave.sample_rate
                )
                mask = bwe_mask((n, w), n_keep)
                out_wave = lowpass_brickwall(wave, args.cutoff_hz)
            except ValueError as exc:
                raise DataError(f"{wav_path.name}: {exc}") from exc
            sidecar["cutoff_hz"] = args.cutoff_hz
            sidecar["cutoff_subband"] = n_keep
        else:
            sample_iv, frame_iv = inpaint_gap_grid(
                len(wave), wave.sample_rate, args.gap_ms, args.period_s, params.hop
            )
            if not frame_iv:
                raise DataError(
                    f"{wav_path.name}: too short for one {args.period_s}s period"
                )
            frame_iv = [(w1, min(w2, w - 1)) for w1, w2 in frame_iv]
            mask = inpaint_mask((n, w), frame_iv)
            out_wave = zero_intervals(wave, sample_iv)
            sidecar["gap_ms"] = args.gap_ms
            sidecar["period_s"] = args.period_s
            sidecar["gaps_frames"] = [list(g) for g in frame_iv]
            sidecar["gaps_samples"] = [list(g) for g in sample_iv]
        out_wav = out_dir / wav_path.name
        write_wav(out_wav, out_wave, bit_depth=args.bit_depth)
        side_path = _sidecar_path(out_wav)
        with open(side_path, "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")
        manifest.add_output(out_wav)
        manifest.add_output(side_path)
        print(f"degraded {wav_path.name}: {mask.n_masked} masked cells")
    manifest.timings_s["total"] = time.monotonic() - t0
    manifest.write(out_dir / "manifest.json")
    return 0


def _degrade_identity(args, out_dir: Path, params: StftParams) -> int:
    """No-op pass-through: outputs are byte copies of the inputs."""
    cfg = RunConfig(
        command="degrade",
        seed=args.seed,
        task="identity",
        sample_rate=args.sample_rate,
        stft=stft_to_dict(params),
    )
    manifest = Manifest(config=cfg)
    t0 = time.monotonic()
    for wav_path in _collect_wavs(args.input):
        read_wav(wav_path)  # still validated as mono audio
        manifest.add_input(wav_path)
        out_wav = out_dir / wav_path.name
        shutil.copyfile(wav_path, out_wav)
        sidecar = {
            "schema_version": SIDECAR_SCHEMA_VERSION,
            "task": "identity",
        }
        side_path = _sidecar_path(out_wav)
        with open(side_path, "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")
        manifest.add_output(out_wav)
        manifest.add_output(side_path)
        print(f"copied {wav_path.name} unchanged")
    manifest.timings_s["total"] = time.monotonic() - t0
    manifest.write(out_dir / "manifest.json")
    return 0


def _phase_stats(x, mask2d, sample_rate) -> dict:
    """Orthogonalization diagnostics on generated cells: how far the raw
    phase pair sits from the unit circle, overall and per 2 kHz band."""
    cos, sin = x.cos_theta, x.sin_theta
    err = phase_ortho_error(cos, sin)
    fft_size = 2 * (x.n_subbands - 1)
    freqs = np.arange(x.n_subbands) * sample_rate / fft_size

    def _stats(vals):
        if vals.size == 0:
            return None
        return {
            "median": float(np.median(vals)),
            "p999": float(np.percentile(vals, 99.9)),
            "max": float(np.max(vals)),
        }

    bands = []
    for lo, hi in bands_2khz(sample_rate):
        sel = (freqs >= lo) & (freqs < hi)
        s = _stats(err[sel][mask2d[sel]])
        if s is not None:
            bands.append({"lo_hz": lo, "hi_hz": hi, **s})
    return {
        "n_degenerate": count_degenerate_phase(cos[mask2d], sin[mask2d]),
        "overall": _stats(err[mask2d]),
        "bands": bands,
    }


def _oracle_ref_for(stem: str, refs: list[Path]) -> Path:
    if len(refs) == 1 and refs[0].is_file():
        return refs[0]
    for p in refs:
        if p.stem == stem:
            return p
    raise DataError(f"{stem}: no matching reference for oracle mode")


def cmd_restore(args) -> int:
    if (args.checkpoint is None) == (args.oracle_ref is None):
        raise UsageError("provide either --checkpoint or --oracle-ref")
    if args.checkpoint is not None:
        try:
            model = load_denoiser_stack(args.checkpoint)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot load checkpoint: {exc}") from exc
        rho = getattr(model, "rho", None) or model.members[0][2].rho  # type: ignore[union-attr]
        oracle_refs = None
    else:
        model = None
        rho = args.rho
        oracle_refs = _collect_wavs(args.oracle_ref)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sampler_cfg = SamplerConfig(
        num_steps=args.steps,
        deterministic=args.deterministic,
        clamp_known_region=not args.no_clamp,
    )
    cfg = RunConfig(
        command="restore",
        seed=args.seed,
        rho=rho,
        beta_max=args.beta_max,
        sigma_fill=args.sigma_fill,
        num_steps=args.steps,
        deterministic=args.deterministic,
        clamp_known_region=not args.no_clamp,
        window_frames=args.window,
        window_hop=args.window_hop,
        checkpoints=[str(c) for c in args.checkpoint or []],
        extra={"oracle_ref": args.oracle_ref} if args.oracle_ref else None,
    )
    manifest = Manifest(config=cfg)
    schedule = BridgeSchedule(beta_max=args.beta_max)
    t_total = time.monotonic()
    wavs = _collect_wavs(args.input)
    for idx, wav_path in enumerate(wavs):
        t0 = time.monotonic()
        wave = read_wav(wav_path)
        manifest.add_input(wav_path)
        sidecar = _load_sidecar(_sidecar_path(wav_path))
        if sidecar.get("task") not in ("bandwidth_extension", "inpainting"):
            raise DataError(
                f"{wav_path.name}: sidecar task {sidecar.get('task')!r} has "
                "no mask to restore"
            )
        if sidecar["sample_rate"] != wave.sample_rate:
            raise DataError(
                f"{wav_path.name}: sample rate {wave.sample_rate} does not "
                f"match sidecar {sidecar['sample_rate']}"
            )
        params = stft_from_dict(sidecar["stft"])
        spec = stft(wave, params)
        n, w = spec.shape
        if (n, w) != (sidecar["n_subbands"], sidecar["n_frames"]):
            raise DataError(
                f"{wav_path.name}: spectrogram {n}x{w} does not match sidecar "
                f"{sidecar['n_subbands']}x{sidecar['n_frames']}"
            )
        if sidecar["task"] == "bandwidth_extension":
            mask = bwe_mask((n, w), int(sidecar["cutoff_subband"]))
        else:
            mask = inpaint_mask((n, w), [tuple(g) for g in sidecar["gaps_frames"]])
        if model is None:
            ref_path = _oracle_ref_for(wav_path.stem, oracle_refs)
            ref_wave = read_wav(ref_path)
            manifest.add_input(ref_path)
            if ref_wave.sample_rate != wave.sample_rate or len(ref_wave) != len(wave):
                raise DataError(
                    f"{wav_path.name}: oracle reference shape mismatch "
                    f"({len(ref_wave)}@{ref_wave.sample_rate} vs "
                    f"{len(wave)}@{wave.sample_rate})"
                )
            denoiser = OracleDenoiser(factorize(stft(ref_wave, params), rho=rho), schedule)
        else:
            denoiser = model
        x1 = factorize(spec, rho=rho)
        rng = np.random.default_rng([args.seed, idx])
        fill = args.sigma_fill * rng.standard_normal(x1.data.shape)
        x1.data[mask.mask] = fill[mask.mask]
        win = args.window or denoiser.window_frames or w
        win = min(win, w)
        hop = args.window_hop or max(1, win // 2)
        plan = plan_windows(w, win, hop)
        if w <= win:
            result = restore(x1, mask, denoiser, sampler_cfg, rng, schedule)
            mode = "direct"
        else:
            result = restore_long(x1, mask, denoiser, sampler_cfg, plan, rng, schedule)
            mode = "tiled"
        stats = _phase_stats(result, mask.mask[..., 1], wave.sample_rate)
        out_wave = istft(reconstruct(result, orthogonalize=True), params, len(wave))
        out_wav = out_dir / wav_path.name
        write_wav(out_wav, out_wave, bit_depth=args.bit_depth)
        manifest.add_output(out_wav)
        manifest.notes[wav_path.name] = {
            "mode": mode,
            "window_plan": {
                "window": plan.window,
                "hop": plan.hop,
                "offsets": list(plan.offsets),
                "pad": plan.pad,
            },
            "phase_ortho": stats,
        }
        manifest.timings_s[wav_path.name] = time.monotonic() - t0
        overall = stats["overall"] or {"median": 0.0, "p999": 0.0, "max": 0.0}
        print(
            f"restored {wav_path.name} [{mode}, {len(plan.offsets)} window(s)] "
            f"phase-ortho err median={overall['median']:.3e} "
            f"p99.9={overall['p999']:.3e} max={overall['max']:.3e}"
        )
    manifest.timings_s["total"] = time.monotonic() - t_total
    manifest.write(out_dir / "manifest.json")
    return 0


def _part_path(out_path: Path, i: int) -> Path:
    return out_path.with_name(f"{out_path.stem}.part{i + 1}{out_path.suffix}")


def cmd_train_toy(args) -> int:
    params = _stft_params(args)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if args.partitions < 1:
        raise UsageError("--partitions must be at least 1")
    if args.partitions > 1 and (args.t_lo, args.t_hi) != (0.0, 1.0):
        raise UsageError("--partitions and --t-lo/--t-hi are mutually exclusive")
    degradation = DegradationConfig(
        sample_rate=args.sample_rate,
        sigma_fill=args.sigma_fill,
        task=args.task,
        bwe_min_hz=args.bwe_min_hz,
        gap_min_s=args.gap_min_s,
        gap_max_s=args.gap_max_s,
    )
    cfg = RunConfig(
        command="train-toy",
        seed=args.seed,
        task=args.task,
        sample_rate=args.sample_rate,
        stft=stft_to_dict(params),
        rho=args.rho,
        beta_max=args.beta_max,
        sigma_fill=args.sigma_fill,
        window_frames=args.window,
        extra={
            "steps": args.steps,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "channels": args.channels,
            "blocks": args.blocks,
            "segments": args.segments,
            "corpus_dir": args.corpus_dir,
            "partitions": args.partitions,
            "t_interval": [args.t_lo, args.t_hi],
            "bwe_min_hz": args.bwe_min_hz,
            "gap_range_s": [args.gap_min_s, args.gap_max_s],
        },
    )
    manifest = Manifest(config=cfg)
    t0 = time.monotonic()
    if args.corpus_dir is not None:
        corpus = []
        for wav_path in _collect_wavs(args.corpus_dir):
            wave = read_wav(wav_path)
            manifest.add_input(wav_path)
            if wave.sample_rate != args.sample_rate:
                wave = resample(wave, args.sample_rate)
            corpus.append(wave)
    else:
        corpus_cfg = CorpusConfig(
            sample_rate=args.sample_rate,
            n_segments=args.segments,
            seg_seconds=args.seg_seconds,
            seed=args.seed,
        )
        corpus = generate_corpus(corpus_cfg)
    dataset = [factorize(stft(wv, params), rho=args.rho) for wv in corpus]
    manifest.timings_s["corpus"] = time.monotonic() - t0
    schedule = BridgeSchedule(beta_max=args.beta_max)
    if args.partitions > 1:
        intervals = partition_intervals(args.partitions, args.beta_max)
    else:
        intervals = [(args.t_lo, args.t_hi)]
    for i, interval in enumerate(intervals):
        train_cfg = TrainConfig(
            steps=args.steps,
            batch_size=args.batch_size,
            lr=args.lr,
            seed=args.seed,
            channels=args.channels,
            blocks=args.blocks,
            window_frames=args.window,
            t_interval=interval,
            freq_loss_mask=args.freq_loss_mask,
        )
        t1 = time.monotonic()
        model, history = train_toy(
            dataset, train_cfg, degradation, params, schedule, progress=True
        )
        ckpt = out_path if len(intervals) == 1 else _part_path(out_path, i)
        manifest.timings_s[f"train/{ckpt.name}"] = time.monotonic() - t1
        save_checkpoint(ckpt, model)
        manifest.add_output(ckpt)
        loss_path = ckpt.with_suffix(".loss.csv")
        with open(loss_path, "w") as f:
            f.write("step,loss\n")
            for j, v in enumerate(history):
                f.write(f"{j},{v:.6f}\n")
        manifest.add_output(loss_path)
        manifest.notes[ckpt.name] = {
            "parameters": model.parameter_count(),
            "t_interval": list(interval),
            "final_loss": history[-1] if history else None,
        }
        print(
            f"trained {ckpt.name}: {model.parameter_count()} parameters, "
            f"t in ({interval[0]:.4f}, {interval[1]:.4f}], "
            f"final loss {history[-1]:.4f}"
            if history
            else f"{ckpt.name}: no training steps ran"
        )
    manifest.write(out_path.with_suffix(".manifest.json"))
    return 0


def cmd_eval(args) -> int:
    params = _stft_params(args)
    if args.task == "bandwidth_extension" and not args.cutoff_hz:
        raise UsageError("bandwidth_extension requires --cutoff-hz")
    ref_wavs = {p.stem: p for p in _collect_wavs(args.ref)}
    est_wavs = {p.stem: p for p in _collect_wavs(args.est)}
    skipped = sorted(set(ref_wavs) ^ set(est_wavs))
    stems = sorted(set(ref_wavs) & set(est_wavs))
    for stem in skipped:
        side = "restored" if stem in ref_wavs else "reference"
        print(f"skipping {stem}: no {side} counterpart", file=sys.stderr)
    if not stems:
        raise DataError("no common stems between ref and est")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.task == "bandwidth_extension":
        sections = [
            EvalReport(task=args.task) for _ in args.cutoff_hz
        ]
    else:
        sections = [EvalReport(task=args.task)]
    cfg = RunConfig(
        command="eval",
        seed=args.seed,
        task=args.task,
        stft=stft_to_dict(params),
        gap_ms=args.gap_ms,
        period_s=args.period_s,
        extra={"cutoffs_hz": args.cutoff_hz} if args.cutoff_hz else None,
    )
    manifest = Manifest(config=cfg)
    t0 = time.monotonic()
    for stem in stems:
        ref = read_wav(ref_wavs[stem])
        est = read_wav(est_wavs[stem])
        manifest.add_input(ref_wavs[stem])
        try:
            if args.task == "bandwidth_extension":
                for cutoff, report in zip(args.cutoff_hz, sections):
                    report.entries.append(
                        eval_protocol_bwe(ref, est, cutoff, params, stem=stem)
                    )
            else:
                sections[0].entries.append(
                    eval_protocol_inpaint(
                        ref, est, args.gap_ms, args.period_s, params, stem=stem
                    )
                )
        except ValueError as exc:
            raise DataError(f"{stem}: {exc}") from exc
    json_path = out_dir / "report.json"
    txt_path = out_dir / "report.txt"
    _write_eval_outputs(args, sections, skipped, json_path, txt_path)
    manifest.add_output(json_path)
    manifest.add_output(txt_path)
    manifest.timings_s["total"] = time.monotonic() - t0
    manifest.write(out_dir / "manifest.json")
    for label, report in _eval_section_labels(args, sections):
        agg = report.aggregate()
        print(
            f"{label}{len(report.entries)} pair(s): "
            f"lsd={agg['mean_lsd']:.4f} sispec={agg['mean_sispec']:.2f}dB "
            f"lsd_masked={agg['mean_lsd_masked']:.4f} "
            f"sispec_masked={agg['mean_sispec_masked']:.2f}dB"
        )
    if skipped:
        print(f"{len(skipped)} unmatched stem(s) skipped", file=sys.stderr)
        return 2
    return 0


def _eval_section_labels(args, sections):
    if args.task == "bandwidth_extension" and len(sections) > 1:
        return [
            (f"cutoff {c:.0f} Hz: ", r) for c, r in zip(args.cutoff_hz, sections)
        ]
    return [("", r) for r in sections]


def _write_eval_outputs(args, sections, skipped, json_path, txt_path) -> None:
    if args.task == "bandwidth_extension":
        blocks = [
            {"cutoff_hz": c, **r.to_dict()}
            for c, r in zip(args.cutoff_hz, sections)
        ]
    else:
        blocks = [
            {"gap_ms": args.gap_ms, "period_s": args.period_s, **sections[0].to_dict()}
        ]
    doc = {
        "schema_version": 1,
        "task": args.task,
        "skipped_stems": skipped,
        "sections": blocks,
    }
    with open(json_path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    lines = []
    for label, report in _eval_section_labels(args, sections):
        if label:
            lines.append(f"== {label.rstrip(': ')} ==")
        lines.extend(report.txt_lines())
    if skipped:
        lines.append("skipped stems: " + ", ".join(skipped))
    with open(txt_path, "w") as f:
        f.write("\n".join(lines) + "\n")


def cmd_roundtrip_check(args) -> int:
    params = _stft_params(args)
    worst_wave = 0.0
    for wav_path in _collect_wavs(args.input):
        wave = read_wav(wav_path)
        spec = stft(wave, params)
        stft_err = float(
            np.max(np.abs(istft(spec, params, len(wave)).samples - wave.samples))
        )
        x = factorize(spec, rho=args.rho)
        back = reconstruct(x, orthogonalize=True)
        fact_err = float(np.max(np.abs(back.data - spec.data)))
        out = istft(back, params, len(wave))
        wave_err = float(np.max(np.abs(out.samples - wave.samples)))
        worst_wave = max(worst_wave, wave_err)
        resid = phase_ortho_error(x.cos_theta, x.sin_theta)
        print(
            f"{wav_path.name}: stft roundtrip {stft_err:.3e}, factorization "
            f"roundtrip {fact_err:.3e}, full chain {wave_err:.3e}"
        )
        print(
            f"  phase residual median={np.median(resid):.3e} "
            f"p99.9={np.percentile(resid, 99.9):.3e} max={np.max(resid):.3e}"
        )
    if worst_wave > args.tol:
        raise NumericalCheckError(
            f"roundtrip waveform error {worst_wave:.3e} exceeds tolerance "
            f"{args.tol:.1e}"
        )
    print(f"roundtrip OK (worst waveform err {worst_wave:.3e} <= {args.tol:.1e})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specbridge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("degrade", help="apply deterministic degradations")
    p.add_argument("--input", required=True, help="WAV file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--task",
        required=True,
        choices=["bandwidth_extension", "inpainting", "identity"],
    )
    p.add_argument("--cutoff-hz", type=float, default=None)
    p.add_argument("--gap-ms", type=float, default=300.0)
    p.add_argument("--period-s", type=float, default=5.0)
    p.add_argument("--sample-rate", type=int, default=None,
                   help="resample inputs to this rate first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", choices=["float32", "float64", "pcm16"], default="float32")
    _add_stft_flags(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("restore", help="reverse-sample degraded audio")
    p.add_argument("--input", required=True, help="degraded WAV file or directory")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--checkpoint",
        action="append",
        default=None,
        help="toy checkpoint (repeat for a t-partitioned stack)",
    )
    p.add_argument("--oracle-ref", default=None,
                   help="clean reference WAV/dir enabling the analytic "
                        "denoiser instead of a checkpoint")
    p.add_argument("--rho", type=float, default=0.25,
                   help="compression exponent (oracle mode; checkpoints "
                        "carry their own)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-fill", type=float, default=1.0)
    p.add_argument("--beta-max", type=float, default=1.0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--no-clamp", action="store_true",
                   help="do not pin known cells after each step")
    p.add_argument("--window", type=int, default=None,
                   help="tile width in frames (default: model window)")
    p.add_argument("--window-hop", type=int, default=None,
                   help="tile hop in frames (default: window // 2)")
    p.add_argument("--bit-depth", choices=["float32", "float64", "pcm16"], default="float32")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("train-toy", help="train the toy denoiser (desk scale)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segments", type=int, default=512)
    p.add_argument("--seg-seconds", type=float, default=1.024)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--blocks", type=int, default=7)
    p.add_argument("--window", type=int, default=64, help="training frames")
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--beta-max", type=float, default=1.0)
    p.add_argument("--sigma-fill", type=float, default=1.0)
    p.add_argument(
        "--task",
        choices=["both", "bandwidth_extension", "inpainting"],
        default="both",
    )
    p.add_argument("--bwe-min-hz", type=float, default=1000.0)
    p.add_argument("--gap-min-s", type=float, default=0.1)
    p.add_argument("--gap-max-s", type=float, default=0.5)
    p.add_argument("--t-lo", type=float, default=0.0,
                   help="lower edge of the trained t interval (exclusive)")
    p.add_argument("--t-hi", type=float, default=1.0)
    p.add_argument("--partitions", type=int, default=1,
                   help="train one specialist per equal-variance t interval")
    p.add_argument("--corpus-dir", default=None,
                   help="train on WAV files from this directory instead of "
                        "the synthetic corpus")
    p.add_argument("--freq-loss-mask", action="store_true",
                   help="restrict the loss to each segment's active band")
    _add_stft_flags(p, fft=256, win=256, hop=128)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("eval", help="score restored audio against references")
    p.add_argument("--ref", required=True, help="reference WAV file or directory")
    p.add_argument("--est", required=True, help="restored WAV file or directory")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--task",
        required=True,
        choices=["bandwidth_extension", "inpainting"],
    )
    p.add_argument("--cutoff-hz", type=float, action="append", default=None,
                   help="BWE evaluation cutoff; repeat for one report "
                        "section per cutoff")
    p.add_argument("--gap-ms", type=float, default=300.0)
    p.add_argument("--period-s", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    _add_stft_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roundtrip-check", help="analysis/synthesis self-test")
    p.add_argument("--input", required=True)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--tol", type=float, default=1e-4)
    _add_stft_flags(p)
    p.set_defaults(func=cmd_roundtrip_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (AudioReadError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalCheckError as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
