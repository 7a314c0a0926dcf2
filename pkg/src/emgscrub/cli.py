"""Command-line pipeline: synth | train | denoise | eval | report.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 data validation,
5 non-finite training loss, 6 checkpoint mismatch.

Config precedence is flags > config file (--config, TOML or JSON) > builtin
defaults. A config file holds flag names with dashes turned into
underscores, optionally nested under a section named after the subcommand:

    epochs = 40
    [train]
    batch_size = 32

EMGSCRUB_THREADS (if set) caps worker counts; every compute path here is
deliberately single-threaded so results never depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    CSV_FORMAT,
    RAW_F32,
    ContaminatedCorpus,
    Corpus,
    CorruptCorpusError,
    DataValidationError,
    SplitPlan,
    derive_seed,
    expand_corpus,
    generate_contaminated,
    load_contaminated,
    load_corpus,
    save_contaminated,
    save_corpus,
    split_corpus,
    stratified_subset,
)
from .signal_core import Segment, SegmentKind

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NONFINITE = 5
EXIT_CHECKPOINT = 6

PROFILES = {
    "desk": {"epochs": 20, "batch_size": 16, "pairs": 500},
    "full": {"epochs": 100, "batch_size": 64, "pairs": 0},
}


class BadArguments(Exception):
    """Invalid flag/config combination (exit 2)."""


def _load_config_file(path: str | None, subcommand: str) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix.lower() == ".json":
        cfg = json.loads(text)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        cfg = tomllib.loads(text)
    if not isinstance(cfg, dict):
        raise BadArguments(f"config file {p} must hold a table/object at top level")
    section = cfg.get(subcommand)
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    if isinstance(section, dict):
        flat.update(section)
    return flat


class _Resolver:
    """flags > config file > defaults, with type coercion via the default."""

    def __init__(self, args: argparse.Namespace, file_cfg: dict):
        self.args = args
        self.file_cfg = file_cfg

    def get(self, name: str, default):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        if name in self.file_cfg:
            value = self.file_cfg[name]
            if default is not None and value is not None:
                try:
                    value = type(default)(value)
                except (TypeError, ValueError) as e:
                    raise BadArguments(f"config key {name}: {e}") from e
            return value
        return default


def _threads_env() -> int | None:
    raw = os.environ.get("EMGSCRUB_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError as e:
        raise BadArguments(f"EMGSCRUB_THREADS must be an integer, got {raw!r}") from e
    if n < 1:
        raise BadArguments(f"EMGSCRUB_THREADS must be >= 1, got {n}")
    return n


def _write_run_manifest(out_dir: Path, subcommand: str, config: dict, inputs: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "threads_cap": _threads_env(),
        "config": config,
        "inputs": inputs,
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _load_split(data_dir: Path, split: str) -> tuple[ContaminatedCorpus, Corpus]:
    split_dir = data_dir / split
    cc = load_contaminated(split_dir)
    clean = load_corpus(split_dir / "clean.f32", RAW_F32, SegmentKind.CLEAN_EEG)
    return cc, clean


# --------------------------------------------------------------- synth ----

def cmd_synth(args: argparse.Namespace) -> int:
    cfg_file = _load_config_file(args.config, "synth")
    r = _Resolver(args, cfg_file)
    snr_min = r.get("snr_min", -7)
    snr_max = r.get("snr_max", 2)
    expand = r.get("expand", 5598)
    train_count = r.get("train", 5000)
    test_count = r.get("test", 598)
    fmt = r.get("format", "raw")
    shuffle = not r.get("no_shuffle", False)
    seed = args.seed

    if snr_min > snr_max:
        raise BadArguments(f"--snr-min {snr_min} exceeds --snr-max {snr_max}")
    if fmt not in ("raw", "csv"):
        raise BadArguments(f"--format must be raw or csv, got {fmt!r}")
    corpus_fmt = RAW_F32 if fmt == "raw" else CSV_FORMAT
    levels = list(range(snr_min, snr_max + 1))

    eeg = load_corpus(args.eeg, corpus_fmt, SegmentKind.CLEAN_EEG)
    emg = load_corpus(args.emg, corpus_fmt, SegmentKind.EMG)
    print(f"loaded {eeg.count} clean segments, {emg.count} noise segments")

    eeg = expand_corpus(eeg, expand, derive_seed(seed, "expand-eeg"))
    emg = expand_corpus(emg, expand, derive_seed(seed, "expand-emg"))

    plan_eeg = SplitPlan(train_count, test_count, derive_seed(seed, "split-eeg"), shuffle)
    plan_emg = SplitPlan(train_count, test_count, derive_seed(seed, "split-emg"), shuffle)
    eeg_train, eeg_test = split_corpus(eeg, plan_eeg)
    emg_train, emg_test = split_corpus(emg, plan_emg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    totals = 0
    for split, eeg_c, emg_c in (
        ("train", eeg_train, emg_train),
        ("test", eeg_test, emg_test),
    ):
        cc = generate_contaminated(
            eeg_c,
            emg_c,
            levels,
            derive_seed(seed, f"mix-{split}"),
            split=split,
            level_bounds=None if args.unbounded_snr else (-7, 2),
        )
        split_dir = out / split
        manifest = save_contaminated(cc, split_dir)
        save_corpus(eeg_c, split_dir / "clean.f32")
        save_corpus(emg_c, split_dir / "emg.f32")
        totals += cc.count
        print(f"{split}: {cc.count} records ({eeg_c.count} pairs x {len(levels)} levels)")
        inputs[f"{split}_checksum"] = manifest["checksum_sha256"]

    inputs["eeg"] = str(args.eeg)
    inputs["emg"] = str(args.emg)
    config = {
        "seed": seed,
        "snr_min": snr_min,
        "snr_max": snr_max,
        "expand": expand,
        "train": train_count,
        "test": test_count,
        "format": fmt,
        "shuffle": shuffle,
    }
    _write_run_manifest(out, "synth", config, inputs)
    print(f"total: {totals} contaminated records -> {out}")
    return EXIT_OK


# --------------------------------------------------------------- train ----

def cmd_train(args: argparse.Namespace) -> int:
    from .gan import TrainConfig, paired_images_from, save_checkpoint, train, write_loss_csv
    from .report import render_loss_curves

    cfg_file = _load_config_file(args.config, "train")
    r = _Resolver(args, cfg_file)
    profile = r.get("profile", "desk")
    if profile not in PROFILES:
        raise BadArguments(f"--profile must be one of {sorted(PROFILES)}, got {profile!r}")
    prof = PROFILES[profile]

    epochs = r.get("epochs", prof["epochs"])
    batch = r.get("batch", prof["batch_size"])
    pairs = r.get("pairs", prof["pairs"])
    l1_weight = r.get("l1_weight", 100.0)
    lr = r.get("lr", 2e-4)
    dropout = r.get("dropout", 0.5)
    base_channels = r.get("base_channels", 64)
    resnet_blocks = r.get("resnet_blocks", 6)
    patch_head = bool(r.get("patch_head", False))
    seed = args.seed

    try:
        cfg = TrainConfig(
            l1_weight=l1_weight,
            learning_rate=lr,
            batch_size=batch,
            epochs=epochs,
            seed=seed,
            dropout=dropout,
            base_channels=base_channels,
            n_resnet_blocks=resnet_blocks,
            patch_head=patch_head,
        )
    except ValueError as e:
        raise BadArguments(str(e)) from e

    data_dir = Path(args.data)
    cc, clean = _load_split(data_dir, "train")
    if pairs:
        cc = stratified_subset(cc, pairs)
    print(f"training on {cc.count} records ({profile} profile, {epochs} epochs)")

    images = paired_images_from(cc, clean)

    def progress(stats):
        print(
            f"epoch {stats.epoch + 1}/{epochs}: loss_d={stats.loss_d:.4f} "
            f"loss_g_adv={stats.loss_g_adv:.4f} l1={stats.l1:.4f}"
        )

    t0 = time.time()
    ckpt, history = train(images, cfg, callback=progress)
    print(f"trained in {time.time() - t0:.0f}s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out / "model.ckpt")
    write_loss_csv(history, out / "losses.csv")
    render_loss_curves(history, out / "losses.svg")
    config = {
        "seed": seed,
        "profile": profile,
        "epochs": epochs,
        "batch_size": batch,
        "pairs": pairs,
        "l1_weight": l1_weight,
        "lr": lr,
        "dropout": dropout,
        "base_channels": base_channels,
        "resnet_blocks": resnet_blocks,
        "patch_head": patch_head,
    }
    inputs = {"data": str(data_dir), "train_checksum": cc.manifest.get("checksum_sha256")}
    _write_run_manifest(out, "train", config, inputs)
    print(f"checkpoint -> {out / 'model.ckpt'}")
    return EXIT_OK


# ------------------------------------------------------------- denoise ----

def cmd_denoise(args: argparse.Namespace) -> int:
    from .gan import GanDenoiser
    from .image_codec import encode, export_png

    denoiser = GanDenoiser.from_checkpoint(args.ckpt)
    cc = load_contaminated(args.input)

    clean = None
    clean_path = Path(args.clean) if args.clean else Path(args.input) / "clean.f32"
    if clean_path.exists():
        clean = load_corpus(clean_path, RAW_F32, SegmentKind.CLEAN_EEG)
    if args.export_png and clean is None:
        raise BadArguments(
            "--export-png needs a clean reference (clean.f32 beside the input, or --clean)"
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    denoised = np.empty_like(cc.samples)
    for i in range(cc.count):
        seg = Segment(cc.samples[i].copy(), SegmentKind.CONTAMINATED)
        denoised[i] = denoiser.denoise(seg).samples
    corpus = Corpus(
        samples=denoised,
        kind=SegmentKind.DENOISED,
        source_manifest={"denoised_from": str(args.input), "checkpoint": str(args.ckpt)},
    )
    manifest = save_corpus(corpus, out / "denoised.f32")
    print(f"denoised {cc.count} records -> {out / 'denoised.f32'}")

    if args.export_png:
        png_dir = out / "png"
        png_dir.mkdir(exist_ok=True)
        n = min(args.export_png, cc.count)
        for i in range(n):
            triplet = {
                "contaminated": cc.samples[i],
                "denoised": denoised[i],
                "clean": clean.samples[int(cc.clean_indices[i])],
            }
            for name, samples in triplet.items():
                img, _ = encode(samples)
                export_png(img, png_dir / f"record_{i:04d}_{name}.png")
        print(f"wrote {n} PNG triplets -> {png_dir}")

    config = {"ckpt": str(args.ckpt), "export_png": args.export_png}
    inputs = {"input": str(args.input), "denoised_checksum": manifest["checksum_sha256"]}
    _write_run_manifest(out, "denoise", config, inputs)
    return EXIT_OK


# ---------------------------------------------------------- eval/report ----

def _evaluate_command(args: argparse.Namespace, with_figures: bool) -> int:
    from .gan import GanDenoiser
    from .metrics import (
        IdentityDenoiser,
        evaluate,
        write_band_csv,
        write_detail_csv,
        write_summary_csv,
    )
    from .report import render_metric_curves, render_psd_overlay, write_global_csv

    sub = "report" if with_figures else "eval"
    cfg_file = _load_config_file(args.config, sub)
    r = _Resolver(args, cfg_file)
    psd_method = r.get("psd_method", "welch")
    scale_source = r.get("scale_source", "reference")
    if psd_method not in ("welch", "periodogram"):
        raise BadArguments(f"--psd-method must be welch or periodogram, got {psd_method!r}")
    if scale_source not in ("reference", "input"):
        raise BadArguments(f"--scale-source must be reference or input, got {scale_source!r}")
    if not args.baseline and not args.ckpt:
        raise BadArguments("need --ckpt or --baseline")

    data_dir = Path(args.data)
    cc, clean = _load_split(data_dir, "test")

    if args.baseline:
        denoiser = IdentityDenoiser()
        model_name = "identity"
    else:
        denoiser = GanDenoiser.from_checkpoint(
            args.ckpt, use_reference_scale=(scale_source == "reference")
        )
        model_name = "denoised"

    result = evaluate(denoiser, cc, clean, psd_method=psd_method)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(result, out / "metrics_summary.csv")
    write_detail_csv(result, out / "metrics_detail.csv")
    write_band_csv(result, out / "band_ratios.csv")

    results = {model_name: result}
    if not args.baseline:
        results["contaminated"] = evaluate(
            IdentityDenoiser(), cc, clean, psd_method=psd_method
        )
    write_global_csv(results, out / "global_metrics.csv")
    print(
        f"{model_name}: acc={result.global_acc:.4f} "
        f"rrmse_t={result.global_rrmse_temporal:.4f} "
        f"rrmse_s={result.global_rrmse_spectral:.4f} over {result.n_total} records"
    )

    config = {
        "ckpt": str(args.ckpt) if args.ckpt else None,
        "baseline": bool(args.baseline),
        "psd_method": psd_method,
        "scale_source": scale_source,
    }

    if with_figures:
        plot_format = r.get("plot_format", "svg")
        if plot_format not in ("svg", "png"):
            raise BadArguments(f"--plot-format must be svg or png, got {plot_format!r}")
        snr_pick = r.get("snr", min(cc.snr_levels))
        ordinal = r.get("segment", 0)
        idx = cc.level_indices(snr_pick)
        if idx.size == 0:
            raise BadArguments(f"no records at snr {snr_pick} dB")
        if not 0 <= ordinal < idx.size:
            raise BadArguments(f"--segment must be in [0, {idx.size - 1}], got {ordinal}")
        i = int(idx[ordinal])
        contaminated_seg = Segment(cc.samples[i].copy(), SegmentKind.CONTAMINATED)
        clean_seg = clean.segment(int(cc.clean_indices[i]))
        denoised_seg = denoiser.denoise(contaminated_seg, reference=clean_seg)
        render_metric_curves(results, out / f"metrics_vs_snr.{plot_format}")
        render_psd_overlay(
            clean_seg,
            contaminated_seg,
            denoised_seg,
            out / f"psd_overlay.{plot_format}",
            psd_method=psd_method,
            label=f"({snr_pick} dB, segment {ordinal})",
        )
        print(f"figures -> {out / ('metrics_vs_snr.' + plot_format)}, "
              f"{out / ('psd_overlay.' + plot_format)}")
        config.update({"plot_format": plot_format, "snr": snr_pick, "segment": ordinal})

    inputs = {
        "data": str(data_dir),
        "test_checksum": cc.manifest.get("checksum_sha256"),
    }
    _write_run_manifest(out, sub, config, inputs)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    return _evaluate_command(args, with_figures=False)


def cmd_report(args: argparse.Namespace) -> int:
    return _evaluate_command(args, with_figures=True)


# --------------------------------------------------------------- parser ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emgscrub",
        description="Synthesize EMG-contaminated EEG, train the GAN denoiser, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"emgscrub {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="build contaminated train/test corpora")
    p.add_argument("--eeg", required=True, help="clean EEG corpus (raw f32 + manifest, or CSV)")
    p.add_argument("--emg", required=True, help="EMG corpus (same format)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--snr-min", type=int, default=None)
    p.add_argument("--snr-max", type=int, default=None)
    p.add_argument("--expand", type=int, default=None, help="corpus size after expansion")
    p.add_argument("--train", type=int, default=None, help="training split size")
    p.add_argument("--test", type=int, default=None, help="test split size")
    p.add_argument("--format", choices=("raw", "csv"), default=None)
    p.add_argument("--no-shuffle", action="store_const", const=True, default=None,
                   help="split in corpus order instead of a seeded shuffle")
    p.add_argument("--unbounded-snr", action="store_true",
                   help="lift the default [-7, 2] dB level bounds")
    p.add_argument("--config", default=None, help="TOML/JSON config file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the GAN denoiser")
    p.add_argument("--data", required=True, help="synth output directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--profile", choices=tuple(PROFILES), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--pairs", type=int, default=None,
                   help="stratified subset size (0 = use every record)")
    p.add_argument("--l1-weight", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--resnet-blocks", type=int, default=None)
    p.add_argument("--patch-head", action="store_const", const=True, default=None,
                   help="per-patch discriminator head instead of the FC scalar")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="run a checkpoint over a contaminated corpus")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="contaminated corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--clean", default=None, help="clean reference corpus for PNG triplets")
    p.add_argument("--export-png", type=int, default=0, metavar="N",
                   help="write PNG triplets for the first N records")
    p.set_defaults(func=cmd_denoise)

    for name, helptext in (
        ("eval", "compute metrics tables on the test split"),
        ("report", "metrics tables plus figures"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--ckpt", default=None)
        p.add_argument("--baseline", action="store_true",
                       help="evaluate the identity pass-through instead of a checkpoint")
        p.add_argument("--data", required=True, help="synth output directory")
        p.add_argument("--out", required=True)
        p.add_argument("--psd-method", choices=("welch", "periodogram"), default=None)
        p.add_argument("--scale-source", choices=("reference", "input"), default=None,
                       help="value range used to decode generator output during eval")
        p.add_argument("--config", default=None)
        if name == "report":
            p.add_argument("--plot-format", choices=("svg", "png"), default=None)
            p.add_argument("--snr", type=int, default=None,
                           help="SNR level for the PSD overlay (default: lowest)")
            p.add_argument("--segment", type=int, default=None,
                           help="segment ordinal within that level (default 0)")
        p.set_defaults(func=cmd_eval if name == "eval" else cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_BAD_ARGS

    from .gan.training import CheckpointError, NonFiniteLossError

    try:
        _threads_env()  # validate eagerly so a bad value fails fast
        return args.func(args)
    except BadArguments as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except NonFiniteLossError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONFINITE
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (DataValidationError, CorruptCorpusError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
