"""``vidforensics`` command line: one binary, one subcommand per pipeline stage.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 missing external
capability (e.g. no encoder binary).
"""

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .detector import LogisticModel, TrainConfig, band_swap_attack, extract_features, score_clip, train_logistic
from .errors import CapabilityError, ForensicsError
from .experiment import ExperimentConfig, read_scores, run_experiment, write_provenance, write_scores
from .metrics import evaluate
from .simulate import (
    AutoencoderSim,
    ToyCodec,
    derive_seed,
    external_encode,
    make_pairs,
    sim_autoencode,
    synth_clip,
    toy_compress,
)
from .spectral import freq_distance, parse_denoiser, power_spectra, render_spectrum
from .videoio import Clip, DatasetManifest, ManifestEntry, load_y4m, save_tensor, save_y4m
from .wavelet import fswt_forward, fswt_inverse, load_grid, save_grid
from .waverep import augment_pair, parse_mask, replace_bands

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CAPABILITY = 0, 1, 2, 3


def _args_digest(args):
    items = {k: str(v) for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(items, sort_keys=True).encode()).hexdigest()


def _stamp(args, out_dir, seed=None):
    write_provenance(out_dir, _args_digest(args), seed, {"command": args.command})


def _parent(path):
    parent = Path(path).parent
    parent.mkdir(parents=True, exist_ok=True)
    return parent


def _parse_augment(spec):
    name, _, arg = spec.partition(":")
    if name == "none":
        return 0.0
    if name == "waverep":
        return float(arg) if arg else 0.1
    raise ValueError(f"unknown augmentation {spec!r}; use none or waverep:p")


def _load_manifest_clips(path, label=None):
    manifest = DatasetManifest.load(path)
    entries = [e for e in manifest.entries if label is None or e.label == label]
    return manifest, entries, [load_y4m(manifest.resolve(e)) for e in entries]


def _clips_from(paths):
    """Y4M files, or the entries of a single JSON manifest."""
    if len(paths) == 1 and paths[0].endswith(".json"):
        return _load_manifest_clips(paths[0])[2]
    return [load_y4m(p) for p in paths]


# --- wavelet ---------------------------------------------------------------


def cmd_fswt(args):
    clip = load_y4m(args.input, align=2**args.levels)
    grid = fswt_forward(clip.data, args.levels)
    out = Path(args.out)
    save_grid(grid, out)
    fr = clip.frame_rate
    (out / "clip.json").write_text(json.dumps({"frame_rate": [fr.numerator, fr.denominator]}) + "\n")
    _stamp(args, out)


def cmd_ifswt(args):
    grid = load_grid(args.grid)
    rate = Fraction(30)
    meta = Path(args.grid) / "clip.json"
    if meta.exists():
        rate = Fraction(*json.loads(meta.read_text())["frame_rate"])
    data = fswt_inverse(grid)
    if data.ndim == 2:
        data = data[None]
    save_y4m(Clip(data, rate), args.out)
    _stamp(args, _parent(args.out))


def cmd_waverep(args):
    fake, real = load_y4m(args.fake), load_y4m(args.real)
    if args.p is None:
        mask = parse_mask(args.mask, args.levels)
        out = fake.replace(replace_bands(fake.data, real.data, mask, args.levels))
    else:
        out, log = augment_pair(fake, real, args.p, args.seed, args.levels, args.per_clip)
        if args.log:
            log.to_csv(args.log)
    save_y4m(out, args.out)
    _stamp(args, _parent(args.out), args.seed)


# --- spectral --------------------------------------------------------------


def _write_spectra(out_dir, named):
    for name, grid in named.items():
        save_tensor(np.asarray(grid, dtype=np.float32), out_dir / f"{name}.wvt")
        render_spectrum(grid, out_dir / f"{name}.pgm")


def cmd_spectrum(args):
    _, _, clips = _load_manifest_clips(args.manifest, args.label)
    spectra = power_spectra(clips, parse_denoiser(args.denoiser))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_spectra(out, {"s_yx": spectra.s_yx, "s_tx": spectra.s_tx, "s_yt": spectra.s_yt})
    _stamp(args, out)


def cmd_distance(args):
    dmap = freq_distance(_clips_from(args.real), _clips_from(args.recon))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_spectra(out, {"distance": dmap.d})
    _stamp(args, out)


# --- simulate --------------------------------------------------------------


def cmd_make_dataset(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = max(args.n_real, args.n_fake)
    pairs = make_pairs(n, args.seed, args.frames, args.height, args.width, AutoencoderSim())
    paired = min(args.n_real, args.n_fake)
    entries = []
    for i, pid in enumerate(pairs.pair_ids):
        group = pid if i < paired else None
        if i < args.n_real:
            save_y4m(pairs.reals[i], out / f"real_{i:05d}.y4m")
            entries.append(ManifestEntry(f"real_{i:05d}.y4m", "real", group, [f"style:{pairs.styles[i]}"]))
        if i < args.n_fake:
            save_y4m(pairs.fakes[i], out / f"fake_{i:05d}.y4m")
            entries.append(ManifestEntry(f"fake_{i:05d}.y4m", "fake", group, [f"style:{pairs.styles[i]}"]))
    DatasetManifest(entries).save(out / "manifest.json")
    _stamp(args, out, args.seed)


def cmd_autoencode(args):
    clip = load_y4m(args.input, align=2)
    save_y4m(sim_autoencode(clip, AutoencoderSim(latent_noise=args.latent_noise), args.seed), args.out)
    _stamp(args, _parent(args.out), args.seed)


def cmd_synth(args):
    clip = synth_clip(args.seed, args.frames, args.height, args.width, args.style)
    save_y4m(clip, args.out)
    _stamp(args, _parent(args.out), args.seed)


def _compress_one(clip, args):
    if args.encoder == "external":
        return external_encode(clip, args.crf, args.encoder_path)
    return toy_compress(clip, ToyCodec(args.block, args.q, args.smoothing))


def cmd_compress(args):
    if args.manifest:
        manifest = DatasetManifest.load(args.manifest)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for e in manifest.entries:
            name = Path(e.path).name
            save_y4m(_compress_one(load_y4m(manifest.resolve(e)), args), out / name)
            entries.append(ManifestEntry(name, e.label, e.pair_id, list(e.tags) + ["compressed"]))
        DatasetManifest(entries).save(out / "manifest.json")
        _stamp(args, out)
    else:
        if not args.input:
            raise ValueError("give an input clip or --manifest")
        save_y4m(_compress_one(load_y4m(args.input), args), args.out)
        _stamp(args, _parent(args.out))


# --- detector / metrics ----------------------------------------------------


def cmd_train(args):
    manifest = DatasetManifest.load(args.manifest)
    p = _parse_augment(args.augment)
    denoiser = parse_denoiser(args.denoiser)
    partner = {}
    for pid, (real, fakes) in manifest.pairs().items():
        for f in fakes:
            partner[f.path] = real
    feats, labels = [], []
    for i, e in enumerate(manifest.entries):
        clip = load_y4m(manifest.resolve(e), align=2**args.levels)
        if e.is_fake and p > 0 and e.path in partner:
            real = load_y4m(manifest.resolve(partner[e.path]), align=2**args.levels)
            clip, _ = augment_pair(clip, real, p, derive_seed(args.seed, 3, i), args.levels)
        f = extract_features(clip.data, denoiser, args.levels)
        feats.append(f)
        labels.append(np.full(len(f), float(e.is_fake)))
    model = train_logistic(
        np.concatenate(feats), np.concatenate(labels), TrainConfig(args.lr, args.epochs, args.l2), args.seed
    )
    model.meta.update({"levels": args.levels, "denoiser": args.denoiser, "augment": args.augment})
    model.save(args.out)
    _stamp(args, _parent(args.out), args.seed)


def cmd_score(args):
    model = LogisticModel.load(args.model)
    levels = int(model.meta.get("levels", 3))
    denoiser = parse_denoiser(model.meta.get("denoiser", "gaussian:0.8"))
    manifest = DatasetManifest.load(args.manifest)
    samples = []
    for e in manifest.entries:
        clip = load_y4m(manifest.resolve(e), align=2**levels)
        samples.append(score_clip(model, clip, e.path, int(e.is_fake), denoiser, levels))
    write_scores(samples, args.out)
    _stamp(args, _parent(args.out))


def cmd_eval(args):
    evaluate(read_scores(args.scores), args.threshold, args.bins).to_csv(args.out)
    _stamp(args, _parent(args.out))


def cmd_attack(args):
    real = load_y4m(args.real, align=2**args.levels)
    fake = load_y4m(args.fake, align=2**args.levels)
    attacked = band_swap_attack(real, fake, args.levels)
    save_y4m(attacked, args.out)
    if args.model:
        model = LogisticModel.load(args.model)
        denoiser = parse_denoiser(model.meta.get("denoiser", "gaussian:0.8"))
        s = score_clip(model, attacked, denoiser=denoiser, levels=args.levels)
        print(f"attacked prob_fake={s.prob:.6f}")
    _stamp(args, _parent(args.out))


def cmd_run(args):
    if args.print_default_config:
        sys.stdout.write(ExperimentConfig().to_toml())
        return
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out_dir)
    results = run_experiment(cfg, out)
    for (arm, cond), rep in results["reports"].items():
        print(f"{arm:8s} {cond:10s} auc={rep.auc:.4f} bacc={rep.bacc:.4f} pd@5={rep.pd_at_5:.4f}")
    for arm, rate in results["attack_flip_rate"].items():
        print(f"{arm:8s} band-swap flip rate={rate:.4f}")


# --- parser ----------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="vidforensics", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("fswt", help="forward wavelet transform of a Y4M clip")
    p.add_argument("input")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--out", required=True, help="output grid directory")
    p.set_defaults(func=cmd_fswt)

    p = sub.add_parser("ifswt", help="inverse transform of a grid directory")
    p.add_argument("grid")
    p.add_argument("--out", required=True, help="output Y4M")
    p.set_defaults(func=cmd_ifswt)

    p = sub.add_parser("waverep", help="replace wavelet bands of a fake with a real clip's")
    p.add_argument("--fake", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--mask", default="default", help="default | all | none | path to JSON boolean grid")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--p", type=float, default=None, help="random per-frame augmentation with this probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-clip", action="store_true", help="one variant draw for the whole clip")
    p.add_argument("--log", help="CSV of per-frame variants (with --p)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_waverep)

    p = sub.add_parser("spectrum", help="averaged residual power spectra of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--denoiser", default="gaussian:0.8")
    p.add_argument("--label", choices=("real", "fake"), default=None, help="only use entries with this label")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("distance", help="normalized spectral distance between real and reconstructed clips")
    p.add_argument("--real", nargs="+", required=True, help="Y4M files or one JSON manifest")
    p.add_argument("--recon", nargs="+", required=True, help="Y4M files or one JSON manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_distance)

    def add_codec_flags(p):
        p.add_argument("--q", type=float, default=0.1)
        p.add_argument("--block", type=int, default=8)
        p.add_argument("--smoothing", type=float, default=0.0)
        p.add_argument("--encoder", choices=("toy", "external"), default="toy")
        p.add_argument("--crf", type=int, default=23)
        p.add_argument("--encoder-path", default=None)

    p = sub.add_parser("simulate", help="synthetic clips, autoencoder and codec simulation")
    ssub = p.add_subparsers(dest="action", metavar="ACTION")
    ssub.required = True
    s = ssub.add_parser("make-dataset", help="paired real/fake clips plus manifest")
    s.add_argument("--n-real", type=int, default=100)
    s.add_argument("--n-fake", type=int, default=100)
    s.add_argument("--frames", type=int, default=32)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_dataset)
    s = ssub.add_parser("synth", help="one procedural real clip")
    s.add_argument("--style", default="textured")
    s.add_argument("--frames", type=int, default=32)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    s = ssub.add_parser("autoencode", help="pass a clip through the simulated autoencoder")
    s.add_argument("input")
    s.add_argument("--latent-noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_autoencode)
    s = ssub.add_parser("compress", help="same as the top-level compress command")
    s.add_argument("input", nargs="?")
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    add_codec_flags(s)
    s.set_defaults(func=cmd_compress)

    p = sub.add_parser("compress", help="toy codec (or external encoder) on a clip or manifest")
    p.add_argument("input", nargs="?")
    p.add_argument("--manifest", help="compress every entry; --out is then a directory")
    p.add_argument("--out", required=True)
    add_codec_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("train", help="train the band-energy logistic detector")
    p.add_argument("--manifest", required=True)
    p.add_argument("--augment", default="waverep:0.1", help="none | waverep:p")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--denoiser", default="gaussian:0.8")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score every clip of a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="metric report from a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="band-swap attack: real clip with the fake's diagonal bands")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--model", help="also report the detector's probability on the result")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("run", help="end-to-end experiment from a key=value config")
    p.add_argument("--config", help="TOML file; omitted keys take defaults")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", default="run-out")
    p.add_argument("--print-default-config", action="store_true")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CapabilityError as exc:
        print(f"vidforensics {args.command}: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (ForensicsError, OSError, ValueError) as exc:
        print(f"vidforensics {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
