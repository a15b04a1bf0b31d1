"""End-to-end desk experiment: detectors trained with and without WaveRep,
scored on clean and toy-compressed test clips."""

import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .detector import TrainConfig, band_swap_attack, extract_features, score_clip, train_logistic
from .errors import ForensicsError
from .metrics import evaluate
from .simulate import AutoencoderSim, ToyCodec, derive_seed, make_pairs, toy_compress
from .spectral import parse_denoiser
from .waverep import augment_pair

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ARMS = ("none", "waverep")
CONDITIONS = ("clean", "compressed")


@dataclass
class ExperimentConfig:
    seed: int = 7
    levels: int = 3
    augmentation: str = "waverep:0.1"
    n_train: int = 200
    n_test: int = 100
    frames: int = 32
    height: int = 64
    width: int = 64
    codec_block: int = 8
    codec_q: float = 0.1
    codec_smoothing: float = 0.0
    denoiser: str = "gaussian:0.8"
    lr: float = 0.5
    epochs: int = 400
    l2: float = 1e-3

    @property
    def augment_p(self):
        name, _, arg = self.augmentation.partition(":")
        if name == "none":
            return 0.0
        if name != "waverep":
            raise ValueError(f"unknown augmentation {self.augmentation!r}")
        return float(arg) if arg else 0.1

    @property
    def codec(self):
        return ToyCodec(self.codec_block, self.codec_q, self.codec_smoothing)

    @property
    def train_config(self):
        return TrainConfig(self.lr, self.epochs, self.l2)

    def to_toml(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {json.dumps(v)}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_toml().encode()).hexdigest()

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(mapping) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**mapping)
        cfg.augment_p  # validates the augmentation spec
        return cfg

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


class StageError(ForensicsError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


def build_training_set(pairs, p, seed, levels, denoiser):
    """Per-frame features and labels; fakes are WaveRep-augmented with probability p."""
    feats, labels = [], []
    for i, (real, fake) in enumerate(zip(pairs.reals, pairs.fakes)):
        feats.append(extract_features(real.data, denoiser, levels))
        labels.append(np.zeros(real.frames))
        if p > 0:
            fake, _ = augment_pair(fake, real, p, derive_seed(seed, 3, i), levels)
        feats.append(extract_features(fake.data, denoiser, levels))
        labels.append(np.ones(fake.frames))
    return np.concatenate(feats), np.concatenate(labels)


def write_scores(samples, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", "score", "prob"])
        for s in samples:
            w.writerow([s.id, s.label, f"{s.score:.9g}", f"{s.prob:.9g}"])


def read_scores(path):
    from .detector import ScoredSample

    with open(path, newline="") as fh:
        return [ScoredSample(r["id"], int(r["label"]), float(r["score"])) for r in csv.DictReader(fh)]


def write_provenance(out_dir, cfg_digest, seed, extra=None):
    record = {"version": __version__, "config_hash": cfg_digest, "seed": seed}
    record.update(extra or {})
    Path(out_dir, "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir=None, ae=None):
    """Train both arms, score clean/compressed test sets, return a results dict.

    With ``out_dir`` set, score CSVs, metric reports, the resolved config and
    ``run.json`` are written there.
    """
    ae = ae or AutoencoderSim()
    denoiser = parse_denoiser(cfg.denoiser)
    L = cfg.levels
    shape = dict(frames=cfg.frames, height=cfg.height, width=cfg.width)
    with _Stage("simulate"):
        train = make_pairs(cfg.n_train // 2, derive_seed(cfg.seed, 10), ae=ae, **shape)
        test = make_pairs(cfg.n_test // 2, derive_seed(cfg.seed, 11), ae=ae, **shape)

    models = {}
    for arm in ARMS:
        with _Stage(f"train:{arm}"):
            p = 0.0 if arm == "none" else cfg.augment_p
            x, y = build_training_set(train, p, derive_seed(cfg.seed, 12), L, denoiser)
            models[arm] = train_logistic(x, y, cfg.train_config, seed=derive_seed(cfg.seed, 13))

    with _Stage("compress"):
        codec = cfg.codec
        test_sets = {
            "clean": (test.reals, test.fakes),
            "compressed": ([toy_compress(c, codec) for c in test.reals], [toy_compress(c, codec) for c in test.fakes]),
        }
        attacked = [band_swap_attack(r, f, L) for r, f in zip(test.reals, test.fakes)]

    results = {"reports": {}, "scores": {}, "attack_flip_rate": {}, "models": models}
    for arm, model in models.items():
        with _Stage(f"score:{arm}"):
            for cond, (reals, fakes) in test_sets.items():
                samples = []
                for pid, r, f in zip(test.pair_ids, reals, fakes):
                    samples.append(score_clip(model, r, f"{pid}-real", 0, denoiser, L))
                    samples.append(score_clip(model, f, f"{pid}-fake", 1, denoiser, L))
                results["scores"][(arm, cond)] = samples
                results["reports"][(arm, cond)] = evaluate(samples)
            flips = [score_clip(model, a, denoiser=denoiser, levels=L).prob >= 0.5 for a in attacked]
            results["attack_flip_rate"][arm] = float(np.mean(flips))

    if out_dir is not None:
        with _Stage("write"):
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.toml").write_text(cfg.to_toml())
            for (arm, cond), samples in results["scores"].items():
                write_scores(samples, out / f"scores_{arm}_{cond}.csv")
                results["reports"][(arm, cond)].to_csv(out / f"report_{arm}_{cond}.csv")
            for arm, model in models.items():
                model.save(out / f"model_{arm}.json")
            with open(out / "summary.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["arm", "condition", "auc", "bacc", "pd_at_5", "nll", "ece"])
                for (arm, cond), rep in results["reports"].items():
                    w.writerow([arm, cond] + [f"{v:.6f}" for v in (rep.auc, rep.bacc, rep.pd_at_5, rep.nll, rep.ece)])
                for arm, rate in results["attack_flip_rate"].items():
                    w.writerow([arm, "band_swap_flip_rate", "", f"{rate:.6f}", "", "", ""])
            write_provenance(out, cfg.digest(), cfg.seed)
    return results


def default_config_text():
    return ExperimentConfig().to_toml()


def config_dict(cfg):
    return asdict(cfg)
