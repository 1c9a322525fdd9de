"""Command-line entry point for corpus tools, training, denoising, and
evaluation.

Anything that affects results lives in a JSON run config (see
``DEFAULT_CONFIG``); flags override individual scalars and the ``SMLE_SEED``
environment variable overrides the configured seed.  Every run is
reproducible from the config plus seed alone.
"""

import argparse
import copy
import json
import os
import sys
from pathlib import Path

DEFAULT_CONFIG = {
    "seed": 0,
    "corpus": None,
    "output_dir": "runs",
    "stft": {"frame_size": 1024, "hop": 256},
    "train": {
        "hidden": 16,
        "layers": 2,
        "batch_size": 100,
        "learning_rate": 0.001,
        "lambda": 10.0,
        "max_steps": 500,
        "validate_every": 50,
        "patience": 10,
        "latent": "snr",
        "snr_set": [-5.0, 0.0, 5.0, 10.0],
        "snippet_seconds": 1.0,
        "val_batches": 2,
    },
    "eval": {"n_mixtures": 200},
}


class ConfigError(ValueError):
    pass


def load_config(path=None, overrides=None):
    """Merge defaults, the config file, env seed, and flag overrides.

    Unknown keys anywhere in the document are rejected.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        _merge(config, user, trail="")
    env_seed = os.environ.get("SMLE_SEED")
    if env_seed is not None:
        config["seed"] = int(env_seed)
    for dotted, value in (overrides or {}).items():
        node = config
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node[key]
        node[leaf] = value
    return config


def _merge(base, user, trail):
    for key, value in user.items():
        if key not in base:
            raise ConfigError(f"unknown config key {trail + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {trail + key!r} must be an object")
            _merge(base[key], value, trail + key + ".")
        else:
            base[key] = value


def _train_config(config):
    from .pipeline import TrainConfig

    t = config["train"]
    return TrainConfig(
        hidden=t["hidden"],
        layers=t["layers"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        lam=t["lambda"],
        max_steps=t["max_steps"],
        validate_every=t["validate_every"],
        patience=t["patience"],
        seed=config["seed"],
        latent=t["latent"],
        snr_set=tuple(t["snr_set"]),
        snippet_seconds=t["snippet_seconds"],
        frame_size=config["stft"]["frame_size"],
        hop=config["stft"]["hop"],
        val_batches=t["val_batches"],
    )


def _load_corpus(config):
    from .data import Corpus

    if not config.get("corpus"):
        raise ConfigError("config needs a 'corpus' manifest path")
    return Corpus.from_manifest(config["corpus"])


def _out_dir(config):
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_history(history, path):
    with open(path, "w") as fh:
        json.dump(history, fh, indent=1)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_synth_corpus(args):
    from .data import SynthSpec, generate_synthetic_corpus

    spec = SynthSpec(
        out_dir=args.out,
        speakers=args.speakers,
        utterances=args.utterances,
        noises=args.noises,
        test_speakers=args.test_speakers,
        test_utterances=args.test_utterances,
        test_noises=args.test_noises,
        seed=args.seed,
    )
    corpus = generate_synthetic_corpus(spec)
    print(
        f"wrote {len(corpus.speech_items)} speech and {len(corpus.noise_items)} "
        f"noise files under {args.out}"
    )
    return 0


def cmd_mix(args):
    from .data import save_wav
    from .pipeline import build_test_mixtures

    config = load_config(args.config, _overrides(args))
    corpus = _load_corpus(config) if config["corpus"] else None
    if corpus is None:
        raise ConfigError("mix requires a corpus (use --corpus or the config file)")
    snr_set = [args.snr] if args.snr is not None else config["train"]["snr_set"]
    mixtures = build_test_mixtures(corpus, args.count, snr_set, seed=config["seed"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for i, smp in enumerate(mixtures):
        # one shared headroom scale keeps x == s + n intact after quantization
        peak = max(abs(smp.x).max(), abs(smp.s).max(), abs(smp.n).max())
        scale = min(1.0, 0.95 / float(peak))
        files = {}
        for tag, wav in (("x", smp.x), ("s", smp.s), ("n", smp.n)):
            rel = f"mix{i:04d}_{tag}.wav"
            save_wav(out / rel, scale * wav)
            files[tag] = rel
        index.append(
            {
                "snr_db": smp.snr_db,
                "speaker": smp.speaker,
                "gender": smp.gender,
                "noise": Path(smp.noise_path).name,
                "scale": scale,
                "files": files,
            }
        )
    with open(out / "mixtures.json", "w") as fh:
        json.dump(index, fh, indent=1)
    print(f"wrote {len(mixtures)} mixtures to {out}")
    return 0


def cmd_train_specialist(args):
    from .checkpoint import save_model
    from .pipeline import train_specialist

    config = load_config(args.config, _overrides(args))
    corpus = _load_corpus(config)
    tc = _train_config(config)
    model, history = train_specialist(tc, corpus, cluster_id=args.cluster)
    out = _out_dir(config)
    tag = "baseline" if args.cluster is None else f"specialist{args.cluster}"
    ckpt = args.out or out / f"{tag}.smle"
    save_model(model, ckpt)
    _write_history(history, out / f"{tag}_history.json")
    print(f"saved {tag} to {ckpt} (best step {history['best_step']}, "
          f"val SI-SDRi {max(history['val_sisdri']):.2f} dB)")
    return 0


def cmd_train_gate(args):
    from .checkpoint import save_model
    from .pipeline import train_gating

    config = load_config(args.config, _overrides(args))
    corpus = _load_corpus(config)
    tc = _train_config(config)
    model, history = train_gating(tc, corpus)
    out = _out_dir(config)
    ckpt = args.out or out / "gate.smle"
    save_model(model, ckpt)
    _write_history(history, out / "gate_history.json")
    print(f"saved gate to {ckpt} (best step {history['best_step']}, "
          f"val accuracy {max(history['val_accuracy']):.3f})")
    return 0


def cmd_finetune(args):
    from .checkpoint import load_model, save_model
    from .pipeline import finetune_ensemble

    config = load_config(args.config, _overrides(args))
    corpus = _load_corpus(config)
    tc = _train_config(config)
    specialists = [load_model(p) for p in args.specialists]
    gate = load_model(args.gate)
    ensemble, history = finetune_ensemble(tc, specialists, gate, corpus)
    out = _out_dir(config)
    ckpt = args.out or out / "ensemble.smle"
    save_model(ensemble, ckpt)
    _write_history(history, out / "ensemble_history.json")
    print(f"saved fine-tuned ensemble to {ckpt} (best step {history['best_step']}, "
          f"val SI-SDRi {max(history['val_sisdri']):.2f} dB)")
    return 0


def cmd_denoise(args):
    import numpy as np

    from .checkpoint import load_model
    from .data import load_wav, save_wav
    from .models import denoise

    model = load_model(args.model)
    x = load_wav(args.infile)
    s_hat, report = denoise(model, x)
    save_wav(args.out, s_hat)
    if report.gate_probs is not None:
        probs = ", ".join(f"{p:.4f}" for p in np.asarray(report.gate_probs))
        print(f"chosen specialist: {report.chosen_specialist}  gate probs: [{probs}]")
    print(
        f"wrote {args.out} ({s_hat.shape[0]} samples); active params "
        f"{report.active_params} of {report.learned_params} learned"
    )
    return 0


def cmd_evaluate(args):
    from .checkpoint import load_model
    from .pipeline import evaluate

    config = load_config(args.config, _overrides(args))
    corpus = _load_corpus(config)
    models = {}
    for item in args.models:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = Path(item).stem, item
        models[name] = load_model(path)
    n = args.mixtures or config["eval"]["n_mixtures"]
    report = evaluate(models, corpus, n, snr_set=tuple(config["train"]["snr_set"]),
                      seed=config["seed"], frame_size=config["stft"]["frame_size"],
                      hop=config["stft"]["hop"])
    print(report.to_table())
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=1)
        print(f"\nwrote report to {args.report}")
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------


def _overrides(args):
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "corpus", None) is not None:
        out["corpus"] = args.corpus
    if getattr(args, "output_dir", None) is not None:
        out["output_dir"] = args.output_dir
    for flag, dotted in (
        ("hidden", "train.hidden"),
        ("layers", "train.layers"),
        ("batch_size", "train.batch_size"),
        ("max_steps", "train.max_steps"),
        ("latent", "train.latent"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            out[dotted] = value
    return out


def _add_config_flags(p, with_train=True):
    p.add_argument("--config", help="JSON run config (defaults used when omitted)")
    p.add_argument("--corpus", help="corpus manifest path (overrides config)")
    p.add_argument("--seed", type=int, help="seed override (flag beats SMLE_SEED)")
    p.add_argument("--output-dir", dest="output_dir", help="output directory override")
    if with_train:
        p.add_argument("--hidden", type=int, help="hidden units per recurrent layer")
        p.add_argument("--layers", type=int, help="recurrent layer count")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        p.add_argument("--latent", choices=["snr", "gender"], help="cluster latent space")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smle",
        description="Sparsely-gated ensemble speech denoiser: corpus tools, "
        "training, denoising, evaluation.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (sets BLAS thread env vars)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate the synthetic stand-in corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, default=12)
    p.add_argument("--utterances", type=int, default=6)
    p.add_argument("--noises", type=int, default=30)
    p.add_argument("--test-speakers", type=int, default=6)
    p.add_argument("--test-utterances", type=int, default=4)
    p.add_argument("--test-noises", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("mix", help="write test mixtures as WAV files")
    _add_config_flags(p, with_train=False)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--snr", type=float, help="fix one SNR instead of cycling the set")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train-specialist", help="pre-train one specialist or the baseline")
    _add_config_flags(p)
    p.add_argument("--cluster", type=int, default=None,
                   help="cluster index; omit to train the generalist baseline")
    p.add_argument("--out", help="checkpoint path")
    p.set_defaults(func=cmd_train_specialist)

    p = sub.add_parser("train-gate", help="train the gating classifier")
    _add_config_flags(p)
    p.add_argument("--out", help="checkpoint path")
    p.set_defaults(func=cmd_train_gate)

    p = sub.add_parser("finetune", help="jointly fine-tune specialists plus gate")
    _add_config_flags(p)
    p.add_argument("--specialists", nargs="+", required=True,
                   help="specialist checkpoints in cluster order")
    p.add_argument("--gate", required=True, help="gate checkpoint")
    p.add_argument("--out", help="checkpoint path")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("denoise", help="denoise one WAV file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("evaluate", help="score models on test mixtures")
    _add_config_flags(p)
    p.add_argument("--models", nargs="+", required=True,
                   help="checkpoints, optionally name=path")
    p.add_argument("--mixtures", type=int, help="test mixture count")
    p.add_argument("--report", help="write the report JSON here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
