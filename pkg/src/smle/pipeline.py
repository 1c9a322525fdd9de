"""Training loops, loss gradients, and the evaluation harness.

Three trainers cover the full recipe: per-cluster specialist pre-training
on the negative SI-SDR of the reconstructed estimate, gating training on
binary cross-entropy against the cluster label, and joint fine-tuning of
all members through the soft (probability-weighted) ensemble mask.  Every
loop validates on a fixed held-out set, stops early when the metric stalls,
and restores the best-scoring parameters.

One trainer owns its model's parameters; batch sampling and evaluation only
read shared state, so they may run concurrently with disjoint RNG streams.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dsp, metrics
from .data import GENDERS, SNR_SET, BatchSpec, make_test_mixture, sample_batch
from .models import EnsembleModel, GatingModel, SpecialistModel, denoise
from .neural import Adam, scaled_softmax_backward

_LOG10_SCALE = 20.0 / np.log(10.0)


@dataclass
class TrainConfig:
    hidden: int = 16
    layers: int = 2
    batch_size: int = 100
    learning_rate: float = 0.001
    lam: float = 10.0
    max_steps: int = 500
    validate_every: int = 50
    patience: int = 10
    seed: int = 0
    latent: str = "snr"  # snr | gender
    snr_set: tuple = SNR_SET
    snippet_seconds: float = 1.0
    frame_size: int = dsp.DEFAULT_FRAME_SIZE
    hop: int = dsp.DEFAULT_HOP
    val_batches: int = 2

    @property
    def k(self):
        return len(self.snr_set) if self.latent == "snr" else len(GENDERS)

    def cluster_labels(self):
        if self.latent == "snr":
            return [f"{lvl:g}dB" for lvl in sorted(self.snr_set)]
        return list(GENDERS)


# ----------------------------------------------------------------------
# losses and gradients
# ----------------------------------------------------------------------


def neg_sisdr_and_grad(reference, estimate, scale_invariant=True):
    """Negative SI-SDR loss and its gradient w.r.t. the estimate.

    Saturated cases (ratio beyond +/-100 dB) return the clamped loss with a
    zero gradient.
    """
    s = np.asarray(reference, dtype=np.float64)
    e = np.asarray(estimate, dtype=np.float64)
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0.0:
        raise ValueError("undefined reference: zero-energy reference signal")
    alpha = float(np.dot(e, s)) / ref_energy if scale_invariant else 1.0
    resid = alpha * s - e
    num = alpha * alpha * ref_energy
    den = float(np.dot(resid, resid))
    if num == 0.0:
        return metrics.DB_CLAMP, np.zeros_like(e)
    if den == 0.0:
        return -metrics.DB_CLAMP, np.zeros_like(e)
    raw = 10.0 * np.log10(num / den)
    if abs(raw) >= metrics.DB_CLAMP:
        return -float(np.clip(raw, -metrics.DB_CLAMP, metrics.DB_CLAMP)), np.zeros_like(e)
    grad = resid / den
    if scale_invariant:
        grad = grad + s / (alpha * ref_energy)
    return -float(raw), -_LOG10_SCALE * grad


def neg_sisdr_and_grad_batch(refs, ests, scale_invariant=True):
    """Vectorized :func:`neg_sisdr_and_grad` over (B, L) signal batches.

    Returns per-item losses (B,) and gradients (B, L); clamped items get a
    zero gradient.
    """
    s = np.asarray(refs, dtype=np.float64)
    e = np.asarray(ests, dtype=np.float64)
    ref_energy = np.einsum("bl,bl->b", s, s)
    if np.any(ref_energy == 0.0):
        raise ValueError("undefined reference: zero-energy reference signal")
    if scale_invariant:
        alpha = np.einsum("bl,bl->b", e, s) / ref_energy
    else:
        alpha = np.ones_like(ref_energy)
    resid = alpha[:, None] * s - e
    num = alpha * alpha * ref_energy
    den = np.einsum("bl,bl->b", resid, resid)
    ok = (num > 0.0) & (den > 0.0)
    safe_num = np.where(ok, num, 1.0)
    safe_den = np.where(ok, den, 1.0)
    raw = np.where(ok, 10.0 * np.log10(safe_num / safe_den), 0.0)
    raw = np.where(num == 0.0, -metrics.DB_CLAMP, raw)
    raw = np.where((num > 0.0) & (den == 0.0), metrics.DB_CLAMP, raw)
    losses = -np.clip(raw, -metrics.DB_CLAMP, metrics.DB_CLAMP)
    in_range = ok & (np.abs(raw) < metrics.DB_CLAMP)
    grads = resid / safe_den[:, None]
    if scale_invariant:
        safe_alpha = np.where(alpha == 0.0, 1.0, alpha)
        grads = grads + s / (safe_alpha * ref_energy)[:, None]
    grads = np.where(in_range[:, None], -_LOG10_SCALE * grads, 0.0)
    return losses, grads


def _batch_features(samples, frame_size, hop, dtype):
    """stft every mixture; returns time-major spectrograms and magnitudes.

    Both outputs are (B, T, F); items must share one snippet length.
    """
    lengths = {smp.x.shape[0] for smp in samples}
    if len(lengths) != 1:
        raise ValueError("batch items must share one snippet length")
    waves = np.stack([np.asarray(smp.x, dtype=dtype) for smp in samples])
    specs = dsp.stft_batch(waves, frame_size, hop)
    return specs, np.abs(specs).astype(dtype, copy=False)


def _mask_path_loss(samples, specs, masks, frame_size, hop, want_grads=False):
    """Mean negative SI-SDR through apply_mask + istft for one mask batch.

    ``specs`` and ``masks`` are time-major (B, T, F); returns the scalar
    loss and, when asked, dLoss/dmask in the same layout.
    """
    b_size = len(samples)
    t_frames = specs.shape[1]
    cov = dsp.coverage_length(t_frames, frame_size, hop)
    shat = dsp.istft_batch(masks * specs, frame_size, hop)
    refs = np.stack([smp.s[:cov] for smp in samples])
    losses, dshat = neg_sisdr_and_grad_batch(refs, shat)
    loss = float(np.mean(losses))
    if not want_grads:
        return loss, None
    dshat = (dshat / b_size).astype(shat.dtype, copy=False)
    grad_specs = dsp.istft_adjoint_batch(dshat, t_frames, frame_size, hop)
    dmasks = (np.conj(grad_specs) * specs).real
    return loss, dmasks


def specialist_loss_and_grads(net, samples, frame_size, hop, want_grads=True):
    """Mean negative SI-SDR of the masked reconstruction, plus parameter grads."""
    specs, feats = _batch_features(samples, frame_size, hop, net.dtype)
    masks, ctx = net.forward_masks(feats)
    loss, dmasks = _mask_path_loss(samples, specs, masks, frame_size, hop,
                                   want_grads=want_grads)
    if not want_grads:
        return loss, None
    grads = net.backward_masks(dmasks.astype(net.dtype), ctx)
    return loss, grads


def gating_loss_and_grads(net, feats, labels, want_grads=True):
    """Mean summed binary cross-entropy of gate output vs one-hot labels."""
    probs, _, ctx = net.forward_gate(feats)
    b_size, k = probs.shape
    onehot = np.zeros((b_size, k))
    onehot[np.arange(b_size), labels] = 1.0
    clamped = np.clip(probs.astype(np.float64), metrics.BCE_CLAMP, 1.0 - metrics.BCE_CLAMP)
    loss = float(
        -np.sum(onehot * np.log(clamped) + (1.0 - onehot) * np.log1p(-clamped)) / b_size
    )
    if not want_grads:
        return loss, None, probs
    inside = (probs > metrics.BCE_CLAMP) & (probs < 1.0 - metrics.BCE_CLAMP)
    dprobs = np.where(inside, (-onehot / clamped + (1.0 - onehot) / (1.0 - clamped)) / b_size, 0.0)
    dlogits = scaled_softmax_backward(dprobs, probs.astype(np.float64), net.lam)
    grads = net.backward_gate(dlogits.astype(net.dtype), ctx)
    return loss, grads, probs


def ensemble_loss_and_grads(specialists, gate, samples, frame_size, hop, want_grads=True):
    """Mean negative SI-SDR through the soft (probability-weighted) mask.

    Gradients flow into every specialist (scaled by its gate probability)
    and into the gate through the softmax.
    """
    net_dtype = gate.net.dtype
    specs, feats = _batch_features(samples, frame_size, hop, net_dtype)
    mask_ctxs = []
    mask_stack = []
    for spec_model in specialists:
        masks_k, ctx_k = spec_model.net.forward_masks(feats)
        mask_stack.append(masks_k)
        mask_ctxs.append(ctx_k)
    stack = np.stack(mask_stack)  # (K, B, T, F)
    probs, _, gate_ctx = gate.net.forward_gate(feats)
    soft_masks = np.einsum("kbtf,bk->btf", stack, probs)
    loss, dmasks = _mask_path_loss(samples, specs, soft_masks, frame_size, hop,
                                   want_grads=want_grads)
    if not want_grads:
        return loss, None, None, probs
    spec_grads = []
    for k, spec_model in enumerate(specialists):
        dmask_k = (probs[:, k, None, None] * dmasks).astype(net_dtype)
        spec_grads.append(spec_model.net.backward_masks(dmask_k, mask_ctxs[k]))
    dprobs = np.einsum("btf,kbtf->bk", dmasks, stack.astype(np.float64))
    dlogits = scaled_softmax_backward(dprobs, probs.astype(np.float64), gate.net.lam)
    gate_grads = gate.net.backward_gate(dlogits.astype(net_dtype), gate_ctx)
    return loss, spec_grads, gate_grads, probs


# ----------------------------------------------------------------------
# validation metrics
# ----------------------------------------------------------------------


def mask_net_sisdri(net, samples, frame_size, hop, precomputed=None):
    """Mean SI-SDR improvement of one mask network over a sample list."""
    if precomputed is None:
        precomputed = _batch_features(samples, frame_size, hop, net.dtype)
    specs, feats = precomputed
    masks, _ = net.forward_masks(feats)
    cov = dsp.coverage_length(specs.shape[1], frame_size, hop)
    shat = dsp.istft_batch(masks * specs, frame_size, hop)
    vals = [
        metrics.si_sdr_improvement(smp.s[:cov], smp.x[:cov], shat[i])
        for i, smp in enumerate(samples)
    ]
    return float(np.mean(vals))


def gate_accuracy(net, feats, labels):
    probs, _, _ = net.forward_gate(feats)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def ensemble_hard_sisdri(ensemble, samples):
    """Mean SI-SDR improvement of the hard-gated ensemble over samples."""
    vals = []
    for smp in samples:
        shat, _ = denoise(ensemble, smp.x)
        cov = shat.shape[0]
        vals.append(metrics.si_sdr_improvement(smp.s[:cov], smp.x[:cov], shat))
    return float(np.mean(vals))


# ----------------------------------------------------------------------
# training loops
# ----------------------------------------------------------------------


class _EarlyStopper:
    """Tracks the best validation metric and the snapshot that achieved it."""

    def __init__(self, patience):
        self.patience = patience
        self.best = -np.inf
        self.best_step = -1
        self.best_snapshots = None
        self.stale = 0

    def update(self, step, metric, snapshot_fn):
        if metric > self.best:
            self.best = metric
            self.best_step = step
            self.best_snapshots = snapshot_fn()
            self.stale = 0
        else:
            self.stale += 1
        return self.stale > self.patience


def _check_finite(loss, step):
    if not np.isfinite(loss):
        raise RuntimeError(f"training diverged at step {step}: loss={loss}")


def _specialist_batch_spec(config, cluster_id):
    if cluster_id is None:
        return BatchSpec(size=config.batch_size, snr_set=config.snr_set,
                         latent=config.latent, seconds=config.snippet_seconds)
    if config.latent == "snr":
        fixed = sorted(config.snr_set)[cluster_id]
        return BatchSpec(size=config.batch_size, snr_set=config.snr_set, fixed_snr=fixed,
                         latent="snr", seconds=config.snippet_seconds)
    return BatchSpec(size=config.batch_size, snr_set=config.snr_set,
                     gender=GENDERS[cluster_id], latent="gender",
                     seconds=config.snippet_seconds)


def _rngs(seed, count):
    seqs = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(s) for s in seqs]


def _val_samples(corpus, spec, config, rng):
    samples = []
    for _ in range(config.val_batches):
        samples.extend(sample_batch(corpus, spec, rng, split="val"))
    return samples


def train_specialist(config, corpus, cluster_id=None):
    """Pre-train one specialist (or, with ``cluster_id=None``, the baseline).

    Returns the model with its best-validation parameters and the training
    history (per-step loss, validation trace, best step).
    """
    init_rng, batch_rng, val_rng = _rngs(config.seed, 3)
    model = SpecialistModel.build(config.hidden, config.layers, cluster_id=cluster_id,
                                  rng=init_rng, frame_size=config.frame_size, hop=config.hop)
    spec = _specialist_batch_spec(config, cluster_id)
    val_set = _val_samples(corpus, spec, config, val_rng)
    val_ctx = _batch_features(val_set, config.frame_size, config.hop, model.net.dtype)
    adam = Adam(model.net.param_items(), lr=config.learning_rate)
    stopper = _EarlyStopper(config.patience)
    history = {"loss": [], "val_steps": [], "val_sisdri": []}

    def validate(step):
        metric = mask_net_sisdri(model.net, val_set, config.frame_size, config.hop,
                                 precomputed=val_ctx)
        history["val_steps"].append(step)
        history["val_sisdri"].append(metric)
        return stopper.update(step, metric, model.net.snapshot)

    validate(0)
    for step in range(1, config.max_steps + 1):
        batch = sample_batch(corpus, spec, batch_rng, split="train")
        loss, grads = specialist_loss_and_grads(model.net, batch, config.frame_size, config.hop)
        _check_finite(loss, step)
        adam.step(model.net.param_items(), grads)
        history["loss"].append(loss)
        if step % config.validate_every == 0 and validate(step):
            break
    if history["val_steps"][-1] != len(history["loss"]):
        validate(len(history["loss"]))
    model.net.set_params(stopper.best_snapshots)
    history["best_step"] = stopper.best_step
    return model, history


def train_gating(config, corpus):
    """Train the gating classifier over all clusters of the configured latent."""
    init_rng, batch_rng, val_rng = _rngs(config.seed, 3)
    model = GatingModel.build(config.hidden, config.layers, config.k, lam=config.lam,
                              latent=config.latent, rng=init_rng,
                              frame_size=config.frame_size, hop=config.hop)
    spec = BatchSpec(size=config.batch_size, snr_set=config.snr_set,
                     latent=config.latent, seconds=config.snippet_seconds)
    val_set = _val_samples(corpus, spec, config, val_rng)
    _, val_feats = _batch_features(val_set, config.frame_size, config.hop, model.net.dtype)
    val_labels = np.array([smp.cluster_label for smp in val_set])
    adam = Adam(model.net.param_items(), lr=config.learning_rate)
    stopper = _EarlyStopper(config.patience)
    history = {"loss": [], "val_steps": [], "val_accuracy": []}

    def validate(step):
        acc = gate_accuracy(model.net, val_feats, val_labels)
        history["val_steps"].append(step)
        history["val_accuracy"].append(acc)
        return stopper.update(step, acc, model.net.snapshot)

    validate(0)
    for step in range(1, config.max_steps + 1):
        batch = sample_batch(corpus, spec, batch_rng, split="train")
        _, feats = _batch_features(batch, config.frame_size, config.hop, model.net.dtype)
        labels = np.array([smp.cluster_label for smp in batch])
        loss, grads, _ = gating_loss_and_grads(model.net, feats, labels)
        _check_finite(loss, step)
        adam.step(model.net.param_items(), grads)
        history["loss"].append(loss)
        if step % config.validate_every == 0 and validate(step):
            break
    if history["val_steps"][-1] != len(history["loss"]):
        validate(len(history["loss"]))
    model.net.set_params(stopper.best_snapshots)
    history["best_step"] = stopper.best_step
    return model, history


def finetune_ensemble(config, specialists, gate, corpus):
    """Jointly fine-tune pre-trained members through the soft ensemble mask.

    Inputs are left untouched; the returned ensemble holds fine-tuned copies
    and is set to hard gating for inference.  Validation (and best-snapshot
    selection) uses the hard-gated SI-SDR improvement, starting from the
    untrained combination, so fine-tuning never ends below the naive
    ensemble on the validation set.
    """
    _, batch_rng, val_rng = _rngs(config.seed, 3)
    tuned_specs = [
        SpecialistModel(s.net.clone(), cluster_id=s.cluster_id,
                        frame_size=s.frame_size, hop=s.hop)
        for s in specialists
    ]
    tuned_gate = GatingModel(gate.net.clone(), latent=gate.latent,
                             frame_size=gate.frame_size, hop=gate.hop,
                             decision_seconds=gate.decision_seconds)
    ensemble = EnsembleModel(tuned_specs, tuned_gate, mode="hard",
                             cluster_labels=config.cluster_labels())
    spec = BatchSpec(size=config.batch_size, snr_set=config.snr_set,
                     latent=config.latent, seconds=config.snippet_seconds)
    val_set = _val_samples(corpus, spec, config, val_rng)
    adams = {id(m.net): Adam(m.net.param_items(), lr=config.learning_rate)
             for m in tuned_specs + [tuned_gate]}
    stopper = _EarlyStopper(config.patience)
    history = {"loss": [], "val_steps": [], "val_sisdri": []}

    def snapshot_all():
        return {id(m.net): m.net.snapshot() for m in tuned_specs + [tuned_gate]}

    def validate(step):
        metric = ensemble_hard_sisdri(ensemble, val_set)
        history["val_steps"].append(step)
        history["val_sisdri"].append(metric)
        return stopper.update(step, metric, snapshot_all)

    validate(0)
    for step in range(1, config.max_steps + 1):
        batch = sample_batch(corpus, spec, batch_rng, split="train")
        loss, spec_grads, gate_grads, _ = ensemble_loss_and_grads(
            tuned_specs, tuned_gate, batch, config.frame_size, config.hop
        )
        _check_finite(loss, step)
        for model, grads in zip(tuned_specs, spec_grads):
            adams[id(model.net)].step(model.net.param_items(), grads)
        adams[id(tuned_gate.net)].step(tuned_gate.net.param_items(), gate_grads)
        history["loss"].append(loss)
        if step % config.validate_every == 0 and validate(step):
            break
    if history["val_steps"][-1] != len(history["loss"]):
        validate(len(history["loss"]))
    best = stopper.best_snapshots
    for member in tuned_specs + [tuned_gate]:
        member.net.set_params(best[id(member.net)])
    history["best_step"] = stopper.best_step
    return ensemble, history


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------


@dataclass
class ModelRow:
    name: str
    per_snr: dict
    overall: float
    learned_params: int
    active_params: int
    learned_macs: int
    active_macs: int


@dataclass
class GatingSection:
    model: str
    accuracy: float
    per_class_accuracy: list
    confusion: list  # rows = true cluster, columns = predicted


@dataclass
class EvalReport:
    n_mixtures: int
    snr_set: list
    rows: list = field(default_factory=list)
    gating: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "n_mixtures": self.n_mixtures,
            "snr_set": list(self.snr_set),
            "models": [
                {
                    "name": r.name,
                    "si_sdri_per_snr": r.per_snr,
                    "si_sdri_overall": r.overall,
                    "learned_params": r.learned_params,
                    "active_params": r.active_params,
                    "learned_macs_per_frame": r.learned_macs,
                    "active_macs_per_frame": r.active_macs,
                }
                for r in self.rows
            ],
            "gating": [
                {
                    "model": g.model,
                    "accuracy": g.accuracy,
                    "per_class_accuracy": g.per_class_accuracy,
                    "confusion": g.confusion,
                }
                for g in self.gating
            ],
        }

    def to_table(self):
        headers = ["model"] + [f"{lvl:g}dB" for lvl in self.snr_set] + [
            "mean", "params", "active", "macs/frame", "active macs"]
        lines = []
        for r in self.rows:
            cells = [r.name]
            cells += [f"{r.per_snr.get(f'{lvl:g}', float('nan')):7.2f}" for lvl in self.snr_set]
            cells += [f"{r.overall:7.2f}", str(r.learned_params), str(r.active_params),
                      str(r.learned_macs), str(r.active_macs)]
            lines.append(cells)
        widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
                  for i, h in enumerate(headers)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*headers)]
        out.append("  ".join("-" * w for w in widths))
        out.extend(fmt.format(*row) for row in lines)
        for g in self.gating:
            out.append("")
            out.append(f"gating [{g.model}] accuracy={g.accuracy:.3f} "
                       f"per-class={['%.3f' % a for a in g.per_class_accuracy]}")
            for i, row in enumerate(g.confusion):
                out.append(f"  true {i}: {row}")
        return "\n".join(out)


def build_test_mixtures(corpus, n_mixtures, snr_set=SNR_SET, seed=0, split="test"):
    """Deterministic full-duration test mixtures cycling through the SNR set."""
    if n_mixtures < 1:
        raise ValueError("n_mixtures must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    speech_items = corpus.speech(split)
    noise_items = corpus.noise(split)
    if not speech_items or not noise_items:
        raise ValueError(f"empty corpus for split {split!r}")
    levels = tuple(sorted(snr_set))
    mixtures = []
    for i in range(n_mixtures):
        sp = speech_items[int(rng.integers(0, len(speech_items)))]
        nz = noise_items[int(rng.integers(0, len(noise_items)))]
        snr = levels[i % len(levels)]
        mixtures.append(make_test_mixture(corpus, sp, nz, snr, rng, snr_set=levels))
    return mixtures


def _mixture_cluster(sample, latent, snr_levels):
    if latent == "gender":
        return GENDERS.index(sample.gender)
    return snr_levels.index(sample.snr_db)


def _sisdri_of(shat, sample):
    cov = shat.shape[0]
    return metrics.si_sdr_improvement(sample.s[:cov], sample.x[:cov], shat)


def _row_from_scores(name, scores, mixtures, snr_set, learned, active,
                     learned_macs, active_macs):
    per_snr = {}
    for lvl in snr_set:
        vals = [v for v, smp in zip(scores, mixtures) if smp.snr_db == lvl]
        per_snr[f"{lvl:g}"] = float(np.mean(vals)) if vals else float("nan")
    return ModelRow(name=name, per_snr=per_snr, overall=float(np.mean(scores)),
                    learned_params=learned, active_params=active,
                    learned_macs=learned_macs, active_macs=active_macs)


def _irm_estimate(sample, frame_size, hop):
    spec_x = dsp.stft(sample.x, frame_size, hop)
    mask = metrics.ideal_ratio_mask(
        np.abs(dsp.stft(sample.s, frame_size, hop)),
        np.abs(dsp.stft(sample.n, frame_size, hop)),
    )
    return dsp.istft(dsp.apply_mask(mask, spec_x), frame_size, hop)


def evaluate(models, corpus, n_mixtures, snr_set=SNR_SET, seed=0,
             frame_size=dsp.DEFAULT_FRAME_SIZE, hop=dsp.DEFAULT_HOP,
             include_irm=True, mixtures=None):
    """Score every model on shared test mixtures.

    ``models`` maps display names to model objects.  Ensembles additionally
    contribute a gating confusion section and an oracle-routing row (each
    mixture sent to its ground-truth-cluster specialist, the ensemble's
    performance ceiling with a perfect gate).  ``include_irm`` adds the
    ideal-ratio-mask oracle row.
    """
    snr_levels = tuple(sorted(snr_set))
    if mixtures is None:
        mixtures = build_test_mixtures(corpus, n_mixtures, snr_levels, seed=seed)
    report = EvalReport(n_mixtures=len(mixtures), snr_set=list(snr_levels))
    for name, model in models.items():
        scores = []
        predictions = []
        for smp in mixtures:
            shat, rep = denoise(model, smp.x)
            scores.append(_sisdri_of(shat, smp))
            if rep.chosen_specialist is not None:
                predictions.append(rep.chosen_specialist)
        if isinstance(model, EnsembleModel):
            learned, active = model.learned_params(), model.active_params()
            lmacs, amacs = model.learned_macs_per_frame(), model.active_macs_per_frame()
        else:
            learned = active = model.param_count()
            lmacs = amacs = model.macs_per_frame()
        report.rows.append(_row_from_scores(name, scores, mixtures, snr_levels,
                                            learned, active, lmacs, amacs))
        if isinstance(model, EnsembleModel):
            k = model.k
            truth = [_mixture_cluster(smp, model.latent, snr_levels) for smp in mixtures]
            confusion = [[0] * k for _ in range(k)]
            for t, p in zip(truth, predictions):
                confusion[t][p] += 1
            correct = sum(confusion[i][i] for i in range(k))
            per_class = [
                confusion[i][i] / max(1, sum(confusion[i])) for i in range(k)
            ]
            report.gating.append(GatingSection(
                model=name, accuracy=correct / len(mixtures),
                per_class_accuracy=per_class, confusion=confusion,
            ))
            oracle_scores = []
            for smp, true_k in zip(mixtures, truth):
                shat, _ = denoise(model.specialists[true_k], smp.x)
                oracle_scores.append(_sisdri_of(shat, smp))
            report.rows.append(_row_from_scores(
                f"{name}/oracle_routing", oracle_scores, mixtures, snr_levels,
                learned, active, lmacs, amacs))
    if include_irm:
        irm_scores = [
            _sisdri_of(_irm_estimate(smp, frame_size, hop), smp) for smp in mixtures
        ]
        report.rows.append(_row_from_scores("oracle_irm", irm_scores, mixtures,
                                            snr_levels, 0, 0, 0, 0))
    return report
