"""Joint training: length-bucketed batching, loss weighting, the plateau
learning-rate schedule, fine-tuning, and the self-training pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .evaluate import attachment_scores
from .model import JointModel


def sentence_weight(n):
    """Log-length weight, clamped at ln 2 so one-word sentences still
    contribute to the loss."""
    if n < 1:
        raise ValueError("sentence_weight needs n >= 1")
    return max(math.log(n), math.log(2.0))


def make_batches(tb, batch_words, seed, epoch):
    """Batches of similar-length sentences holding at most batch_words
    tokens each (an over-long sentence gets its own batch); the batch order
    is shuffled deterministically per (seed, epoch)."""
    order = sorted(range(len(tb.sentences)), key=lambda i: (len(tb.sentences[i]), i))
    batches = []
    current, current_words = [], 0
    for i in order:
        n = len(tb.sentences[i])
        if current and current_words + n > batch_words:
            batches.append(current)
            current, current_words = [], 0
        current.append(i)
        current_words += n
    if current:
        batches.append(current)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))
    rng.shuffle(batches)
    return batches


def joint_loss(task_losses, cfg):
    """Weighted sum of the per-task losses.

    When a task is inactive its weight is redistributed proportionally
    over the active ones, so the total weight mass stays constant.  L2
    terms enter through the optimizer, not here.
    """
    if not task_losses:
        raise ValueError("no active task losses")
    weights = cfg.loss_weights
    total_all = sum(weights.values())
    total_active = sum(weights[t] for t in task_losses)
    factor = total_all / total_active
    out = None
    for task, loss in task_losses.items():
        term = ad.scale(loss, weights[task] * factor)
        out = term if out is None else ad.add(out, term)
    return out


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    dev_las: float | None
    lr: float


class PlateauSchedule:
    """Halve the learning rate after `patience` evaluations without
    improvement, at most `reductions_max` times; one further stale window
    stops training."""

    def __init__(self, patience, reductions_max):
        self.patience = patience
        self.reductions_max = reductions_max
        self.best = float("-inf")
        self.stale = 0
        self.reductions = 0

    def update(self, score):
        """Returns 'improved', 'continue', 'reduce', or 'stop'."""
        if score > self.best + 1e-12:
            self.best = score
            self.stale = 0
            return "improved"
        self.stale += 1
        if self.stale < self.patience:
            return "continue"
        if self.reductions >= self.reductions_max:
            return "stop"
        self.reductions += 1
        self.stale = 0
        return "reduce"


@dataclass
class Checkpoint:
    """Everything needed to restore a trained model in memory."""

    params: dict
    config: object
    lexicon: object
    schema: object
    embeddings: object
    epoch: int = 0
    best_score: float = float("-inf")
    adam: dict | None = None
    history: list = field(default_factory=list)

    def build_model(self):
        model = JointModel(self.config, self.lexicon, self.schema, self.embeddings)
        model.restore(self.params)
        return model


def _checkpoint(model, epoch, best_score, adam=None, history=None, params=None):
    return Checkpoint(
        params=params if params is not None else model.snapshot(),
        config=model.cfg,
        lexicon=model.lexicon,
        schema=model.schema,
        embeddings=model.embeddings,
        epoch=epoch,
        best_score=best_score,
        adam=adam,
        history=list(history or []),
    )


def _adam_snapshot(state):
    return {
        "t": state.t,
        "lr": state.lr,
        "m": [m.copy() for m in state.m],
        "v": [v.copy() for v in state.v],
    }


def train_batch(model, encs, batch, cfg, adam, l2):
    """Accumulate gradients over one batch (in fixed sentence order) and
    apply a single ADAM step.  Returns (weighted loss sum, weight sum)."""
    model.zero_grads()
    weights = [sentence_weight(encs[i].n) for i in batch]
    weight_sum = sum(weights)
    loss_sum = 0.0
    for w, i in zip(weights, batch):
        with ad.Tape():
            losses, _ = model.sentence_losses(encs[i], train=True)
            scaled = ad.scale(joint_loss(losses, cfg), w / weight_sum)
        ad.backward(scaled)
        loss_sum += scaled.item() * weight_sum  # undo the batch normalization
    adam_step_l2 = l2 if l2 else None
    ad.adam_step(adam, adam_step_l2)
    return loss_sum, weight_sum


def fit(model, train_tb, dev_tb, cfg, max_epochs=None, epoch_callback=None, log=None):
    """Train up to max_epochs with dev-LAS plateau scheduling.

    The validation score is dev LAS; without a dev set the negated
    training loss, smoothed over the last three epochs, stands in.  The
    learning rate halves after plateau_patience stale evaluations, at most
    lr_reductions_max times; one more stale window stops training.
    Returns the checkpoint of the best evaluation.
    """
    if not train_tb.sentences:
        raise ValueError("empty training set")
    epochs = cfg.max_epochs if max_epochs is None else max_epochs
    encs = [model.encode(s) for s in train_tb.sentences]
    adam = ad.AdamState(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    l2 = model.l2_terms()

    schedule = PlateauSchedule(cfg.plateau_patience, cfg.lr_reductions_max)
    best_params = model.snapshot()
    best_epoch = 0
    loss_history = []
    history = []

    for epoch in range(1, epochs + 1):
        batches = make_batches(train_tb, cfg.batch_words, cfg.seed, epoch)
        num, den = 0.0, 0.0
        for batch in batches:
            loss_sum, weight_sum = train_batch(model, encs, batch, cfg, adam, l2)
            num += loss_sum
            den += weight_sum
        mean_loss = num / den
        loss_history.append(mean_loss)

        if dev_tb is not None and dev_tb.sentences:
            pred = model.predict_treebank(dev_tb)
            _, las = attachment_scores(dev_tb, pred)
            score = las
            dev_las = las
        else:
            window = loss_history[-3:]
            score = -sum(window) / len(window)
            dev_las = None
        stats = EpochStats(epoch, mean_loss, dev_las, adam.lr)
        history.append(stats)
        if log:
            dev_part = f" dev_las={dev_las:.4f}" if dev_las is not None else ""
            log(f"epoch {epoch:3d} loss={mean_loss:.6f}{dev_part} lr={adam.lr:g}")
        if epoch_callback:
            epoch_callback(model, stats)

        verdict = schedule.update(score)
        if verdict == "improved":
            best_params = model.snapshot()
            best_epoch = epoch
        elif verdict == "reduce":
            adam.lr /= 2.0
        elif verdict == "stop":
            break

    model.restore(best_params)
    return _checkpoint(model, best_epoch, schedule.best,
                       adam=_adam_snapshot(adam), history=history, params=best_params)


def fine_tune(checkpoint, tb, cfg, dev_tb=None, max_epochs=None, log=None):
    """Continue training from a checkpoint with a fresh optimizer and a
    fresh learning-rate schedule."""
    if (max_epochs if max_epochs is not None else cfg.max_epochs) == 0:
        return checkpoint
    model = checkpoint.build_model()
    return fit(model, tb, dev_tb, cfg, max_epochs=max_epochs, log=log)


def self_train(model, gold_tb, raw_tb, cfg, dev_tb=None, log=None):
    """Annotate a raw corpus with a trained model, train a fresh model for
    one epoch on the silver data, then fine-tune it on gold.

    Returns (checkpoint, silver treebank).
    """
    if not raw_tb.sentences:
        raise ValueError("self-training needs a non-empty raw corpus")
    if log:
        log(f"annotating {len(raw_tb.sentences)} raw sentences")
    silver = model.predict_treebank(raw_tb)
    fresh = model.clone_architecture(seed=model.seed + 1)
    if log:
        log("silver epoch")
    silver_ckpt = fit(fresh, silver, None, cfg, max_epochs=1, log=log)
    if log:
        log("fine-tuning on gold")
    final = fine_tune(silver_ckpt, gold_tb, cfg, dev_tb=dev_tb, log=log)
    return final, silver


def mean_cycle_penalty(model, encs):
    """Average cycle-penalty term over encoded sentences, evaluated without
    training noise (used by the ablation harness)."""
    total = 0.0
    for enc in encs:
        _, parts = model.sentence_losses(enc, train=False)
        total += parts["arc_penalty"].item()
    return total / len(encs)
