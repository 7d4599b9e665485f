"""Model fitting with a pairwise ranking loss and exact analytic gradients.

Gradients flow through the adjustment head, the concatenation projection,
per-head softmax attention, and the input projection; the attention-PageRank
term is treated as a constant (stop-gradient), a deliberate simplification
that keeps the additive centrality term inspectable without differentiating
power iteration. The whole loop is single-threaded and fully determined by
(seed, data, config).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import COMBINE_MODES, SCALE_MODES, AttentionModel, AttentionOutput, combine_scores, forward, init_model
from .errors import CheckpointError, DataFormatError
from .features import FeatureScaler, build_feature_matrix, fit_scaler
from .ingest import ChangeRequest
from .report import mean_recall

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "impactrank-checkpoint"
CHECKPOINT_VERSION = 1

LOSS_MODES = ("pairwise", "pairwise_logistic", "pointwise")


@dataclass
class LabeledCase:
    """One change request with its candidate features and ground truth."""

    request: ChangeRequest
    features: np.ndarray
    deterministic: np.ndarray
    ground_truth: set[int]
    candidate_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.features.shape[0]
        if len(self.deterministic) != n:
            raise DataFormatError("deterministic score length does not match candidates")
        if not self.ground_truth:
            raise DataFormatError("ground truth must be non-empty")
        if not self.ground_truth <= set(range(n)):
            raise DataFormatError("ground truth indices out of range")
        if len(self.ground_truth) >= n:
            raise DataFormatError("case needs at least one negative candidate")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    margin: float = 1.0
    seed: int = 0
    loss_mode: str = "pairwise"
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    head_count: int = 4
    hidden_dim: int = 64
    scale_mode: str = "sqrt_dk"
    combine_mode: str = "additive"
    pagerank_weight: float = 0.1

    def __post_init__(self) -> None:
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.split}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.scale_mode not in SCALE_MODES:
            raise ValueError(f"scale_mode must be one of {SCALE_MODES}")
        if self.combine_mode not in COMBINE_MODES:
            raise ValueError(f"combine_mode must be one of {COMBINE_MODES}")


def temporal_split(
    cases: list[LabeledCase],
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> tuple[list[LabeledCase], list[LabeledCase], list[LabeledCase]]:
    """Chronological train/validation/test partition.

    Cases are stable-sorted by request timestamp, so equal timestamps keep
    their input order and boundary ties resolve into the earlier split.
    Sizes follow the floor-then-remainder rule: floor(n * train), then
    floor(n * val), the rest is test.
    """
    if len(cases) < 3:
        raise DataFormatError("temporal split requires at least 3 cases")
    ordered = sorted(cases, key=lambda c: c.request.timestamp)
    n = len(ordered)
    n_train = math.floor(n * fractions[0])
    n_val = math.floor(n * fractions[1])
    return ordered[:n_train], ordered[n_train : n_train + n_val], ordered[n_train + n_val :]


# ---------------------------------------------------------------------------
# Losses over final scores
# ---------------------------------------------------------------------------

def pairwise_loss(
    scores: np.ndarray,
    ground_truth: set[int],
    margin: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Mean hinge over all positive/negative pairs and its exact subgradient.

    loss = mean over (p, n) of max(0, margin - (s_p - s_n)); active pairs
    contribute -1/|pairs| to the positive and +1/|pairs| to the negative,
    inactive pairs contribute nothing.
    """
    scores = np.asarray(scores, dtype=float)
    pos = sorted(ground_truth)
    neg = [i for i in range(len(scores)) if i not in ground_truth]
    if not pos or not neg:
        raise ValueError("pairwise loss needs at least one positive and one negative")
    diffs = scores[pos][:, None] - scores[neg][None, :]
    hinge = np.maximum(0.0, margin - diffs)
    pairs = hinge.size
    active = hinge > 0.0
    grad = np.zeros_like(scores)
    grad[pos] = -active.sum(axis=1) / pairs
    grad[neg] = active.sum(axis=0) / pairs
    return float(hinge.sum() / pairs), grad


def pairwise_logistic_loss(
    scores: np.ndarray,
    ground_truth: set[int],
) -> tuple[float, np.ndarray]:
    """Smooth pairwise alternative: mean log(1 + exp(-(s_p - s_n)))."""
    scores = np.asarray(scores, dtype=float)
    pos = sorted(ground_truth)
    neg = [i for i in range(len(scores)) if i not in ground_truth]
    if not pos or not neg:
        raise ValueError("pairwise loss needs at least one positive and one negative")
    diffs = scores[pos][:, None] - scores[neg][None, :]
    loss = np.logaddexp(0.0, -diffs).mean()
    # d/d(diff) of log(1 + exp(-diff)) is -sigmoid(-diff)
    slope = -1.0 / (1.0 + np.exp(diffs))
    pairs = diffs.size
    grad = np.zeros_like(scores)
    grad[pos] = slope.sum(axis=1) / pairs
    grad[neg] = -slope.sum(axis=0) / pairs
    return float(loss), grad


def pointwise_loss(scores: np.ndarray, ground_truth: set[int]) -> tuple[float, np.ndarray]:
    """Regression ablation: mean squared error of scores against 0/1 labels."""
    scores = np.asarray(scores, dtype=float)
    labels = np.zeros_like(scores)
    labels[sorted(ground_truth)] = 1.0
    residual = scores - labels
    return float((residual**2).mean()), 2.0 * residual / len(scores)


def case_loss(
    scores: np.ndarray,
    ground_truth: set[int],
    loss_mode: str,
    margin: float,
) -> tuple[float, np.ndarray]:
    if loss_mode == "pairwise":
        return pairwise_loss(scores, ground_truth, margin)
    if loss_mode == "pairwise_logistic":
        return pairwise_logistic_loss(scores, ground_truth)
    if loss_mode == "pointwise":
        return pointwise_loss(scores, ground_truth)
    raise ValueError(f"unknown loss mode {loss_mode!r}")


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def backward(
    output: AttentionOutput,
    model: AttentionModel,
    grad_adjustments: np.ndarray,
    grad_centrality: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of all parameter matrices for an upstream dL/dA.

    ``grad_centrality`` is accepted for interface completeness but ignored:
    the attention-PageRank term is a stop-gradient by design. ReLU uses the
    0-subgradient at 0. Requires the cache produced by :func:`forward`.
    """
    if output.cache is None:
        raise ValueError("missing cached forward state; run forward() on this input first")
    del grad_centrality
    cache = output.cache
    x, hidden = cache["x"], cache["h"]
    grad_a = np.asarray(grad_adjustments, dtype=float).reshape(-1, 1)

    grads: dict[str, np.ndarray] = {}
    grads["w_adjust_out"] = cache["relu"].T @ grad_a
    d_relu = grad_a @ model.w_adjust_out.T
    d_pre = d_relu * (cache["pre_relu"] > 0.0)
    grads["w_adjust_hidden"] = cache["attended"].T @ d_pre
    d_attended = d_pre @ model.w_adjust_hidden.T
    grads["w_concat"] = cache["concat"].T @ d_attended
    d_concat = d_attended @ model.w_concat.T

    scale = model.logit_scale()
    head_dim = model.head_dim
    d_hidden = np.zeros_like(hidden)
    for h in range(model.head_count):
        d_out = d_concat[:, h * head_dim : (h + 1) * head_dim]
        attn = cache["attn"][h]
        q, k, v = cache["queries"][h], cache["keys"][h], cache["values"][h]
        d_attn = d_out @ v.T
        d_v = attn.T @ d_out
        # softmax rows: dL/dlogits = a * (dL/da - sum_j dL/da_j * a_j)
        d_logits = attn * (d_attn - (d_attn * attn).sum(axis=1, keepdims=True))
        d_logits /= scale
        d_q = d_logits @ k
        d_k = d_logits.T @ q
        grads[f"w_query_{h}"] = hidden.T @ d_q
        grads[f"w_key_{h}"] = hidden.T @ d_k
        grads[f"w_value_{h}"] = hidden.T @ d_v
        d_hidden += d_q @ model.w_query[h].T + d_k @ model.w_key[h].T + d_v @ model.w_value[h].T

    grads["w_proj"] = x.T @ d_hidden
    return grads


def grad_scores_to_adjustments(
    grad_scores: np.ndarray,
    deterministic: np.ndarray,
    adjustments: np.ndarray,
    combine_mode: str,
) -> np.ndarray:
    """Map dL/d(final score) to dL/dA for the configured combination."""
    if combine_mode in ("additive", "attention_only"):
        return np.asarray(grad_scores, dtype=float)
    if combine_mode == "multiplicative":
        sig = 1.0 / (1.0 + np.exp(-np.asarray(adjustments, dtype=float)))
        return grad_scores * deterministic * sig * (1.0 - sig)
    raise ValueError(f"unknown combine mode {combine_mode!r}")


# ---------------------------------------------------------------------------
# Optimizer and training loop
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    first: dict[str, np.ndarray]
    second: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: AttentionModel) -> "AdamState":
        return cls(
            first={k: np.zeros_like(v) for k, v in model.parameters().items()},
            second={k: np.zeros_like(v) for k, v in model.parameters().items()},
        )


def adam_step(
    model: AttentionModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    state.step += 1
    correction1 = 1.0 - config.beta1**state.step
    correction2 = 1.0 - config.beta2**state.step
    for name, param in model.parameters().items():
        g = grads[name]
        state.first[name] = config.beta1 * state.first[name] + (1.0 - config.beta1) * g
        state.second[name] = config.beta2 * state.second[name] + (1.0 - config.beta2) * g * g
        m_hat = state.first[name] / correction1
        v_hat = state.second[name] / correction2
        model.set_parameter(name, param - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps))


def case_scores(case: LabeledCase, model: AttentionModel) -> tuple[np.ndarray, AttentionOutput]:
    """Final combined scores of one case under a model (scaler applied)."""
    x = build_feature_matrix(case.features, model.scaler)
    output = forward(x, model)
    final = combine_scores(
        case.deterministic,
        output.adjustments,
        output.attention_pagerank,
        mode=model.combine_mode,
        pagerank_weight=model.pagerank_weight,
    )
    return final, output


def case_ranking(case: LabeledCase, model: AttentionModel | None) -> list[int]:
    """Candidate indices in score order; index order breaks ties.

    ``model=None`` ranks by deterministic scores alone (the baseline mode).
    """
    if model is None:
        scores = np.asarray(case.deterministic, dtype=float)
    else:
        scores, _ = case_scores(case, model)
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def evaluate_recall(
    cases: list[LabeledCase],
    model: AttentionModel | None,
    k: int,
) -> float:
    """Mean fractional recall@k over cases (deterministic when model=None)."""
    pairs = [(case_ranking(case, model), case.ground_truth) for case in cases]
    fraction, _ = mean_recall(pairs, k)
    return fraction


def train(
    cases: list[LabeledCase],
    config: TrainConfig,
) -> tuple[AttentionModel, list[dict]]:
    """Fit an attention model on temporally split labeled cases.

    One Adam step per case, in a seed-shuffled order per epoch; the scaler is
    fitted on the training split's stacked feature rows only. After each
    epoch the mean fractional Recall@50 on the validation split is logged and
    the best checkpoint is retained (ties broken toward lower training loss,
    since Recall@50 saturates on candidate sets of at most 60 files). A
    non-finite loss aborts and returns the last good checkpoint.
    """
    train_cases, val_cases, _ = temporal_split(cases, config.split)
    if not train_cases:
        raise DataFormatError("temporal split produced an empty training set")

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    model = init_model(
        np.random.default_rng(seeds[0]),
        head_count=config.head_count,
        hidden_dim=config.hidden_dim,
        input_dim=cases[0].features.shape[1],
        scale_mode=config.scale_mode,
        combine_mode=config.combine_mode,
        pagerank_weight=config.pagerank_weight,
    )
    model.scaler = fit_scaler(np.vstack([c.features for c in train_cases]))
    shuffle_rng = np.random.default_rng(seeds[1])

    best = model.copy()
    best_key: tuple[float, float] | None = None
    log_rows: list[dict] = []
    adam = AdamState.for_model(model)

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_cases))
        epoch_loss = 0.0
        diverged = False
        for case_index in order:
            case = train_cases[case_index]
            final, output = case_scores(case, model)
            loss, grad_scores = case_loss(final, case.ground_truth, config.loss_mode, config.margin)
            if not np.isfinite(loss):
                diverged = True
                break
            grad_a = grad_scores_to_adjustments(
                grad_scores, case.deterministic, output.adjustments, model.combine_mode
            )
            grads = backward(output, model, grad_a)
            adam_step(model, grads, adam, config)
            epoch_loss += loss
        if diverged or not all(np.isfinite(p).all() for p in model.parameters().values()):
            log.warning("training diverged at epoch %d; returning last good checkpoint", epoch)
            break
        epoch_loss /= max(1, len(train_cases))
        val_recall50 = evaluate_recall(val_cases, model, 50) if val_cases else 0.0
        log_rows.append({"epoch": epoch, "loss": epoch_loss, "val_recall50": val_recall50})
        key = (val_recall50, -epoch_loss)
        if best_key is None or key > best_key:
            best_key = key
            best = model.copy()

    best.scaler = model.scaler
    return best, log_rows


def write_training_log(log_rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in log_rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Checkpoint format: one JSON header line, then named float64 matrices
# ---------------------------------------------------------------------------

def save_model(model: AttentionModel, path: str | Path) -> None:
    """Serialize a model; little-endian float64, row-major, versioned header."""
    params = model.parameters()
    manifest = [{"name": name, "shape": list(value.shape)} for name, value in params.items()]
    extra: list[tuple[str, np.ndarray]] = []
    if model.scaler is not None:
        extra = [("scaler_mean", model.scaler.mean), ("scaler_std", model.scaler.std)]
        manifest += [{"name": name, "shape": list(value.shape)} for name, value in extra]
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "head_count": model.head_count,
        "hidden_dim": model.hidden_dim,
        "input_dim": model.input_dim,
        "scale_mode": model.scale_mode,
        "combine_mode": model.combine_mode,
        "pagerank_weight": model.pagerank_weight,
        "has_scaler": model.scaler is not None,
        "matrices": manifest,
    }
    with open(path, "wb") as handle:
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, value in list(params.items()) + extra:
            handle.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_model(path: str | Path) -> AttentionModel:
    """Load a checkpoint; any structural inconsistency is fatal."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    newline = blob.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"corrupt checkpoint (missing header): {path}")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint (bad header): {path}") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not an {CHECKPOINT_FORMAT} file: {path}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")

    body = blob[newline + 1 :]
    expected = sum(int(np.prod(m["shape"])) for m in header["matrices"]) * 8
    if len(body) != expected:
        raise CheckpointError(f"corrupt checkpoint (expected {expected} data bytes, got {len(body)}): {path}")

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["matrices"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arrays[entry["name"]] = (
            np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        )
        offset += count * 8

    head_count = header["head_count"]
    hidden_dim = header["hidden_dim"]
    head_dim = hidden_dim // head_count
    try:
        model = AttentionModel(
            w_proj=arrays["w_proj"],
            w_query=[arrays[f"w_query_{h}"] for h in range(head_count)],
            w_key=[arrays[f"w_key_{h}"] for h in range(head_count)],
            w_value=[arrays[f"w_value_{h}"] for h in range(head_count)],
            w_concat=arrays["w_concat"],
            w_adjust_hidden=arrays["w_adjust_hidden"],
            w_adjust_out=arrays["w_adjust_out"],
            scale_mode=header["scale_mode"],
            combine_mode=header["combine_mode"],
            pagerank_weight=header["pagerank_weight"],
        )
    except KeyError as exc:
        raise CheckpointError(f"corrupt checkpoint (missing matrix {exc}): {path}") from exc
    if model.w_proj.shape != (header["input_dim"], hidden_dim):
        raise CheckpointError(f"checkpoint shape mismatch for w_proj: {model.w_proj.shape}")
    for h in range(head_count):
        if model.w_query[h].shape != (hidden_dim, head_dim):
            raise CheckpointError(f"checkpoint shape mismatch for w_query_{h}")
    if header["has_scaler"]:
        model.scaler = FeatureScaler(mean=arrays["scaler_mean"], std=arrays["scaler_std"])
    return model
