"""Multi-head self-attention refinement over candidate feature matrices.

Candidates attend to each other within one batch: the scaled feature matrix
is projected into a hidden space, run through multi-head scaled dot-product
attention, and mapped to one scalar adjustment per file. The head-averaged
attention matrix doubles as a weighted directed graph whose PageRank supplies
a centrality term for the final score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_DIM, FeatureScaler
from .graph import DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL, pagerank_stochastic

SCALE_MODES = ("sqrt_dk", "dk")
COMBINE_MODES = ("additive", "multiplicative", "attention_only")


@dataclass
class AttentionModel:
    """All learnable matrices plus the fitted feature scaler.

    ``w_query/w_key/w_value`` hold one (hidden_dim x head_dim) matrix per
    head with head_dim = hidden_dim / head_count. ``scale_mode`` selects the
    attention logit denominator: sqrt(head_dim) by convention, or head_dim
    itself for fidelity experiments with the plain-d_k variant.
    """

    w_proj: np.ndarray
    w_query: list[np.ndarray]
    w_key: list[np.ndarray]
    w_value: list[np.ndarray]
    w_concat: np.ndarray
    w_adjust_hidden: np.ndarray
    w_adjust_out: np.ndarray
    scale_mode: str = "sqrt_dk"
    combine_mode: str = "additive"
    pagerank_weight: float = 0.1
    scaler: FeatureScaler | None = None

    @property
    def head_count(self) -> int:
        return len(self.w_query)

    @property
    def hidden_dim(self) -> int:
        return self.w_proj.shape[1]

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.head_count

    @property
    def input_dim(self) -> int:
        return self.w_proj.shape[0]

    def logit_scale(self) -> float:
        return float(np.sqrt(self.head_dim)) if self.scale_mode == "sqrt_dk" else float(self.head_dim)

    def parameters(self) -> dict[str, np.ndarray]:
        """Named parameter matrices in fixed, checkpoint-stable order."""
        params: dict[str, np.ndarray] = {"w_proj": self.w_proj}
        for h in range(self.head_count):
            params[f"w_query_{h}"] = self.w_query[h]
            params[f"w_key_{h}"] = self.w_key[h]
            params[f"w_value_{h}"] = self.w_value[h]
        params["w_concat"] = self.w_concat
        params["w_adjust_hidden"] = self.w_adjust_hidden
        params["w_adjust_out"] = self.w_adjust_out
        return params

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        if name == "w_proj":
            self.w_proj = value
        elif name == "w_concat":
            self.w_concat = value
        elif name == "w_adjust_hidden":
            self.w_adjust_hidden = value
        elif name == "w_adjust_out":
            self.w_adjust_out = value
        else:
            kind, index = name.rsplit("_", 1)
            bank = {"w_query": self.w_query, "w_key": self.w_key, "w_value": self.w_value}[kind]
            bank[int(index)] = value

    def copy(self) -> "AttentionModel":
        return AttentionModel(
            w_proj=self.w_proj.copy(),
            w_query=[m.copy() for m in self.w_query],
            w_key=[m.copy() for m in self.w_key],
            w_value=[m.copy() for m in self.w_value],
            w_concat=self.w_concat.copy(),
            w_adjust_hidden=self.w_adjust_hidden.copy(),
            w_adjust_out=self.w_adjust_out.copy(),
            scale_mode=self.scale_mode,
            combine_mode=self.combine_mode,
            pagerank_weight=self.pagerank_weight,
            scaler=self.scaler,
        )


@dataclass
class AttentionOutput:
    """Forward-pass results plus cached intermediates for the backward pass."""

    adjustments: np.ndarray
    averaged_attention: np.ndarray
    per_head_attention: np.ndarray
    attention_pagerank: np.ndarray
    attended: np.ndarray
    cache: dict | None = field(default=None, repr=False)


def init_model(
    seed: int | np.random.Generator,
    head_count: int = 4,
    hidden_dim: int = 64,
    input_dim: int = FEATURE_DIM,
    scale_mode: str = "sqrt_dk",
    combine_mode: str = "additive",
    pagerank_weight: float = 0.1,
) -> AttentionModel:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.

    Matrices are drawn in a fixed order from one generator, so a seed fully
    determines the model.
    """
    if hidden_dim % head_count != 0:
        raise ValueError(f"hidden_dim {hidden_dim} not divisible by head_count {head_count}")
    if scale_mode not in SCALE_MODES:
        raise ValueError(f"scale_mode must be one of {SCALE_MODES}")
    if combine_mode not in COMBINE_MODES:
        raise ValueError(f"combine_mode must be one of {COMBINE_MODES}")
    rng = np.random.default_rng(seed)
    head_dim = hidden_dim // head_count

    def draw(rows: int, cols: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(rows)
        return rng.uniform(-bound, bound, size=(rows, cols))

    w_proj = draw(input_dim, hidden_dim)
    w_query, w_key, w_value = [], [], []
    for _ in range(head_count):
        w_query.append(draw(hidden_dim, head_dim))
        w_key.append(draw(hidden_dim, head_dim))
        w_value.append(draw(hidden_dim, head_dim))
    return AttentionModel(
        w_proj=w_proj,
        w_query=w_query,
        w_key=w_key,
        w_value=w_value,
        w_concat=draw(hidden_dim, hidden_dim),
        w_adjust_hidden=draw(hidden_dim, hidden_dim),
        w_adjust_out=draw(hidden_dim, 1),
        scale_mode=scale_mode,
        combine_mode=combine_mode,
        pagerank_weight=pagerank_weight,
    )


def zero_model(
    head_count: int = 4,
    hidden_dim: int = 64,
    input_dim: int = FEATURE_DIM,
    **kwargs,
) -> AttentionModel:
    """All-zero parameters: adjustments vanish and attention is uniform."""
    model = init_model(0, head_count, hidden_dim, input_dim, **kwargs)
    for name, value in model.parameters().items():
        model.set_parameter(name, np.zeros_like(value))
    return model


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward(
    x: np.ndarray,
    model: AttentionModel,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> AttentionOutput:
    """Full forward pass from a scaled N x 20 matrix to per-file adjustments.

    Per head: softmax(Q K^T / scale) V. Head outputs are concatenated and
    projected, then a ReLU layer maps the attended representation to one
    scalar adjustment per file. The head-averaged attention matrix feeds a
    PageRank pass. Pure function of (x, model); safe to call concurrently.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"expected an N x {model.input_dim} matrix with N >= 1, got {x.shape}")
    if x.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} columns, got {x.shape[1]}")
    finite_rows = np.isfinite(x).all(axis=1)
    if not finite_rows.all():
        raise ValueError(f"non-finite feature values in row {int(np.argmin(finite_rows))}")

    h = x @ model.w_proj
    scale = model.logit_scale()
    heads = []
    attn_stack = []
    queries, keys, values = [], [], []
    for w_q, w_k, w_v in zip(model.w_query, model.w_key, model.w_value):
        q, k, v = h @ w_q, h @ w_k, h @ w_v
        attn = softmax_rows(q @ k.T / scale)
        heads.append(attn @ v)
        attn_stack.append(attn)
        queries.append(q)
        keys.append(k)
        values.append(v)

    concat = np.concatenate(heads, axis=1)
    attended = concat @ model.w_concat
    pre_relu = attended @ model.w_adjust_hidden
    relu = np.maximum(pre_relu, 0.0)
    adjustments = (relu @ model.w_adjust_out).ravel()

    per_head = np.stack(attn_stack)
    averaged = per_head.mean(axis=0)
    centrality = pagerank_stochastic(averaged, damping=damping, tol=tol, max_iter=max_iter)

    cache = {
        "x": x,
        "h": h,
        "queries": queries,
        "keys": keys,
        "values": values,
        "attn": attn_stack,
        "concat": concat,
        "attended": attended,
        "pre_relu": pre_relu,
        "relu": relu,
    }
    return AttentionOutput(
        adjustments=adjustments,
        averaged_attention=averaged,
        per_head_attention=per_head,
        attention_pagerank=centrality,
        attended=attended,
        cache=cache,
    )


def attention_pagerank(
    averaged_attention: np.ndarray,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """PageRank over the head-averaged attention matrix.

    Rows are already stochastic (softmax output), so there are no dangling
    nodes; edge i -> j carries the attention weight of file i on file j.
    """
    return pagerank_stochastic(averaged_attention, damping=damping, tol=tol, max_iter=max_iter)


def _sigmoid(values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    positive = values >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-values[positive]))
    exp = np.exp(values[~positive])
    out[~positive] = exp / (1.0 + exp)
    return out


def combine_scores(
    deterministic: np.ndarray,
    adjustments: np.ndarray,
    centrality: np.ndarray,
    mode: str = "additive",
    pagerank_weight: float = 0.1,
) -> np.ndarray:
    """Final scores from the deterministic baseline and attention outputs.

    additive:        s_d + A + pagerank_weight * centrality
    multiplicative:  s_d * (1 + sigmoid(A))          (ablation)
    attention_only:  A + pagerank_weight * centrality (ablation)
    """
    deterministic = np.asarray(deterministic, dtype=float)
    adjustments = np.asarray(adjustments, dtype=float)
    centrality = np.asarray(centrality, dtype=float)
    if not (deterministic.shape == adjustments.shape == centrality.shape):
        raise ValueError(
            "score vector length mismatch: "
            f"{deterministic.shape}, {adjustments.shape}, {centrality.shape}"
        )
    if mode == "additive":
        return deterministic + adjustments + pagerank_weight * centrality
    if mode == "multiplicative":
        return deterministic * (1.0 + _sigmoid(adjustments))
    if mode == "attention_only":
        return adjustments + pagerank_weight * centrality
    raise ValueError(f"unknown combine mode {mode!r}")
