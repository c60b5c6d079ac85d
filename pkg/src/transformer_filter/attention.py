"""Softmax self-attention realizing a Gaussian-kernel regression estimator.

A quadratic feature embedding lets one fixed attention matrix reproduce the
kernel logits ``-(u - v)' Sigma (u - v)`` as a bilinear form, so a single
attention block with a fixed output matrix computes the Nadaraya-Watson
estimator exactly.  Both routes are implemented independently; tests hold
them against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, as_vector, is_symmetric, require_square


def embedding_dim(d: int) -> int:
    """Feature dimension of :func:`embed_phi`: constant + linear + all products."""
    if d < 1:
        raise ValueError("source dimension must be positive")
    return 1 + d + d * d


def embed_phi(z) -> np.ndarray:
    """Quadratic feature map [1, z_1..z_d, z_1 z_1, z_1 z_2, ..., z_d z_d].

    The product block lists all d^2 ordered pairs row-major.  Redundant for
    symmetric forms, but the attention construction indexes it directly.
    """
    vec = as_vector(z, "z")
    return np.concatenate(([1.0], vec, np.outer(vec, vec).ravel()))


def _quad_index(d: int, i: int, j: int) -> int:
    # position of the z_i z_j product (0-based i, j) inside embed_phi output
    return 1 + d + i * d + j


def build_attention_matrix(sigma) -> np.ndarray:
    """Attention matrix whose bilinear form on embedded points is the kernel logit.

    For every u, v: ``embed_phi(u) @ A @ embed_phi(v) = -(u-v)' Sigma (u-v)``.
    The negative quadratic terms ride on the constant feature (column/row 0)
    and the cross term lands in the linear-linear block.
    """
    sig = require_square(as_matrix(sigma, "sigma"), "sigma")
    if not is_symmetric(sig):
        raise ValueError("sigma must be symmetric")
    d = sig.shape[0]
    ell = embedding_dim(d)
    attn = np.zeros((ell, ell))
    for i in range(d):
        for j in range(d):
            attn[_quad_index(d, i, j), 0] += -sig[i, j]
            attn[1 + i, 1 + j] += 2.0 * sig[i, j]
            attn[0, _quad_index(d, i, j)] += -sig[i, j]
    return attn


def build_output_matrix(w_out) -> np.ndarray:
    """Output matrix M with ``M @ embed_phi(u) = W u``: W sits in the linear columns."""
    w = as_matrix(w_out, "w_out")
    k, d = w.shape
    out = np.zeros((k, embedding_dim(d)))
    out[:, 1:1 + d] = w
    return out


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``exp(-(u-v)' Sigma (u-v))`` with linear readout W."""

    sigma: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        sig = require_square(as_matrix(self.sigma, "sigma"), "sigma")
        if not is_symmetric(sig):
            raise ValueError("sigma must be symmetric")
        w = as_matrix(self.w_out, "w_out")
        if w.shape[1] != sig.shape[0]:
            raise ValueError(
                f"w_out has {w.shape[1]} columns but sigma is {sig.shape[0]}x{sig.shape[0]}"
            )
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "w_out", w)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class AttentionParams:
    """Fixed attention weights: logit matrix and value/output matrix."""

    attn_matrix: np.ndarray
    out_matrix: np.ndarray

    def __post_init__(self):
        attn = require_square(as_matrix(self.attn_matrix, "attn_matrix"), "attn_matrix")
        out = as_matrix(self.out_matrix, "out_matrix")
        if out.shape[1] != attn.shape[0]:
            raise ValueError(
                f"out_matrix has {out.shape[1]} columns but attn_matrix is "
                f"{attn.shape[0]}x{attn.shape[0]}"
            )
        object.__setattr__(self, "attn_matrix", attn)
        object.__setattr__(self, "out_matrix", out)

    @property
    def embed_dim(self) -> int:
        return self.attn_matrix.shape[0]


def kernel_attention_params(spec: KernelSpec) -> AttentionParams:
    """Attention parameters that replicate the kernel estimator on embedded data."""
    return AttentionParams(
        attn_matrix=build_attention_matrix(spec.sigma),
        out_matrix=build_output_matrix(spec.w_out),
    )


def softmax_weights(logits) -> np.ndarray:
    """Softmax with max subtraction; exact because softmax is shift-invariant."""
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("logits must be a nonempty vector")
    shifted = arr - np.max(arr)
    weights = np.exp(shifted)
    return weights / np.sum(weights)


def nadaraya_watson(data, query, spec: KernelSpec) -> np.ndarray:
    """Kernel-weighted regression estimate of ``W z`` at the query point.

    Weights are ``exp(-(query - z_i)' Sigma (query - z_i))`` renormalized to
    sum to one (computed via max-subtracted softmax on the exponents).
    """
    points = np.atleast_2d(np.asarray(data, dtype=float))
    if points.size == 0:
        raise ValueError("data must be nonempty")
    q = as_vector(query, "query")
    if points.shape[1] != spec.d or q.shape[0] != spec.d:
        raise ValueError("data/query dimension does not match the kernel")
    diffs = points - q
    logits = -np.einsum("ni,ij,nj->n", diffs, spec.sigma, diffs)
    weights = softmax_weights(logits)
    return (spec.w_out @ points.T) @ weights


def attention_forward(tokens, query_token, params: AttentionParams) -> np.ndarray:
    """Single-head softmax attention readout for one query over a token list."""
    toks = np.atleast_2d(np.asarray(tokens, dtype=float))
    if toks.size == 0:
        raise ValueError("tokens must be nonempty")
    q = as_vector(query_token, "query_token")
    if toks.shape[1] != params.embed_dim or q.shape[0] != params.embed_dim:
        raise ValueError("token dimension does not match the attention parameters")
    logits = toks @ (params.attn_matrix.T @ q)
    weights = softmax_weights(logits)
    return (params.out_matrix @ toks.T) @ weights


def windowed_forward(tokens, t: int, window: int, params: AttentionParams,
                     pad_token=None) -> np.ndarray:
    """Attention over tokens t-window+1 .. t with token t as the query.

    Window positions before the start of the sequence are filled with
    ``pad_token`` (default: the embedding of the zero vector, whose only
    nonzero entry is the constant feature).
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    toks = np.atleast_2d(np.asarray(tokens, dtype=float))
    if not 0 <= t < toks.shape[0]:
        raise ValueError(f"time index {t} outside the token sequence")
    if pad_token is None:
        pad = np.zeros(params.embed_dim)
        pad[0] = 1.0
    else:
        pad = as_vector(pad_token, "pad_token")
    lo = t - window + 1
    rows = [pad if i < 0 else toks[i] for i in range(lo, t + 1)]
    return attention_forward(np.asarray(rows), toks[t], params)
