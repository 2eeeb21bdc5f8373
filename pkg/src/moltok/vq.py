"""Vector-quantized autoencoder over atom descriptors.

A small MLP encoder maps normalized 14-dim descriptors to a 5-dim latent,
which is snapped to the nearest entry of a codebook maintained by exponential
moving averages.  A regression decoder reconstructs the 13 non-sign channels
and a separate head classifies the azimuth sign.  Gradients are computed by
hand (straight-through estimator past the quantizer) and applied with Adam.

Architecture (hidden width 128, latent 5, ~72k parameters):

    encoder  14 -> 128 -> 128 -> 128 -> 5      (3 hidden GELU layers)
    decoder   5 -> 128 -> 128 -> 13            (2 hidden GELU layers)
    sign      5 -> 128 -> 128 -> 1 logit       (2 hidden GELU layers)
"""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import erf

from .descriptors import (
    ABS_PHI_IDX,
    D_IDX,
    DESCRIPTOR_DIM,
    LOG_LENGTH,
    NN_ANGLE_IDX,
    NN_LENGTH_IDX,
    PASSTHROUGH_SIGN,
    REGRESSION_FEATURES,
    SIGN_IDX,
    THETA_IDX,
    UNIT_ANGLE,
    NormStats,
    fit_norm_stats,
)
from .errors import CodecError, MoltokError, TrainingDivergedError

REGRESSION_DIM = len(REGRESSION_FEATURES)  # 13

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _dgelu(x):
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass
class TrainConfig:
    """Quantizer training hyperparameters (defaults follow the method setup)."""

    batch_size: int = 512
    learning_rate: float = 1e-4
    warmup_epochs: int = 5
    beta: float = 0.25  # commitment weight
    ema_decay: float = 0.99
    epochs: int = 30
    seed: int = 0
    codebook_size: int = 256
    latent_dim: int = 5
    hidden_dim: int = 128
    use_sign_head: bool = True

    def __post_init__(self):
        for name in (
            "batch_size",
            "learning_rate",
            "warmup_epochs",
            "ema_decay",
            "epochs",
            "codebook_size",
            "latent_dim",
            "hidden_dim",
        ):
            if getattr(self, name) <= 0:
                raise MoltokError(f"{name} must be positive")
        if self.beta < 0:
            raise MoltokError("beta must be non-negative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MlpParams:
    """Dense weights/biases; each list holds (in, out)-shaped affine layers."""

    enc_w: list[np.ndarray]
    enc_b: list[np.ndarray]
    dec_w: list[np.ndarray]
    dec_b: list[np.ndarray]
    sign_w: list[np.ndarray]
    sign_b: list[np.ndarray]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        input_dim: int = DESCRIPTOR_DIM,
        hidden_dim: int = 128,
        latent_dim: int = 5,
        regression_dim: int = REGRESSION_DIM,
    ) -> "MlpParams":
        def stack(dims):
            ws, bs = [], []
            for din, dout in zip(dims, dims[1:]):
                ws.append(rng.normal(0.0, math.sqrt(2.0 / din), size=(din, dout)))
                bs.append(np.zeros(dout))
            return ws, bs

        enc_w, enc_b = stack([input_dim, hidden_dim, hidden_dim, hidden_dim, latent_dim])
        dec_w, dec_b = stack([latent_dim, hidden_dim, hidden_dim, regression_dim])
        sign_w, sign_b = stack([latent_dim, hidden_dim, hidden_dim, 1])
        return cls(enc_w, enc_b, dec_w, dec_b, sign_w, sign_b)

    def tensors(self) -> list[np.ndarray]:
        """All parameter tensors in a fixed deterministic order."""
        out = []
        for ws, bs in ((self.enc_w, self.enc_b), (self.dec_w, self.dec_b),
                       (self.sign_w, self.sign_b)):
            for w, b in zip(ws, bs):
                out.extend((w, b))
        return out

    @property
    def n_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors()))

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.enc_w], [b.copy() for b in self.enc_b],
            [w.copy() for w in self.dec_w], [b.copy() for b in self.dec_b],
            [w.copy() for w in self.sign_w], [b.copy() for b in self.sign_b],
        )


@dataclass
class Codebook:
    """K latent codes plus the EMA state that maintains them."""

    codes: np.ndarray       # (K, latent)
    ema_counts: np.ndarray  # (K,)
    ema_sums: np.ndarray    # (K, latent)
    norm_stats: Optional[NormStats] = None
    version: int = 1

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.ema_counts = np.asarray(self.ema_counts, dtype=np.float64)
        self.ema_sums = np.asarray(self.ema_sums, dtype=np.float64)
        if len(self.codes) < 2:
            raise MoltokError("codebook needs at least two codes")
        if not np.all(np.isfinite(self.codes)):
            raise MoltokError("codebook contains non-finite codes")
        if np.any(self.ema_counts < 0):
            raise MoltokError("EMA counts must be non-negative")

    @property
    def size(self) -> int:
        return len(self.codes)


EMA_COUNT_FLOOR = 1e-5  # denominator floor in the EMA code estimate
DEAD_CODE_THRESHOLD = 1e-3  # counts below this after an epoch get re-seeded


def quantize(codebook: Codebook, latent) -> int:
    """Index of the closest code (ties resolved to the smallest index)."""
    return int(quantize_batch(codebook, np.atleast_2d(np.asarray(latent)))[0])


def quantize_batch(codebook: Codebook, latents: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(latents * latents, axis=1, keepdims=True)
        - 2.0 * latents @ codebook.codes.T
        + np.sum(codebook.codes * codebook.codes, axis=1)
    )
    return np.argmin(d2, axis=1)


def ema_update(codebook: Codebook, latents, assignments, decay: float) -> Codebook:
    """One EMA step; codes become sums / max(counts, floor)."""
    latents = np.asarray(latents, dtype=np.float64)
    assignments = np.asarray(assignments)
    K, L = codebook.codes.shape
    hits = np.bincount(assignments, minlength=K).astype(np.float64)
    batch_sums = np.zeros((K, L))
    np.add.at(batch_sums, assignments, latents)
    counts = decay * codebook.ema_counts + (1.0 - decay) * hits
    sums = decay * codebook.ema_sums + (1.0 - decay) * batch_sums
    codes = sums / np.maximum(counts, EMA_COUNT_FLOOR)[:, None]
    return replace(codebook, codes=codes, ema_counts=counts, ema_sums=sums)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _mlp_forward(ws, bs, X):
    """GELU hidden layers, linear output; returns output and caches."""
    caches = []
    h = X
    last = len(ws) - 1
    for k, (w, b) in enumerate(zip(ws, bs)):
        z = h @ w + b
        if k < last:
            caches.append((h, z))
            h = _gelu(z)
        else:
            caches.append((h, z))
            h = z
    return h, caches


def _mlp_backward(ws, caches, d_out):
    """Gradients for one MLP given the upstream output gradient."""
    dws = [None] * len(ws)
    dbs = [None] * len(ws)
    grad = d_out
    for k in range(len(ws) - 1, -1, -1):
        h_in, z = caches[k]
        if k < len(ws) - 1:
            grad = grad * _dgelu(z)
        dws[k] = h_in.T @ grad
        dbs[k] = grad.sum(axis=0)
        grad = grad @ ws[k].T
    return grad, dws, dbs


def _bce_with_logits(logits, targets):
    # numerically stable: max(l,0) - l*y + log1p(exp(-|l|))
    return np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))


def loss_and_grads(
    params: MlpParams,
    codebook: Codebook,
    batch: np.ndarray,
    beta: float = 0.25,
    use_sign_head: bool = True,
    bypass_quantizer: bool = False,
):
    """Loss, parameter gradients and code assignments for one normalized batch.

    The decoder consumes the assigned code; its input gradient is copied to
    the encoder output (straight-through).  With ``bypass_quantizer`` the
    latent feeds the decoder directly, which makes the whole loss an ordinary
    differentiable autoencoder objective (the commitment term vanishes
    identically since latent == decoder input).
    """
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != DESCRIPTOR_DIM or len(X) == 0:
        raise MoltokError(f"batch must be (B, {DESCRIPTOR_DIM}) and non-empty")
    B = len(X)

    latent, enc_caches = _mlp_forward(params.enc_w, params.enc_b, X)
    assigns = quantize_batch(codebook, latent)
    dec_in = latent if bypass_quantizer else codebook.codes[assigns]

    reg, dec_caches = _mlp_forward(params.dec_w, params.dec_b, dec_in)
    target = X[:, list(REGRESSION_FEATURES)]
    resid = reg - target
    loss_rec = float(np.sum(resid * resid) / B)

    grads = MlpParams(
        [np.zeros_like(w) for w in params.enc_w],
        [np.zeros_like(b) for b in params.enc_b],
        [np.zeros_like(w) for w in params.dec_w],
        [np.zeros_like(b) for b in params.dec_b],
        [np.zeros_like(w) for w in params.sign_w],
        [np.zeros_like(b) for b in params.sign_b],
    )

    d_dec_in, grads.dec_w[:], grads.dec_b[:] = _mlp_backward(
        params.dec_w, dec_caches, 2.0 * resid / B
    )

    loss_sign = 0.0
    if use_sign_head:
        logits, sign_caches = _mlp_forward(params.sign_w, params.sign_b, dec_in)
        logits = logits[:, 0]
        y = (X[:, SIGN_IDX] > 0.0).astype(np.float64)
        loss_sign = float(np.mean(_bce_with_logits(logits, y)))
        d_logits = ((1.0 / (1.0 + np.exp(-logits)) - y) / B)[:, None]
        d_dec_in_sign, grads.sign_w[:], grads.sign_b[:] = _mlp_backward(
            params.sign_w, sign_caches, d_logits
        )
        d_dec_in = d_dec_in + d_dec_in_sign

    commit = latent - dec_in
    loss_commit = float(beta * np.sum(commit * commit) / B)

    # straight-through: decoder-input gradient is copied past the quantizer
    d_latent = d_dec_in + 2.0 * beta * commit / B
    _, grads.enc_w[:], grads.enc_b[:] = _mlp_backward(params.enc_w, enc_caches, d_latent)

    loss = loss_rec + loss_sign + loss_commit
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss}")
    components = {"reconstruction": loss_rec, "sign_bce": loss_sign, "commitment": loss_commit}
    return loss, grads, assigns, latent, components


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class _AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def like(cls, params: MlpParams) -> "_AdamState":
        return cls(
            [np.zeros_like(t) for t in params.tensors()],
            [np.zeros_like(t) for t in params.tensors()],
        )

    def apply(self, params: MlpParams, grads: MlpParams, lr: float):
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for slot, (p, g) in enumerate(zip(params.tensors(), grads.tensors())):
            self.m[slot] = ADAM_BETA1 * self.m[slot] + (1.0 - ADAM_BETA1) * g
            self.v[slot] = ADAM_BETA2 * self.v[slot] + (1.0 - ADAM_BETA2) * g * g
            p -= lr * (self.m[slot] / c1) / (np.sqrt(self.v[slot] / c2) + ADAM_EPS)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainReport:
    config: dict
    epoch_loss: list[float] = field(default_factory=list)
    utilization: float = 0.0
    rmsd: dict = field(default_factory=dict)
    ema_identity_max_residual: float = 0.0
    n_parameters: int = 0
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "epoch_loss": self.epoch_loss,
            "utilization": self.utilization,
            "rmsd": self.rmsd,
            "ema_identity_max_residual": self.ema_identity_max_residual,
            "n_parameters": self.n_parameters,
            "wall_clock_s": self.wall_clock_s,
        }


def train(dataset, cfg: TrainConfig):
    """Train encoder/decoder/codebook on raw descriptors.

    Deterministic given (seed, config, data order).  Returns
    (params, codebook, report); the codebook embeds the normalization
    statistics so encode and decode always agree.
    """
    t0 = time.perf_counter()
    Z = np.asarray(dataset, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != DESCRIPTOR_DIM:
        raise MoltokError(f"dataset must be (N, {DESCRIPTOR_DIM})")
    if len(Z) < 10 * cfg.codebook_size:
        raise MoltokError(
            f"dataset of {len(Z)} descriptors is smaller than 10*K = "
            f"{10 * cfg.codebook_size}"
        )
    stats = fit_norm_stats(Z)
    X = stats.normalize(Z)
    N = len(X)

    rng = np.random.default_rng(cfg.seed)
    params = MlpParams.init(
        rng, hidden_dim=cfg.hidden_dim, latent_dim=cfg.latent_dim
    )
    seed_latent, _ = _mlp_forward(
        params.enc_w, params.enc_b, X[rng.choice(N, cfg.codebook_size, replace=False)]
    )
    codebook = Codebook(
        seed_latent.copy(),
        np.ones(cfg.codebook_size),
        seed_latent.copy(),
        norm_stats=stats,
    )

    steps_per_epoch = math.ceil(N / cfg.batch_size)
    warmup_steps = max(1, cfg.warmup_epochs * steps_per_epoch)
    adam = _AdamState.like(params)
    report = TrainReport(config=cfg.to_dict(), n_parameters=params.n_parameters)

    step = 0
    max_residual = 0.0
    for _epoch in range(cfg.epochs):
        perm = rng.permutation(N)
        losses = []
        last_latents = None
        for start in range(0, N, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            lr = cfg.learning_rate * min(1.0, (step + 1) / warmup_steps)
            try:
                loss, grads, assigns, latents, _ = loss_and_grads(
                    params,
                    codebook,
                    X[idx],
                    beta=cfg.beta,
                    use_sign_head=cfg.use_sign_head,
                )
            except TrainingDivergedError as err:
                report.epoch_loss.append(float("nan"))
                raise TrainingDivergedError(str(err), report=report) from None
            if loss > 1e6:
                report.epoch_loss.append(loss)
                raise TrainingDivergedError(f"loss diverged: {loss}", report=report)
            adam.apply(params, grads, lr)
            total_before = codebook.ema_counts.sum()
            codebook = ema_update(codebook, latents, assigns, cfg.ema_decay)
            expected = cfg.ema_decay * total_before + (1.0 - cfg.ema_decay) * len(idx)
            max_residual = max(
                max_residual, abs(float(codebook.ema_counts.sum() - expected))
            )
            losses.append(loss)
            last_latents = latents
            step += 1
        # dead codes are re-seeded from the last batch so utilization recovers
        dead = np.flatnonzero(codebook.ema_counts < DEAD_CODE_THRESHOLD)
        if len(dead) and last_latents is not None:
            picks = rng.integers(0, len(last_latents), size=len(dead))
            codebook.codes[dead] = last_latents[picks]
            codebook.ema_counts[dead] = 1.0
            codebook.ema_sums[dead] = codebook.codes[dead]
        report.epoch_loss.append(float(np.mean(losses)))

    report.ema_identity_max_residual = max_residual
    metrics = evaluate(params, codebook, Z, use_sign_head=cfg.use_sign_head)
    report.utilization = metrics["utilization"]
    report.rmsd = metrics["rmsd"]
    report.wall_clock_s = time.perf_counter() - t0
    return params, codebook, report


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def encode_latents(params: MlpParams, codebook: Codebook, Z_raw) -> np.ndarray:
    X = codebook.norm_stats.normalize(Z_raw)
    latent, _ = _mlp_forward(params.enc_w, params.enc_b, X)
    return latent


def encode_atoms(params: MlpParams, codebook: Codebook, Z_raw) -> np.ndarray:
    """Code indices for raw (denormalized) descriptor rows."""
    return quantize_batch(codebook, encode_latents(params, codebook, Z_raw))


def encode_atom(params: MlpParams, codebook: Codebook, v) -> int:
    return int(encode_atoms(params, codebook, np.atleast_2d(np.asarray(v)))[0])


def decode_codes(
    params: MlpParams, codebook: Codebook, qs, use_sign_head: bool = True
) -> np.ndarray:
    """Denormalized 14-dim descriptors for code indices (deterministic)."""
    qs = np.atleast_1d(np.asarray(qs, dtype=np.int64))
    if np.any(qs < 0) or np.any(qs >= codebook.size):
        raise CodecError("code index out of range")
    c = codebook.codes[qs]
    reg, _ = _mlp_forward(params.dec_w, params.dec_b, c)
    normed = np.zeros((len(qs), DESCRIPTOR_DIM))
    normed[:, list(REGRESSION_FEATURES)] = reg
    if use_sign_head:
        logits, _ = _mlp_forward(params.sign_w, params.sign_b, c)
        sign = np.where(logits[:, 0] >= 0.0, 1.0, -1.0)
    else:
        sign = np.ones(len(qs))
    out = codebook.norm_stats.denormalize(normed)
    out[:, SIGN_IDX] = sign
    # clamp to descriptor range invariants
    out[:, THETA_IDX] = np.clip(out[:, THETA_IDX], 0.0, math.pi)
    out[:, ABS_PHI_IDX] = np.clip(out[:, ABS_PHI_IDX], 0.0, math.pi)
    for k in NN_ANGLE_IDX:
        out[:, k] = np.clip(out[:, k], 0.0, math.pi)
    return out


def decode_code(params: MlpParams, codebook: Codebook, q: int,
                use_sign_head: bool = True) -> np.ndarray:
    return decode_codes(params, codebook, [q], use_sign_head=use_sign_head)[0]


def evaluate(params: MlpParams, codebook: Codebook, Z_raw,
             use_sign_head: bool = True) -> dict:
    """Reconstruction quality per descriptor group plus codebook utilization."""
    Z = np.asarray(Z_raw, dtype=np.float64)
    assigns = encode_atoms(params, codebook, Z)
    recon = decode_codes(params, codebook, assigns, use_sign_head=use_sign_head)

    def rms(a, b):
        return float(np.sqrt(np.mean((a - b) ** 2)))

    phi_true = Z[:, SIGN_IDX] * Z[:, ABS_PHI_IDX]
    phi_rec = recon[:, SIGN_IDX] * recon[:, ABS_PHI_IDX]
    nl = list(NN_LENGTH_IDX)
    na = list(NN_ANGLE_IDX)
    X = codebook.norm_stats.normalize(Z)
    Xr = codebook.norm_stats.normalize(recon)  # decoded lengths are exp(...) > 0
    rmsd = {
        "gen_length": rms(recon[:, D_IDX], Z[:, D_IDX]),
        "gen_polar": rms(recon[:, THETA_IDX], Z[:, THETA_IDX]),
        "gen_azimuth": rms(phi_rec, phi_true),
        "und_length": rms(recon[:, nl], Z[:, nl]),
        "und_angle": rms(recon[:, na], Z[:, na]),
        "normalized_overall": rms(
            Xr[:, list(REGRESSION_FEATURES)], X[:, list(REGRESSION_FEATURES)]
        ),
    }
    utilization = float(len(np.unique(assigns)) / codebook.size)
    return {"rmsd": rmsd, "utilization": utilization}


# ---------------------------------------------------------------------------
# persistence: versioned binary container + JSON export
# ---------------------------------------------------------------------------

MAGIC = b"MSTK"
FORMAT_VERSION = 1
_TRANSFORM_CODES = {LOG_LENGTH: 0, UNIT_ANGLE: 1, PASSTHROUGH_SIGN: 2}
_TRANSFORM_NAMES = {v: k for k, v in _TRANSFORM_CODES.items()}


def _f64_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_model(path, params: MlpParams, codebook: Codebook,
               use_sign_head: bool = True):
    """Write the codebook+params container (bit-exact round trip)."""
    if codebook.norm_stats is None:
        raise CodecError("codebook is missing normalization statistics")
    stats = codebook.norm_stats
    hidden = params.enc_w[0].shape[1]
    latent = codebook.codes.shape[1]
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack(
        "<7I",
        FORMAT_VERSION,
        codebook.size,
        latent,
        hidden,
        DESCRIPTOR_DIM,
        REGRESSION_DIM,
        1 if use_sign_head else 0,
    )
    blob += bytes(_TRANSFORM_CODES[t] for t in stats.transforms)
    blob += _f64_bytes(stats.mean)
    blob += _f64_bytes(stats.std)
    blob += struct.pack("<2d", stats.sentinel_length, stats.sentinel_angle)
    for t in params.tensors():
        blob += _f64_bytes(t)
    blob += _f64_bytes(codebook.codes)
    blob += _f64_bytes(codebook.ema_counts)
    blob += _f64_bytes(codebook.ema_sums)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(path):
    """Read a container written by :func:`save_model`.

    Returns (params, codebook, meta) where meta carries the sign-head flag.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CodecError("not a codebook file (bad magic bytes)")
    version, K, latent, hidden, in_dim, reg_dim, sign_flag = struct.unpack(
        "<7I", blob[4:32]
    )
    if version != FORMAT_VERSION:
        raise CodecError(
            f"codebook format version {version} does not match "
            f"supported version {FORMAT_VERSION}"
        )
    if in_dim != DESCRIPTOR_DIM or reg_dim != REGRESSION_DIM:
        raise CodecError("codebook was built for a different descriptor layout")
    off = 32
    transforms = tuple(_TRANSFORM_NAMES[b] for b in blob[off : off + in_dim])
    off += in_dim

    def take(shape):
        nonlocal off
        size = int(np.prod(shape)) * 8
        arr = np.frombuffer(blob[off : off + size], dtype="<f8").reshape(shape).copy()
        off += size
        return arr

    mean = take((in_dim,))
    std = take((in_dim,))
    sent_l, sent_a = struct.unpack("<2d", blob[off : off + 16])
    off += 16
    stats = NormStats(mean, std, transforms, sent_l, sent_a)

    def take_stack(dims):
        ws, bs = [], []
        for din, dout in zip(dims, dims[1:]):
            ws.append(take((din, dout)))
            bs.append(take((dout,)))
        return ws, bs

    enc_w, enc_b = take_stack([in_dim, hidden, hidden, hidden, latent])
    dec_w, dec_b = take_stack([latent, hidden, hidden, reg_dim])
    sign_w, sign_b = take_stack([latent, hidden, hidden, 1])
    params = MlpParams(enc_w, enc_b, dec_w, dec_b, sign_w, sign_b)
    codes = take((K, latent))
    counts = take((K,))
    sums = take((K, latent))
    if off != len(blob):
        raise CodecError("codebook file has trailing bytes")
    codebook = Codebook(codes, counts, sums, norm_stats=stats, version=version)
    return params, codebook, {"use_sign_head": bool(sign_flag)}


def export_json(params: MlpParams, codebook: Codebook,
                use_sign_head: bool = True) -> str:
    """Human-inspectable JSON rendering of the trained artifacts."""
    stats = codebook.norm_stats
    doc = {
        "format_version": FORMAT_VERSION,
        "use_sign_head": use_sign_head,
        "codebook_size": codebook.size,
        "latent_dim": int(codebook.codes.shape[1]),
        "n_parameters": params.n_parameters,
        "norm_stats": {
            "transforms": list(stats.transforms),
            "mean": stats.mean.tolist(),
            "std": stats.std.tolist(),
            "sentinel_length": stats.sentinel_length,
            "sentinel_angle": stats.sentinel_angle,
        },
        "codes": codebook.codes.tolist(),
        "ema_counts": codebook.ema_counts.tolist(),
        "ema_sums": codebook.ema_sums.tolist(),
        "encoder": {
            "weights": [w.tolist() for w in params.enc_w],
            "biases": [b.tolist() for b in params.enc_b],
        },
        "decoder": {
            "weights": [w.tolist() for w in params.dec_w],
            "biases": [b.tolist() for b in params.dec_b],
        },
        "sign_head": {
            "weights": [w.tolist() for w in params.sign_w],
            "biases": [b.tolist() for b in params.sign_b],
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)
