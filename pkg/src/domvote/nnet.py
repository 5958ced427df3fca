"""A small fixed CNN trained from scratch, with hand-derived gradients.

Architecture (input is one grayscale channel, any even height/width):

    conv 3x3x1 -> 8, stride 1, zero pad 1
    relu
    2x2 max pool
    conv 3x3x8 -> 16, stride 1, zero pad 1
    relu
    global average pool
    linear 16 -> 2

Parameters are float32; the compute dtype is selectable so gradient checks
can run the same code path in float64. Convolutions go through an im2col
matmul, and the backward pass reuses the forward helper on flipped kernels.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from domvote.losses import ClassWeights, LossConfig, loss_grad, loss_value, one_hot

C1, C2, KSIZE, NCLASS = 8, 16, 3, 2


@dataclass(frozen=True)
class ParamSet:
    """The six learnable arrays; also reused for gradients and Adam moments."""

    w1: np.ndarray  # (8, 1, 3, 3)
    b1: np.ndarray  # (8,)
    w2: np.ndarray  # (16, 8, 3, 3)
    b2: np.ndarray  # (16,)
    w3: np.ndarray  # (2, 16)
    b3: np.ndarray  # (2,)

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in dataclasses.fields(self)]

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray]) -> "ParamSet":
        names = [f.name for f in dataclasses.fields(cls)]
        if len(arrays) != len(names):
            raise ValueError(f"expected {len(names)} arrays, got {len(arrays)}")
        expected = [(C1, 1, KSIZE, KSIZE), (C1,), (C2, C1, KSIZE, KSIZE), (C2,),
                    (NCLASS, C2), (NCLASS,)]
        for name, a, shape in zip(names, arrays, expected):
            if a.shape != shape:
                raise ValueError(f"array {name} has shape {a.shape}, expected {shape}")
        return cls(**dict(zip(names, arrays)))

    @classmethod
    def zeros(cls, dtype=np.float32) -> "ParamSet":
        return cls(
            w1=np.zeros((C1, 1, KSIZE, KSIZE), dtype),
            b1=np.zeros(C1, dtype),
            w2=np.zeros((C2, C1, KSIZE, KSIZE), dtype),
            b2=np.zeros(C2, dtype),
            w3=np.zeros((NCLASS, C2), dtype),
            b3=np.zeros(NCLASS, dtype),
        )


ModelParams = ParamSet


def init_params(seed: int) -> ParamSet:
    """He-normal weights, zero biases, float32."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1]))

    def he(shape, fan_in):
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(np.float32)

    return ParamSet(
        w1=he((C1, 1, KSIZE, KSIZE), 1 * KSIZE * KSIZE),
        b1=np.zeros(C1, np.float32),
        w2=he((C2, C1, KSIZE, KSIZE), C1 * KSIZE * KSIZE),
        b2=np.zeros(C2, np.float32),
        w3=he((NCLASS, C2), C2),
        b3=np.zeros(NCLASS, np.float32),
    )


def _conv_cols(x: np.ndarray) -> np.ndarray:
    """im2col for 3x3 stride-1 pad-1: (N, C, H, W) -> (N, H*W, C*9)."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (KSIZE, KSIZE), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, h * w, c * KSIZE * KSIZE)
    return np.ascontiguousarray(cols)


def _conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None):
    """Returns (output (N, Cout, H, W), cols) for reuse in backward."""
    n, _, h, w = x.shape
    cout = weight.shape[0]
    cols = _conv_cols(x)
    wmat = weight.reshape(cout, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias
    return out.reshape(n, h, w, cout).transpose(0, 3, 1, 2), cols


def _conv_input_grad(dout: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Gradient wrt the conv input: convolution with flipped, transposed kernels."""
    wt = np.ascontiguousarray(np.flip(weight, axis=(2, 3)).transpose(1, 0, 2, 3))
    dx, _ = _conv_forward(dout, wt, None)
    return dx


def _conv_weight_grad(cols: np.ndarray, dout: np.ndarray, wshape) -> np.ndarray:
    n, cout = dout.shape[0], dout.shape[1]
    dmat = dout.transpose(0, 2, 3, 1).reshape(n, -1, cout)
    dw = np.einsum("npc,npk->ck", dmat, cols, optimize=True)
    return dw.reshape(wshape)


def forward(params: ParamSet, x: np.ndarray, dtype=np.float32):
    """Compute logits for a batch of frames.

    ``x`` has shape (N, H, W), values in [0, 1], H and W even and >= 4.
    Returns (logits (N, 2), cache for backward).
    """
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 3:
        raise ValueError(f"expected (N, H, W) input, got shape {x.shape}")
    n, h, w = x.shape
    if h % 2 or w % 2 or h < 4 or w < 4:
        raise ValueError(f"input height/width must be even and >= 4, got {h}x{w}")
    p = params if x.dtype == np.float32 else _cast_params(params, x.dtype)

    a0 = x[:, None]
    z1, cols1 = _conv_forward(a0, p.w1, p.b1)
    r1 = np.maximum(z1, 0)

    # 2x2 max pool, window flattened so argmax is first-of-ties and stable.
    hh, ww = h // 2, w // 2
    rwin = r1.reshape(n, C1, hh, 2, ww, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, C1, hh, ww, 4)
    pool_idx = rwin.argmax(axis=-1)
    p1 = np.take_along_axis(rwin, pool_idx[..., None], axis=-1)[..., 0]

    z2, cols2 = _conv_forward(p1, p.w2, p.b2)
    r2 = np.maximum(z2, 0)
    g = r2.mean(axis=(2, 3))
    logits = g @ p.w3.T + p.b3

    cache = {
        "params": p, "x_shape": (n, h, w), "cols1": cols1, "z1_pos": z1 > 0,
        "pool_idx": pool_idx, "p1": p1, "cols2": cols2, "z2_pos": z2 > 0, "g": g,
        "dtype": x.dtype,
    }
    return logits, cache


def _cast_params(params: ParamSet, dtype) -> ParamSet:
    return ParamSet(*[a.astype(dtype) for a in params.arrays()])


def backward(cache: dict, dlogits: np.ndarray) -> ParamSet:
    """Gradients of the cached forward pass wrt all parameters."""
    p: ParamSet = cache["params"]
    n, h, w = cache["x_shape"]
    hh, ww = h // 2, w // 2
    dtype = cache["dtype"]
    dlogits = np.asarray(dlogits, dtype=dtype)

    g = cache["g"]
    dw3 = dlogits.T @ g
    db3 = dlogits.sum(axis=0)
    dg = dlogits @ p.w3

    dr2 = np.broadcast_to(dg[:, :, None, None] / (hh * ww), (n, C2, hh, ww))
    dz2 = np.where(cache["z2_pos"], dr2, 0)

    dw2 = _conv_weight_grad(cache["cols2"], dz2, p.w2.shape)
    db2 = dz2.sum(axis=(0, 2, 3))
    dp1 = _conv_input_grad(dz2, p.w2)

    dwin = np.zeros((n, C1, hh, ww, 4), dtype=dtype)
    np.put_along_axis(dwin, cache["pool_idx"][..., None], dp1[..., None], axis=-1)
    dr1 = dwin.reshape(n, C1, hh, ww, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, C1, h, w)
    dz1 = np.where(cache["z1_pos"], dr1, 0)

    dw1 = _conv_weight_grad(cache["cols1"], dz1, p.w1.shape)
    db1 = dz1.sum(axis=(0, 2, 3))
    return ParamSet(w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3)


# ---------------------------------------------------------------------------
# AdamW


@dataclass(frozen=True)
class OptimizerState:
    step: int
    m: ParamSet
    v: ParamSet
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.05


def init_optimizer(weight_decay: float = 0.05) -> OptimizerState:
    return OptimizerState(step=0, m=ParamSet.zeros(), v=ParamSet.zeros(),
                          weight_decay=weight_decay)


def adamw_step(
    params: ParamSet, grads: ParamSet, state: OptimizerState, lr: float
) -> tuple[ParamSet, OptimizerState]:
    """One decoupled-weight-decay Adam update; purely functional."""
    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        g32 = g.astype(np.float32, copy=False)
        m_next = state.beta1 * m + (1.0 - state.beta1) * g32
        v_next = state.beta2 * v + (1.0 - state.beta2) * g32 * g32
        m_hat = m_next / bc1
        v_hat = v_next / bc2
        step = lr * (m_hat / (np.sqrt(v_hat) + state.eps)) + lr * state.weight_decay * p
        new_p.append((p - step).astype(np.float32))
        new_m.append(m_next)
        new_v.append(v_next)
    return (
        ParamSet.from_arrays(new_p),
        dataclasses.replace(state, step=t, m=ParamSet.from_arrays(new_m),
                            v=ParamSet.from_arrays(new_v)),
    )


# ---------------------------------------------------------------------------
# Learning-rate schedules


@dataclass(frozen=True)
class LrSchedule:
    """Epoch-indexed learning rates.

    ``constant_after_warmup``: warmup_lr for epoch 0, then peak_lr.
    ``warmup_peak_decay``: warmup_lr, then peak_lr through decay_epoch,
    then decay_lr. ``lr_scale`` multiplies everything; the unit-scale
    defaults match fine-tuning large pretrained backbones, while training
    this small CNN from scratch wants a larger scale (set via config).
    """

    kind: str = "constant_after_warmup"
    warmup_lr: float = 1e-5
    peak_lr: float = 1e-4
    decay_lr: float = 5e-5
    decay_epoch: int = 4
    epochs: int = 7
    lr_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant_after_warmup", "warmup_peak_decay"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.epochs < 1:
            raise ValueError("schedule needs at least one epoch")


def lr_at(epoch: int, schedule: LrSchedule) -> float:
    if not 0 <= epoch < schedule.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.epochs})")
    if epoch == 0:
        base = schedule.warmup_lr
    elif schedule.kind == "constant_after_warmup" or epoch <= schedule.decay_epoch:
        base = schedule.peak_lr
    else:
        base = schedule.decay_lr
    return base * schedule.lr_scale


# ---------------------------------------------------------------------------
# Augmentation


@dataclass(frozen=True)
class AugmentConfig:
    enabled: bool = True
    max_rotation_deg: float = 15.0
    crop_scale: tuple[float, float] = (0.8, 1.0)
    crop_ratio: tuple[float, float] = (0.85, 1.15)


def _bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img at float coordinates; zero outside the frame."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    out = np.zeros(ys.shape, dtype=img.dtype)
    fy = ys - y0
    fx = xs - x0
    for dy, dx, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        yy = y0 + dy
        xx = x0 + dx
        mask = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        out += np.where(mask, img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)] * wgt, 0)
    return out


def augment(frame: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Random rotation then random resized crop, both bilinear.

    Rotation fills uncovered pixels with 0. The crop samples a target area
    fraction and aspect ratio, crops, and resizes back to the input size, so
    dimensions and the [0, 1] intensity range are preserved. The five random
    draws happen unconditionally to keep the stream stable across configs.
    """
    h, w = frame.shape
    angle = np.deg2rad(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    area_frac = rng.uniform(cfg.crop_scale[0], cfg.crop_scale[1])
    ratio = rng.uniform(cfg.crop_ratio[0], cfg.crop_ratio[1])

    cw = min(w, max(1, round(np.sqrt(area_frac * h * w * ratio))))
    ch = min(h, max(1, round(np.sqrt(area_frac * h * w / ratio))))
    x0 = int(rng.integers(0, w - cw + 1))
    y0 = int(rng.integers(0, h - ch + 1))

    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    yr = yy - cy
    xr = xx - cx
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    src_y = cy + (sin_a * xr + cos_a * yr)
    src_x = cx + (cos_a * xr - sin_a * yr)
    rotated = _bilinear(frame, src_y, src_x)

    out_y = np.linspace(y0, y0 + ch - 1, h)
    out_x = np.linspace(x0, x0 + cw - 1, w)
    gy, gx = np.meshgrid(out_y, out_x, indexing="ij")
    return _bilinear(rotated, gy, gx)


# ---------------------------------------------------------------------------
# Training loop


@dataclass(frozen=True)
class TrainSettings:
    loss: str = "nsce"
    loss_cfg: LossConfig = LossConfig()
    class_weights: ClassWeights = ClassWeights()
    schedule: LrSchedule = LrSchedule()
    batch_size: int = 100
    augment: AugmentConfig = AugmentConfig()
    weight_decay: float = 0.05


def train_classifier(
    images: np.ndarray,
    labels: np.ndarray,
    settings: TrainSettings,
    seed: int,
) -> tuple[ParamSet, list[float]]:
    """Train the CNN on (N, H, W) float frames in [0, 1] with int labels.

    Deterministic for a given seed: initialization, epoch shuffles, and
    augmentation each draw from their own seeded stream. Returns the final
    parameters and the mean training loss per epoch.
    """
    images = np.asarray(images, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images for {labels.shape[0]} labels")
    if images.shape[0] == 0:
        raise ValueError("training set is empty")
    n = images.shape[0]

    ss = np.random.SeedSequence([seed, 0xD0])
    order_rng, aug_rng = (np.random.default_rng(c) for c in ss.spawn(2))
    params = init_params(seed)
    state = init_optimizer(settings.weight_decay)
    targets = one_hot(labels)
    epoch_losses: list[float] = []

    for epoch in range(settings.schedule.epochs):
        lr = lr_at(epoch, settings.schedule)
        perm = order_rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, settings.batch_size):
            batch_idx = perm[start : start + settings.batch_size]
            if settings.augment.enabled:
                batch = np.stack(
                    [augment(images[i].astype(np.float64), settings.augment, aug_rng)
                     for i in batch_idx]
                ).astype(np.float32)
            else:
                batch = images[batch_idx]
            q = targets[batch_idx]
            logits, cache = forward(params, batch)
            values = loss_value(settings.loss, logits.astype(np.float64), q,
                                settings.class_weights, settings.loss_cfg)
            total_loss += float(np.sum(values))
            dlogits = loss_grad(settings.loss, logits.astype(np.float64), q,
                                settings.class_weights, settings.loss_cfg)
            grads = backward(cache, (dlogits / len(batch_idx)).astype(np.float32))
            params, state = adamw_step(params, grads, state, lr)
        epoch_losses.append(total_loss / n)
    return params, epoch_losses


def predict_logits(
    params: ParamSet, images: np.ndarray, batch_size: int = 256
) -> np.ndarray:
    """Logits for a stack of frames, no augmentation, float64 result."""
    images = np.asarray(images, dtype=np.float32)
    outs = []
    for start in range(0, images.shape[0], batch_size):
        logits, _ = forward(params, images[start : start + batch_size])
        outs.append(logits.astype(np.float64))
    return np.concatenate(outs, axis=0) if outs else np.zeros((0, NCLASS))
