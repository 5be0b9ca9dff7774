"""Composed flows: density evaluation, NLL, gradients, training, persistence."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import EvaluationError, TrainingError
from .transforms import AffineCoupling, SplineCoupling, Standardize, from_description

FORMAT_VERSION = 1
_LOG_2PI = math.log(2.0 * math.pi)


class FlowModel:
    """Composition ``T = T_K o ... o T_1`` mapping data to a standard normal latent."""

    def __init__(self, transforms):
        transforms = list(transforms)
        if not transforms:
            raise ValueError("a flow needs at least one transform")
        dims = {t.dim for t in transforms}
        if len(dims) != 1:
            raise ValueError(f"transforms disagree on dimension: {sorted(dims)}")
        self.transforms = transforms
        self.dim = dims.pop()

    @property
    def trainable(self):
        return [t for t in self.transforms if t.trainable]

    @property
    def n_params(self):
        return sum(t.n_params for t in self.trainable)

    def get_params(self):
        parts = [t.get_params() for t in self.trainable]
        return np.concatenate(parts) if parts else np.empty(0)

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.size}")
        pos = 0
        for t in self.trainable:
            pos += t.set_params(flat[pos:pos + t.n_params])

    def _as_batch(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or (x.ndim == 1 and self.dim != 1):
            x = x.reshape(1, -1)
        elif x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.shape[1] != self.dim:
            raise ValueError(f"points have dimension {x.shape[1]}, flow has {self.dim}")
        return x

    def forward(self, x, keep_cache=False):
        """Map data to latent space; returns (z, summed log|det J|[, caches])."""
        z = self._as_batch(x)
        logdet = np.zeros(z.shape[0])
        caches = []
        with np.errstate(over="ignore", invalid="ignore"):
            for k, t in enumerate(self.transforms):
                z, ld, cache = t.forward(z)
                if not (np.all(np.isfinite(z)) and np.all(np.isfinite(ld))):
                    raise EvaluationError(f"non-finite value produced by transform {k}", k)
                logdet = logdet + ld
                caches.append(cache)
        if keep_cache:
            return z, logdet, caches
        return z, logdet

    def inverse(self, z):
        x = self._as_batch(z)
        logdet = np.zeros(x.shape[0])
        for t in reversed(self.transforms):
            x, ld = t.inverse(x)
            logdet = logdet + ld
        return x, logdet

    def sample(self, n, rng):
        x, _ = self.inverse(rng.standard_normal((n, self.dim)))
        return x

    def log_density(self, x):
        """Log density at each row of ``x`` (scalar for a single point)."""
        single = np.ndim(x) == 0 or (np.ndim(x) == 1 and self.dim != 1 and len(x) == self.dim)
        z, logdet = self.forward(x)
        out = -0.5 * np.sum(z * z, axis=1) - 0.5 * self.dim * _LOG_2PI + logdet
        return float(out[0]) if single else out

    def density(self, x):
        return np.exp(self.log_density(x))

    def nll_and_grad(self, batch):
        z, logdet, caches = self.forward(batch, keep_cache=True)
        loss = float(np.sum(0.5 * np.sum(z * z, axis=1) + 0.5 * self.dim * _LOG_2PI - logdet))
        g = z.copy()
        glogdet = -np.ones(z.shape[0])
        grads = []
        for t, cache in zip(reversed(self.transforms), reversed(caches)):
            g, gp = t.backward(cache, g, glogdet)
            if t.trainable:
                grads.append(gp)
        grads.reverse()
        return loss, (np.concatenate(grads) if grads else np.empty(0))

    def describe(self):
        return {"version": FORMAT_VERSION, "dim": self.dim,
                "transforms": [t.describe() for t in self.transforms]}

    def copy(self):
        clone = from_json(to_json(self))
        return clone


def nll_loss(model, batch):
    """Negative log-likelihood summed over the batch."""
    batch = model._as_batch(batch)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    return float(-np.sum(model.log_density(batch)))


def grad_nll(model, batch):
    """Gradient of ``nll_loss`` with respect to the trainable parameter vector."""
    _, grad = model.nll_and_grad(batch)
    return grad


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.0
    schedule: str = "cosine"

    def __post_init__(self):
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown learning-rate schedule {self.schedule!r}")
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in [0, 0.5]")


@dataclass
class LossHistory:
    train_nll: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_nll", "val_nll"])
            for i, tr in enumerate(self.train_nll):
                val = self.val_nll[i] if i < len(self.val_nll) else float("nan")
                writer.writerow([i + 1, repr(tr), repr(val)])


class Adam:
    def __init__(self, n, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(model, data, cfg=None):
    """Fit ``model`` in place by minibatch Adam on the mean NLL.

    Returns ``(model, history)`` where the history holds per-epoch mean NLL
    on the training split and, if requested, the validation split.
    """
    cfg = TrainConfig() if cfg is None else cfg
    data = model._as_batch(data)
    if data.shape[0] == 0:
        raise ValueError("no training data")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(data.shape[0])
    n_val = int(round(cfg.validation_fraction * data.shape[0]))
    val, tr = data[order[:n_val]], data[order[n_val:]]
    params = model.get_params()
    opt = Adam(params.size, cfg.learning_rate)
    history = LossHistory()
    for epoch in range(1, cfg.epochs + 1):
        if cfg.schedule == "cosine":
            opt.lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * (epoch - 1) / cfg.epochs))
        perm = rng.permutation(tr.shape[0])
        total = 0.0
        for start in range(0, tr.shape[0], cfg.batch_size):
            batch = tr[perm[start:start + cfg.batch_size]]
            try:
                loss, grad = model.nll_and_grad(batch)
            except EvaluationError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
            bad = np.flatnonzero(~np.isfinite(grad))
            if bad.size or not math.isfinite(loss):
                idx = int(bad[0]) if bad.size else None
                raise TrainingError(f"epoch {epoch}: non-finite loss or gradient"
                                    + (f" at parameter {idx}" if idx is not None else ""),
                                    epoch=epoch, parameter_index=idx)
            params = opt.step(params, grad / batch.shape[0])
            model.set_params(params)
            total += loss
        history.train_nll.append(total / tr.shape[0])
        if n_val:
            try:
                history.val_nll.append(nll_loss(model, val) / n_val)
            except EvaluationError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
    return model, history


def build_spline_flow(dim=1, n_layers=5, bins=5, bound=3.0, hidden=(32, 32, 32),
                      shift=0.0, scale=1.0, seed=0):
    """Standardizing map followed by ``n_layers`` spline transforms.

    In more than one dimension the transforms are spline couplings whose
    fixed coordinate alternates between layers.
    """
    rng = np.random.default_rng(seed)
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (dim,))
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (dim,))
    layers = [Standardize(shift, scale)]
    for k in range(n_layers):
        mask = None if dim == 1 else _alternating_mask(dim, k)
        layers.append(SplineCoupling(dim, mask, bins, bound, hidden, rng))
    return FlowModel(layers)


def build_realnvp_flow(dim=2, n_layers=6, hidden=(16, 16, 16), C=1.0,
                       shift=0.0, scale=1.0, seed=0):
    """Standardizing map followed by affine couplings with flipped roles."""
    if dim < 2:
        raise ValueError("affine coupling needs at least two coordinates")
    rng = np.random.default_rng(seed)
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (dim,))
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (dim,))
    layers = [Standardize(shift, scale)]
    for k in range(n_layers):
        layers.append(AffineCoupling(dim, _alternating_mask(dim, k), hidden, C, rng))
    return FlowModel(layers)


def _alternating_mask(dim, k):
    mask = np.zeros(dim, dtype=bool)
    half = dim // 2
    if k % 2 == 0:
        mask[:half] = True
    else:
        mask[half:] = True
    return mask


def to_json(model):
    return json.dumps({**model.describe(), "params": [repr(float(p)) for p in model.get_params()]})


def from_json(text):
    doc = json.loads(text)
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    model = FlowModel([from_description(d) for d in doc["transforms"]])
    model.set_params(np.array([float(p) for p in doc["params"]]))
    return model


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(to_json(model))


def load_model(path):
    with open(path) as fh:
        return from_json(fh.read())


def config_dict(cfg):
    return asdict(cfg)
