"""Invertible transforms with log-determinants and parameter gradients.

Each transform maps data toward the latent space with ``forward`` and
exposes ``backward(cache, gz, glogdet)`` returning the gradient with respect
to its input together with the flat gradient of its trainable parameters.
"""

import math

import numpy as np

from .. import kernels
from .mlp import MLP

MIN_BIN_WIDTH = 1e-3
MIN_BIN_HEIGHT = 1e-3
MIN_DERIVATIVE = 1e-3
# softplus(_DERIV_SHIFT) + MIN_DERIVATIVE == 1 so zero raw parameters give unit slopes
_DERIV_SHIFT = math.log(math.expm1(1.0 - MIN_DERIVATIVE))


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def spline_knots(raw_w, raw_h, raw_d, bound):
    """Map unconstrained parameters to knot tables of shape ``(..., K + 1)``."""
    k = raw_w.shape[-1]
    sm_w = _softmax(raw_w)
    sm_h = _softmax(raw_h)
    widths = 2.0 * bound * (MIN_BIN_WIDTH + (1.0 - MIN_BIN_WIDTH * k) * sm_w)
    heights = 2.0 * bound * (MIN_BIN_HEIGHT + (1.0 - MIN_BIN_HEIGHT * k) * sm_h)
    lead = raw_w.shape[:-1]
    xk = np.empty(lead + (k + 1,))
    yk = np.empty(lead + (k + 1,))
    xk[..., 0] = yk[..., 0] = -bound
    xk[..., 1:] = -bound + np.cumsum(widths, axis=-1)
    yk[..., 1:] = -bound + np.cumsum(heights, axis=-1)
    xk[..., k] = yk[..., k] = bound
    dk = np.ones(lead + (k + 1,))
    dk[..., 1:k] = MIN_DERIVATIVE + _softplus(raw_d + _DERIV_SHIFT)
    return xk, yk, dk, (sm_w, sm_h)


def spline_knots_backward(gxk, gyk, gdk, raw_d, softmaxes, bound):
    """Pull knot-table gradients back to the unconstrained parameters."""
    sm_w, sm_h = softmaxes
    k = sm_w.shape[-1]
    out = []
    for g_knots, sm, min_size in ((gxk, sm_w, MIN_BIN_WIDTH), (gyk, sm_h, MIN_BIN_HEIGHT)):
        # knot j (1 <= j <= K-1) is the sum of the first j sizes; knot K is pinned
        inner = g_knots[..., 1:k]
        g_size = np.zeros_like(sm)
        g_size[..., :k - 1] = np.cumsum(inner[..., ::-1], axis=-1)[..., ::-1]
        g_sm = g_size * 2.0 * bound * (1.0 - min_size * k)
        out.append(sm * (g_sm - np.sum(g_sm * sm, axis=-1, keepdims=True)))
    g_raw_d = gdk[..., 1:k] * _sigmoid(raw_d + _DERIV_SHIFT)
    return out[0], out[1], g_raw_d


class Standardize:
    """Fixed affine map ``(x - shift) / scale``; never trained."""

    trainable = False
    n_params = 0
    kind = "standardize"

    def __init__(self, shift, scale):
        self.shift = np.atleast_1d(np.asarray(shift, dtype=float))
        self.scale = np.atleast_1d(np.asarray(scale, dtype=float))
        self.dim = self.shift.size

    def get_params(self):
        return np.empty(0)

    def set_params(self, flat):
        return 0

    def forward(self, x):
        z = (x - self.shift) / self.scale
        logdet = np.full(x.shape[0], -np.sum(np.log(np.broadcast_to(self.scale, (self.dim,)))))
        return z, logdet, None

    def inverse(self, z):
        x = z * self.scale + self.shift
        logdet = np.full(z.shape[0], np.sum(np.log(np.broadcast_to(self.scale, (self.dim,)))))
        return x, logdet

    def backward(self, cache, gz, glogdet):
        return gz / self.scale, np.empty(0)

    def describe(self):
        return {"kind": self.kind, "shift": self.shift.tolist(), "scale": self.scale.tolist()}


class _Coupling:
    """Shared mask bookkeeping: ``mask[i]`` True keeps coordinate ``i`` fixed."""

    trainable = True

    def __init__(self, dim, mask):
        self.dim = int(dim)
        mask = np.zeros(self.dim, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != (self.dim,) or mask.all():
            raise ValueError("mask must have length dim and leave a coordinate to transform")
        self.mask = mask
        self.cond_idx = np.flatnonzero(mask)
        self.trans_idx = np.flatnonzero(~mask)
        # with nothing to condition on, the network sees a constant input
        self.cond_size = max(len(self.cond_idx), 1)

    def _cond_input(self, x):
        if len(self.cond_idx) == 0:
            return np.ones((1, 1))
        return x[:, self.cond_idx]

    def _cond_input_grad(self, gx, gin):
        if len(self.cond_idx):
            gx[:, self.cond_idx] += gin


class SplineCoupling(_Coupling):
    """Monotonic rational-quadratic spline on ``[-bound, bound]``, linear tails.

    Spline parameters come from an MLP of the fixed coordinates; in one
    dimension the MLP input is constant, so the spline is shared by all points.
    """

    kind = "spline"

    def __init__(self, dim, mask=None, bins=5, bound=3.0, hidden=(32, 32, 32), rng=None):
        super().__init__(dim, mask)
        self.bins = int(bins)
        self.bound = float(bound)
        self.hidden = tuple(hidden)
        self.per_coord = 3 * self.bins - 1
        out = len(self.trans_idx) * self.per_coord
        self.net = MLP((self.cond_size,) + self.hidden + (out,), rng)

    @property
    def n_params(self):
        return self.net.n_params

    def get_params(self):
        return self.net.get_params()

    def set_params(self, flat):
        return self.net.set_params(flat)

    def _raw(self, x):
        raw, acts = self.net.forward(self._cond_input(x))
        raw = raw.reshape(raw.shape[0], len(self.trans_idx), self.per_coord)
        k = self.bins
        return raw[..., :k], raw[..., k:2 * k], raw[..., 2 * k:], acts

    def _tables(self, x):
        rw, rh, rd, acts = self._raw(x)
        xk, yk, dk, sms = spline_knots(rw, rh, rd, self.bound)
        n = x.shape[0]
        if xk.shape[0] != n:
            xk, yk, dk = (np.broadcast_to(t, (n,) + t.shape[1:]) for t in (xk, yk, dk))
        return xk, yk, dk, (rw, rh, rd, acts, sms)

    def forward(self, x):
        xk, yk, dk, inner = self._tables(x)
        z = x.copy()
        logdet = np.zeros(x.shape[0])
        for c, i in enumerate(self.trans_idx):
            z[:, i], ld = kernels.rqs_forward(x[:, i], xk[:, c], yk[:, c], dk[:, c])
            logdet += ld
        return z, logdet, (x, xk, yk, dk, inner)

    def inverse(self, z):
        # conditioning coordinates pass through unchanged, so tables are known
        xk, yk, dk, _ = self._tables(z)
        x = z.copy()
        logdet = np.zeros(z.shape[0])
        for c, i in enumerate(self.trans_idx):
            x[:, i], ld = kernels.rqs_inverse(z[:, i], xk[:, c], yk[:, c], dk[:, c])
            logdet += ld
        return x, logdet

    def backward(self, cache, gz, glogdet):
        x, xk, yk, dk, (rw, rh, rd, acts, sms) = cache
        n = x.shape[0]
        gx = gz.copy()
        gxk = np.empty(xk.shape)
        gyk = np.empty(xk.shape)
        gdk = np.empty(xk.shape)
        for c, i in enumerate(self.trans_idx):
            gx[:, i], gxk[:, c], gyk[:, c], gdk[:, c] = kernels.rqs_backward(
                x[:, i], xk[:, c], yk[:, c], dk[:, c], gz[:, i], glogdet)
        if rw.shape[0] != n:
            gxk, gyk, gdk = (g.sum(axis=0, keepdims=True) for g in (gxk, gyk, gdk))
        g_rw, g_rh, g_rd = spline_knots_backward(gxk, gyk, gdk, rd, sms, self.bound)
        g_raw = np.concatenate([g_rw, g_rh, g_rd], axis=-1).reshape(rw.shape[0], -1)
        gin, gparams = self.net.backward(acts, g_raw)
        self._cond_input_grad(gx, gin)
        return gx, gparams

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "mask": self.mask.tolist(),
                "bins": self.bins, "bound": self.bound, "hidden": list(self.hidden)}


class AffineCoupling(_Coupling):
    """``z2 = (x2 * exp(mu(x1)) + nu(x1)) / C`` with separate networks mu, nu."""

    kind = "affine"

    def __init__(self, dim, mask=None, hidden=(16, 16, 16), C=1.0, rng=None):
        super().__init__(dim, mask)
        self.hidden = tuple(hidden)
        self.C = float(C)
        out = len(self.trans_idx)
        self.mu = MLP((self.cond_size,) + self.hidden + (out,), rng)
        self.nu = MLP((self.cond_size,) + self.hidden + (out,), rng)

    @property
    def n_params(self):
        return self.mu.n_params + self.nu.n_params

    def get_params(self):
        return np.concatenate([self.mu.get_params(), self.nu.get_params()])

    def set_params(self, flat):
        used = self.mu.set_params(flat)
        return used + self.nu.set_params(flat[used:])

    def forward(self, x):
        inp = self._cond_input(x)
        mu, mu_acts = self.mu.forward(inp)
        nu, nu_acts = self.nu.forward(inp)
        x2 = x[:, self.trans_idx]
        e = np.exp(mu)
        z = x.copy()
        z[:, self.trans_idx] = (x2 * e + nu) / self.C
        logdet = np.broadcast_to(np.sum(mu - math.log(self.C), axis=1), (x.shape[0],)).copy()
        return z, logdet, (x2, e, mu_acts, nu_acts, mu.shape[0])

    def inverse(self, z):
        inp = self._cond_input(z)
        mu, _ = self.mu.forward(inp)
        nu, _ = self.nu.forward(inp)
        x = z.copy()
        x[:, self.trans_idx] = (self.C * z[:, self.trans_idx] - nu) * np.exp(-mu)
        logdet = -np.broadcast_to(np.sum(mu - math.log(self.C), axis=1), (z.shape[0],))
        return x, logdet

    def backward(self, cache, gz, glogdet):
        x2, e, mu_acts, nu_acts, rows = cache
        gz2 = gz[:, self.trans_idx]
        gx = gz.copy()
        gx[:, self.trans_idx] = gz2 * e / self.C
        g_mu = gz2 * x2 * e / self.C + glogdet[:, None]
        g_nu = gz2 / self.C
        if rows != gz.shape[0]:
            g_mu = g_mu.sum(axis=0, keepdims=True)
            g_nu = g_nu.sum(axis=0, keepdims=True)
        gin_mu, gp_mu = self.mu.backward(mu_acts, g_mu)
        gin_nu, gp_nu = self.nu.backward(nu_acts, g_nu)
        self._cond_input_grad(gx, gin_mu + gin_nu)
        return gx, np.concatenate([gp_mu, gp_nu])

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "mask": self.mask.tolist(),
                "hidden": list(self.hidden), "C": self.C}


def from_description(desc):
    kind = desc["kind"]
    if kind == "standardize":
        return Standardize(desc["shift"], desc["scale"])
    if kind == "spline":
        return SplineCoupling(desc["dim"], desc["mask"], desc["bins"], desc["bound"], desc["hidden"])
    if kind == "affine":
        return AffineCoupling(desc["dim"], desc["mask"], desc["hidden"], desc["C"])
    raise ValueError(f"unknown transform kind {kind!r}")
