"""Minimal dense Q-network numerics: forward pass with LayerNorm + ReLU,
hand-rolled reverse-mode gradients, Huber loss, elementwise gradient
clipping, orthogonal initialization, and an Adam optimizer step. Everything
is float64 numpy so runs are bit-reproducible.

Hidden layers compute relu(layernorm(W h + b)) with learnable gain/shift;
the output layer is plain affine.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8
GRAD_CLIP = 1.0


def orthogonal(rows: int, cols: int, gain: float,
               rng: np.random.Generator) -> np.ndarray:
    """Orthogonal (rows, cols) matrix scaled by gain, via QR of a Gaussian
    draw with the sign-of-R fix so the distribution is uniform."""
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    q = q * np.where(d == 0.0, 1.0, np.sign(d))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


class QNetwork:
    """Dense Q-network with named parameter arrays and Adam moments.

    Parameters live in `params` under names W0/b0/g0/s0, W1/..., with the
    LayerNorm gain g and shift s present on hidden layers only. `version`
    bumps on every parameter mutation so forward caches can detect
    staleness.
    """

    def __init__(self, layer_sizes, rng: np.random.Generator):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must all be >= 1, got {layer_sizes}")
        self.sizes = sizes
        self.params: dict[str, np.ndarray] = {}
        out = len(sizes) - 2              # layer index of the affine output
        for l in range(len(sizes) - 1):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            gain = 1.0 if l == out else np.sqrt(2.0)
            self.params[f"W{l}"] = orthogonal(fan_out, fan_in, gain, rng)
            self.params[f"b{l}"] = np.zeros(fan_out)
            if l != out:
                self.params[f"g{l}"] = np.ones(fan_out)
                self.params[f"s{l}"] = np.zeros(fan_out)
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.step_count = 0
        self.version = 0

    @property
    def d_in(self) -> int:
        return self.sizes[0]

    @property
    def d_out(self) -> int:
        return self.sizes[-1]

    @property
    def n_hidden(self) -> int:
        return len(self.sizes) - 2

    def param_count(self) -> int:
        return sum(v.size for v in self.params.values())

    def clone(self) -> "QNetwork":
        """Deep copy (used to spawn target networks)."""
        other = object.__new__(QNetwork)
        other.sizes = list(self.sizes)
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.m = {k: v.copy() for k, v in self.m.items()}
        other.v = {k: v.copy() for k, v in self.v.items()}
        other.step_count = self.step_count
        other.version = self.version
        return other


def forward_batch(net: QNetwork, X) -> tuple[np.ndarray, dict]:
    """Batched forward pass; the cache feeds network_gradients."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.d_in:
        raise ValueError(f"expected inputs (batch, {net.d_in}), got {X.shape}")
    hs, zhats, inv_stds, masks = [X], [], [], []
    H = X
    for l in range(net.n_hidden):
        Z = H @ net.params[f"W{l}"].T + net.params[f"b{l}"]
        mu = Z.mean(axis=1, keepdims=True)
        var = Z.var(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + LN_EPS)
        Zhat = (Z - mu) * inv
        A = net.params[f"g{l}"] * Zhat + net.params[f"s{l}"]
        H = np.maximum(A, 0.0)
        zhats.append(Zhat)
        inv_stds.append(inv)
        masks.append(A > 0.0)
        hs.append(H)
    out = net.n_hidden
    Q = H @ net.params[f"W{out}"].T + net.params[f"b{out}"]
    cache = {"hs": hs, "zhats": zhats, "inv_stds": inv_stds, "masks": masks,
             "batch": X.shape[0], "version": net.version}
    return Q, cache


def forward(net: QNetwork, x) -> np.ndarray:
    """Single-vector forward pass."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d_in,):
        raise ValueError(f"expected input of shape ({net.d_in},), got {x.shape}")
    Q, _ = forward_batch(net, x[None, :])
    return Q[0]


def huber(residual, delta: float = 1.0):
    """Huber loss and its derivative wrt the residual; elementwise on
    arrays, scalar in/scalar out."""
    r = np.asarray(residual, dtype=float)
    small = np.abs(r) <= delta
    loss = np.where(small, 0.5 * r * r, delta * (np.abs(r) - 0.5 * delta))
    grad = np.where(small, r, delta * np.sign(r))
    if np.ndim(residual) == 0:
        return float(loss), float(grad)
    return loss, grad


def network_gradients(net: QNetwork, cache: dict, output_grads,
                      is_weights) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of mean_i(w_i * loss_i) given per-sample loss
    gradients at the output units (zero everywhere except acted cells)."""
    if cache["version"] != net.version:
        raise RuntimeError("stale forward cache: parameters changed since forward")
    G = np.asarray(output_grads, dtype=float)
    w = np.asarray(is_weights, dtype=float)
    batch = cache["batch"]
    if G.shape != (batch, net.d_out):
        raise ValueError(f"output grads must be ({batch}, {net.d_out}), got {G.shape}")
    if w.shape != (batch,):
        raise ValueError(f"is_weights must be ({batch},), got {w.shape}")
    if np.any(w < 0):
        raise ValueError("is_weights must be non-negative")

    grads = {}
    D = G * w[:, None] / batch
    out = net.n_hidden
    grads[f"W{out}"] = D.T @ cache["hs"][out]
    grads[f"b{out}"] = D.sum(axis=0)
    dH = D @ net.params[f"W{out}"]
    for l in range(net.n_hidden - 1, -1, -1):
        dA = dH * cache["masks"][l]
        Zhat = cache["zhats"][l]
        grads[f"g{l}"] = (dA * Zhat).sum(axis=0)
        grads[f"s{l}"] = dA.sum(axis=0)
        dZhat = dA * net.params[f"g{l}"]
        # LayerNorm backward over the feature axis (population variance)
        mean_d = dZhat.mean(axis=1, keepdims=True)
        mean_dz = (dZhat * Zhat).mean(axis=1, keepdims=True)
        dZ = cache["inv_stds"][l] * (dZhat - mean_d - Zhat * mean_dz)
        grads[f"W{l}"] = dZ.T @ cache["hs"][l]
        grads[f"b{l}"] = dZ.sum(axis=0)
        dH = dZ @ net.params[f"W{l}"]
    return grads


def backward_and_step(net: QNetwork, cache: dict, output_grads, is_weights,
                      lr: float) -> dict:
    """Backprop, clip every gradient component to [-1, 1], apply one Adam
    step, and report pre-clip gradient norms."""
    grads = network_gradients(net, cache, output_grads, is_weights)
    norms = {k: float(np.linalg.norm(g)) for k, g in grads.items()}
    report = {"grad_norms": norms,
              "global_norm": float(np.sqrt(sum(n * n for n in norms.values())))}
    net.step_count += 1
    bc1 = 1.0 - ADAM_BETA1 ** net.step_count
    bc2 = 1.0 - ADAM_BETA2 ** net.step_count
    for k, p in net.params.items():
        g = np.clip(grads[k], -GRAD_CLIP, GRAD_CLIP)
        m, v = net.m[k], net.v[k]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    net.version += 1
    return report
