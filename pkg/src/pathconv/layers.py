"""Network layers with hand-derived backward passes.

Every layer follows the same convention: ``forward`` returns the output
plus an opaque cache, ``backward`` takes that cache and the gradient of
the loss with respect to the output, accumulates parameter gradients into
the layer's ``grad_*`` buffers and returns the gradient with respect to
the input.  Parameters are only ever mutated by the optimizer.

All arithmetic is 64-bit.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, NumericalError
from .shortest_paths import SPTensor, propagate, propagate_transpose


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...] | None = None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def concat_layers(h_list: list[np.ndarray]) -> np.ndarray:
    """Horizontal concatenation of per-layer node representations."""
    rows = {h.shape[0] for h in h_list}
    if len(rows) != 1:
        raise ValueError(f"row-count mismatch in concatenation: {sorted(rows)}")
    if len(h_list) == 1:
        return h_list[0]
    return np.hstack(h_list)


class DistanceConv:
    """Graph convolution with one weight matrix per shortest-path distance.

    For each distance j in 0..r the input rows are averaged over the nodes
    at distance exactly j, multiplied by the distance-specific weight
    matrix and squashed with tanh; the r+1 blocks are concatenated
    column-wise, giving an output width of (r+1) * c_out.
    """

    def __init__(self, r: int, c_in: int, c_out: int, rng: np.random.Generator):
        self.r = r
        self.c_in = c_in
        self.c_out = c_out
        self.weights = [glorot_uniform(rng, c_in, c_out) for _ in range(r + 1)]
        self.grad_weights = [np.zeros_like(w) for w in self.weights]

    @property
    def out_width(self) -> int:
        return (self.r + 1) * self.c_out

    def forward(self, sp: SPTensor, h: np.ndarray):
        if h.shape[1] != self.c_in:
            raise ValueError(f"expected {self.c_in} input columns, got {h.shape[1]}")
        means = [propagate(sp, j, h) for j in range(self.r + 1)]
        acts = [np.tanh(m @ w) for m, w in zip(means, self.weights)]
        return concat_layers(acts), (sp, means, acts)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        sp, means, acts = cache
        dh = np.zeros((dout.shape[0], self.c_in))
        for j in range(self.r + 1):
            da = dout[:, j * self.c_out:(j + 1) * self.c_out]
            dz = da * (1.0 - acts[j] ** 2)
            self.grad_weights[j] += means[j].T @ dz
            dh += propagate_transpose(sp, j, dz @ self.weights[j].T)
        return dh

    def parameters(self):
        return [(f"w{j}", w) for j, w in enumerate(self.weights)]

    def gradients(self):
        return [(f"w{j}", g) for j, g in enumerate(self.grad_weights)]


class JointConv:
    """Baseline graph convolution: joint mean over a node and its direct
    neighbors, one shared weight matrix, tanh."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator):
        self.c_in = c_in
        self.c_out = c_out
        self.weight = glorot_uniform(rng, c_in, c_out)
        self.grad_weight = np.zeros_like(self.weight)

    @property
    def out_width(self) -> int:
        return self.c_out

    def forward(self, sp: SPTensor, h: np.ndarray):
        if h.shape[1] != self.c_in:
            raise ValueError(f"expected {self.c_in} input columns, got {h.shape[1]}")
        counts = np.asarray(sp.mats[1].sum(axis=1)).ravel()  # exact integer degrees
        norm = 1.0 / (1.0 + counts)  # self-contribution keeps every row sum >= 1
        mean = norm[:, None] * (h + sp.mats[1] @ h)
        act = np.tanh(mean @ self.weight)
        return act, (sp, norm, mean, act)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        sp, norm, mean, act = cache
        dz = dout * (1.0 - act ** 2)
        self.grad_weight += mean.T @ dz
        dmean = dz @ self.weight.T
        scaled = norm[:, None] * dmean  # transpose of (I + A) with joint row norm
        return scaled + sp.mats[1] @ scaled

    def parameters(self):
        return [("w", self.weight)]

    def gradients(self):
        return [("w", self.grad_weight)]


class SortPool:
    """Fixed-size readout: order the rows lexicographically and keep k.

    Rows are sorted in descending order keyed on the last column, ties
    broken by the next column to the left, and finally by ascending
    original node index so the ordering is total and reproducible.  The
    top k rows are kept; zero rows are appended when the graph has fewer
    than k nodes.  The returned record maps output rows to source nodes
    for gradient routing.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ConfigError(f"sort-pooling size must be positive, got {k}")
        self.k = k

    def forward(self, h: np.ndarray):
        n, c = h.shape
        # Stable sort on the negated last column: descending values, ties in
        # ascending index order.
        order = np.argsort(-h[:, c - 1], kind="stable")
        sorted_last = h[order, c - 1]
        pos = 0
        while pos < n:  # refine groups tied on the last column
            end = pos + 1
            while end < n and sorted_last[end] == sorted_last[pos]:
                end += 1
            if end - pos > 1:
                rows = order[pos:end]
                sub = h[rows, : c - 1]
                varying = np.flatnonzero(sub.max(axis=0) > sub.min(axis=0))
                if varying.size:
                    # rows (ascending index) is the least significant key.
                    keys = (rows,) + tuple(-sub[:, col] for col in varying)
                    order[pos:end] = rows[np.lexsort(keys)]
            pos = end
        selected = order[: min(n, self.k)]
        out = np.zeros((self.k, c))
        out[: selected.size] = h[selected]
        return out, (selected, n, c)

    def backward(self, record, dout: np.ndarray) -> np.ndarray:
        selected, n, c = record
        if dout.shape != (self.k, c):
            raise ValueError(f"gradient shape {dout.shape} does not match ({self.k}, {c})")
        dh = np.zeros((n, c))
        dh[selected] = dout[: selected.size]
        return dh


class Conv1D:
    """1-D cross-correlation over a (length, channels) signal."""

    def __init__(self, c_in: int, filters: int, width: int, stride: int,
                 rng: np.random.Generator):
        self.c_in = c_in
        self.filters = filters
        self.width = width
        self.stride = stride
        self.kernel = glorot_uniform(rng, width * c_in, filters,
                                     shape=(filters, width, c_in))
        self.bias = np.zeros(filters)
        self.grad_kernel = np.zeros_like(self.kernel)
        self.grad_bias = np.zeros_like(self.bias)

    def out_length(self, length: int) -> int:
        if length < self.width:
            raise ConfigError(
                f"signal of length {length} is shorter than kernel width {self.width}"
            )
        return (length - self.width) // self.stride + 1

    def forward(self, x: np.ndarray):
        t_out = self.out_length(x.shape[0])
        if self.stride == self.width:
            # Non-overlapping windows tile the front of the signal, so the
            # convolution is a plain matrix product.
            tiles = x[: t_out * self.width].reshape(t_out, self.width * self.c_in)
            out = tiles @ self.kernel.reshape(self.filters, -1).T + self.bias
        else:
            windows = sliding_window_view(x, self.width, axis=0)[:: self.stride]
            out = np.einsum("tcw,owc->to", windows, self.kernel) + self.bias
        return out, x

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        x = cache
        t_out = dout.shape[0]
        self.grad_bias += dout.sum(axis=0)
        dx = np.zeros_like(x)
        if self.stride == self.width:
            tiles = x[: t_out * self.width].reshape(t_out, self.width * self.c_in)
            kflat = self.kernel.reshape(self.filters, -1)
            self.grad_kernel += (dout.T @ tiles).reshape(self.kernel.shape)
            dx[: t_out * self.width] = (dout @ kflat).reshape(-1, self.c_in)
        else:
            windows = sliding_window_view(x, self.width, axis=0)[:: self.stride]
            self.grad_kernel += np.einsum("to,tcw->owc", dout, windows)
            contrib = np.einsum("to,owc->twc", dout, self.kernel)
            for w in range(self.width):
                dx[w::self.stride][:t_out] += contrib[:, w, :]
        return dx

    def parameters(self):
        return [("kernel", self.kernel), ("bias", self.bias)]

    def gradients(self):
        return [("kernel", self.grad_kernel), ("bias", self.grad_bias)]


class MaxPool1D:
    """Max pooling over the time axis of a (length, channels) signal."""

    def __init__(self, width: int = 2, stride: int = 2):
        self.width = width
        self.stride = stride

    def out_length(self, length: int) -> int:
        if length < self.width:
            raise ConfigError(
                f"signal of length {length} is shorter than pool width {self.width}"
            )
        return (length - self.width) // self.stride + 1

    def forward(self, x: np.ndarray):
        t_out = self.out_length(x.shape[0])
        if self.stride == self.width:
            windows = x[: t_out * self.width].reshape(t_out, self.width, x.shape[1])
            arg = windows.argmax(axis=1)  # first max wins ties, deterministically
            out = np.take_along_axis(windows, arg[:, None, :], axis=1)[:, 0, :]
        else:
            windows = sliding_window_view(x, self.width, axis=0)[:: self.stride]
            arg = windows.argmax(axis=2)
            out = np.take_along_axis(windows, arg[:, :, None], axis=2)[:, :, 0]
        return out, (arg, x.shape)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        arg, x_shape = cache
        t_out, channels = dout.shape
        dx = np.zeros(x_shape)
        rows = np.arange(t_out)[:, None] * self.stride + arg
        np.add.at(dx, (rows, np.arange(channels)[None, :]), dout)
        return dx


class Dense:
    """Affine layer on a flat vector."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator):
        self.weight = glorot_uniform(rng, c_in, c_out)
        self.bias = np.zeros(c_out)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)

    def forward(self, x: np.ndarray):
        return x @ self.weight + self.bias, x

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        x = cache
        self.grad_weight += np.outer(x, dout)
        self.grad_bias += dout
        return dout @ self.weight.T

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def gradients(self):
        return [("weight", self.grad_weight), ("bias", self.grad_bias)]


class ReLU:
    def forward(self, x: np.ndarray):
        return np.maximum(x, 0.0), x > 0

    def backward(self, mask, dout: np.ndarray) -> np.ndarray:
        return dout * mask


class Dropout:
    """Inverted dropout; identity outside training mode."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: np.ndarray, train_mode: bool, rng: np.random.Generator | None):
        if not train_mode or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, mask, dout: np.ndarray) -> np.ndarray:
        return dout if mask is None else dout * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Stabilized cross-entropy loss and its gradient in the logits."""
    if not 0 <= target < logits.shape[0]:
        raise ValueError(f"target {target} outside 0..{logits.shape[0] - 1}")
    z = logits - logits.max()
    e = np.exp(z)
    total = e.sum()
    loss = float(np.log(total) - z[target])
    grad = e / total
    grad[target] -= 1.0
    return loss, grad


class Adam:
    """Bias-corrected adaptive-moment optimizer over named parameters.

    ``params`` is a list of (name, array) pairs; arrays are updated in
    place.  Moment buffers match parameter shapes and persist across
    steps.
    """

    def __init__(self, params: list[tuple[str, np.ndarray]], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for _, p in params]
        self.v = [np.zeros_like(p) for _, p in params]

    def step(self, grads: list[tuple[str, np.ndarray]]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, ((name, p), (gname, g)) in enumerate(zip(self.params, grads)):
            if name != gname:
                raise ValueError(f"parameter/gradient mismatch: {name} vs {gname}")
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient in {name}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
