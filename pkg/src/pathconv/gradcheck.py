"""Central-finite-difference verification of every analytic gradient.

Each check builds a scalar objective (a fixed random projection of the
layer output, or the model's cross-entropy loss), computes the analytic
gradient through ``backward`` and compares it against central differences
with step 1e-6 in 64-bit.  Inputs feeding the sorting and max-pooling
layers are constructed with well-separated keys so the objective is
smooth in the checked neighborhood.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import Graph
from .layers import (
    Conv1D,
    Dense,
    DistanceConv,
    JointConv,
    MaxPool1D,
    SortPool,
    softmax_cross_entropy,
)
from .model import Model, ModelConfig
from .shortest_paths import compute_sp_tensor

STEP = 1e-6
LAYER_TOL = 1e-6
MODEL_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.rel_error < self.tolerance


def central_difference(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f()
        flat[i] = orig - step
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(analytic).max(initial=0.0)),
                float(np.abs(numeric).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def _test_graph(rng: np.random.Generator, n: int = 7) -> Graph:
    edges = {(0, 1), (1, 2), (2, 3), (3, 4), (1, 4), (4, 5), (5, 6)}
    d = 3
    features = np.zeros((n, d))
    features[np.arange(n), rng.integers(0, d, size=n)] = 1.0
    return Graph(node_count=n, edges=frozenset(edges), features=features, target=0)


def _projection_objective(layer_forward, projection):
    def objective():
        return float((layer_forward() * projection).sum())
    return objective


def check_distance_conv(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    graph = _test_graph(rng)
    sp = compute_sp_tensor(graph, r=2)
    layer = DistanceConv(r=2, c_in=3, c_out=4, rng=rng)
    h = rng.normal(size=(graph.node_count, 3))
    projection = rng.normal(size=(graph.node_count, layer.out_width))

    out, cache = layer.forward(sp, h)
    for _, g in layer.gradients():
        g[...] = 0.0
    dh = layer.backward(cache, projection.copy())

    objective = _projection_objective(lambda: layer.forward(sp, h)[0], projection)
    results = []
    for (name, p), (_, g) in zip(layer.parameters(), layer.gradients()):
        numeric = central_difference(objective, p)
        results.append(CheckResult(f"distance_conv.{name}", relative_error(g, numeric),
                                   LAYER_TOL))
    numeric = central_difference(objective, h)
    results.append(CheckResult("distance_conv.input", relative_error(dh, numeric),
                               LAYER_TOL))
    return results


def check_joint_conv(seed: int = 1) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    graph = _test_graph(rng)
    sp = compute_sp_tensor(graph, r=1)
    layer = JointConv(c_in=3, c_out=4, rng=rng)
    h = rng.normal(size=(graph.node_count, 3))
    projection = rng.normal(size=(graph.node_count, 4))

    _, cache = layer.forward(sp, h)
    layer.grad_weight[...] = 0.0
    dh = layer.backward(cache, projection.copy())

    objective = _projection_objective(lambda: layer.forward(sp, h)[0], projection)
    results = [CheckResult("joint_conv.w",
                           relative_error(layer.grad_weight,
                                          central_difference(objective, layer.weight)),
                           LAYER_TOL)]
    results.append(CheckResult("joint_conv.input",
                               relative_error(dh, central_difference(objective, h)),
                               LAYER_TOL))
    return results


def _separated_rows(rng: np.random.Generator, n: int, c: int,
                    gap: float = 0.1) -> np.ndarray:
    """Rows whose last column is separated by at least ``gap``."""
    h = rng.normal(size=(n, c))
    h[:, -1] = rng.permutation(n) * gap * 1.5 + rng.uniform(0, gap / 4, size=n)
    return h


def check_sortpool(seed: int = 2) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    layer = SortPool(k=4)
    h = _separated_rows(rng, n=6, c=3)
    projection = rng.normal(size=(4, 3))

    _, record = layer.forward(h)
    dh = layer.backward(record, projection.copy())
    objective = _projection_objective(lambda: layer.forward(h)[0], projection)
    numeric = central_difference(objective, h)
    return [CheckResult("sortpool.input", relative_error(dh, numeric), LAYER_TOL)]


def check_conv1d(seed: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for label, width, stride, c_in in (("tiled", 4, 4, 1), ("sliding", 5, 1, 3)):
        layer = Conv1D(c_in=c_in, filters=3, width=width, stride=stride, rng=rng)
        x = rng.normal(size=(16, c_in))
        t_out = layer.out_length(16)
        projection = rng.normal(size=(t_out, 3))

        _, cache = layer.forward(x)
        for _, g in layer.gradients():
            g[...] = 0.0
        dx = layer.backward(cache, projection.copy())
        objective = _projection_objective(lambda: layer.forward(x)[0], projection)
        for (name, p), (_, g) in zip(layer.parameters(), layer.gradients()):
            numeric = central_difference(objective, p)
            results.append(CheckResult(f"conv1d[{label}].{name}",
                                       relative_error(g, numeric), LAYER_TOL))
        numeric = central_difference(objective, x)
        results.append(CheckResult(f"conv1d[{label}].input",
                                   relative_error(dx, numeric), LAYER_TOL))
    return results


def check_maxpool(seed: int = 4) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    layer = MaxPool1D(width=2, stride=2)
    # Separate window entries so the argmax is stable under the FD step.
    x = rng.permutation(12 * 3).reshape(12, 3) * 0.05 + rng.uniform(0, 0.01, (12, 3))
    projection = rng.normal(size=(6, 3))

    _, cache = layer.forward(x)
    dx = layer.backward(cache, projection.copy())
    objective = _projection_objective(lambda: layer.forward(x)[0], projection)
    numeric = central_difference(objective, x)
    return [CheckResult("maxpool.input", relative_error(dx, numeric), LAYER_TOL)]


def check_dense(seed: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    layer = Dense(c_in=7, c_out=4, rng=rng)
    x = rng.normal(size=7)
    projection = rng.normal(size=4)

    _, cache = layer.forward(x)
    for _, g in layer.gradients():
        g[...] = 0.0
    dx = layer.backward(cache, projection.copy())
    objective = _projection_objective(lambda: layer.forward(x)[0], projection)
    results = []
    for (name, p), (_, g) in zip(layer.parameters(), layer.gradients()):
        numeric = central_difference(objective, p)
        results.append(CheckResult(f"dense.{name}", relative_error(g, numeric),
                                   LAYER_TOL))
    numeric = central_difference(objective, x)
    results.append(CheckResult("dense.input", relative_error(dx, numeric), LAYER_TOL))
    return results


def check_cross_entropy(seed: int = 6) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=5)
    _, grad = softmax_cross_entropy(logits, target=2)
    numeric = central_difference(lambda: softmax_cross_entropy(logits, 2)[0], logits)
    # The loss gradient is exact, so hold it to a tighter tolerance.
    return [CheckResult("softmax_cross_entropy", relative_error(grad, numeric), 1e-8)]


def model_sort_key_gap(model: Model, sp, x) -> float:
    """Smallest gap between adjacent sort keys at the pooling layer."""
    from .layers import concat_layers

    hcat = concat_layers(model.conv_activations(sp, x))
    keys = np.sort(hcat[:, -1])
    return float(np.diff(keys).min()) if keys.size > 1 else np.inf


def check_model(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    graph = _test_graph(rng)
    sp = compute_sp_tensor(graph, r=2)
    config = ModelConfig(r=2, conv_layers=2, channels=3, sortpool_k=10,
                         conv1_filters=3, conv2_filters=4, dense_width=6,
                         dropout_rate=0.0, seed=int(rng.integers(1 << 31)))
    model = Model(config, feature_dim=3, num_classes=2)
    x = graph.features + rng.normal(scale=0.3, size=graph.features.shape)
    # Nudge every parameter (biases included) so no pre-activation sits
    # exactly on a rectifier kink; zero-padded pooling rows would otherwise
    # land there systematically.
    for _, p in model.parameters():
        p += rng.uniform(-0.3, 0.3, size=p.shape)

    # Kinks next to the evaluation point would poison the differences;
    # require clearly separated sort keys and off-zero pre-activations.
    gap = model_sort_key_gap(model, sp, x)
    if gap <= 1e-2:
        raise AssertionError(f"sort keys too close for a finite-difference check: {gap}")
    _, probe = model.forward(sp, x)
    for key in ("z1", "z2", "d1"):
        margin = float(np.abs(probe[key]).min())
        if margin <= 1e-4:
            raise AssertionError(f"pre-activation {key} too close to a kink: {margin}")

    def objective():
        _, cache = model.forward(sp, x)
        loss, _ = softmax_cross_entropy(cache["logits"], 1)
        return loss

    model.zero_gradients()
    _, cache = model.forward(sp, x)
    _, dlogits = softmax_cross_entropy(cache["logits"], 1)
    dx = model.backward(cache, dlogits)

    results = []
    for (name, p), (_, g) in zip(model.parameters(), model.gradients()):
        numeric = central_difference(objective, p)
        results.append(CheckResult(f"model.{name}", relative_error(g, numeric),
                                   MODEL_TOL))
    numeric = central_difference(objective, x)
    results.append(CheckResult("model.input", relative_error(dx, numeric), MODEL_TOL))
    return results


def run_all() -> list[CheckResult]:
    """The full finite-difference suite, layer by layer and end to end."""
    results = []
    results += check_distance_conv()
    results += check_joint_conv()
    results += check_sortpool()
    results += check_conv1d()
    results += check_maxpool()
    results += check_dense()
    results += check_cross_entropy()
    results += check_model()
    return results


def main_report(out=print) -> bool:
    start = time.perf_counter()
    results = run_all()
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        ok &= res.passed
        out(f"{status}  {res.name:<36} rel_err={res.rel_error:.3e} (tol {res.tolerance:.0e})")
    out(f"{'OK' if ok else 'FAILED'}: {len(results)} gradient checks in "
        f"{time.perf_counter() - start:.1f}s")
    return ok
