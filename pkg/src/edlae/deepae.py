"""Deep nonlinear autoencoders versus the rank-k linear optimum.

A deep AE here is f(X) = g(X) @ W_out where g is a stack of nonlinear
layers whose last hidden width is k and W_out is a plain linear map; any
such model's output matrix has rank at most k, so its training squared
error can never drop below the rank-k truncated-SVD error of X.  This
module trains such models by full-batch gradient descent with hand-written
backpropagation and checks that bound empirically over many trials,
architectures, and data generators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .closed_form import LowRankModel
from .errors import DimensionMismatch, Divergence
from .linalg import dense_svd


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, h):
    return 1.0 - h * h


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, h):
    return (z > 0.0).astype(np.float64)


def _linear(z):
    return z


def _linear_grad(z, h):
    return np.ones_like(z)


ACTIVATIONS = {
    "tanh": (_tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_linear, _linear_grad),
}


@dataclass(frozen=True)
class ArchSpec:
    """Encoder architecture: hidden widths as multiples of the bottleneck k.

    ``hidden_multipliers`` lists the widths of the layers before the final
    k-wide hidden layer, e.g. () is a single n->k layer and (4, 2) is
    n->4k->2k->k.  The activation applies to every hidden layer; the output
    map stays linear.
    """

    name: str
    hidden_multipliers: tuple[int, ...]
    activation: str

    def widths(self, k: int) -> list[int]:
        return [m * k for m in self.hidden_multipliers] + [k]


DEFAULT_ARCHS = (
    ArchSpec("tanh-1layer", (), "tanh"),
    ArchSpec("tanh-2layer", (2,), "tanh"),
    ArchSpec("relu-3layer", (4, 2), "relu"),
)


@dataclass
class DeepAEParams:
    """Weights and biases of the encoder stack plus the final linear map.

    ``w_out`` starts at zero so an untrained model reproduces nothing, which
    pins the initial squared error at ||X||_F^2.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    w_out: np.ndarray
    activation: str

    def copy(self) -> "DeepAEParams":
        return DeepAEParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.w_out.copy(),
            self.activation,
        )


def init_params(n: int, k: int, arch: ArchSpec, seed: int) -> DeepAEParams:
    if arch.activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {arch.activation!r}")
    rng = np.random.default_rng(seed)
    widths = arch.widths(k)
    weights, biases = [], []
    fan_in = n
    for width in widths:
        weights.append(rng.standard_normal((fan_in, width)) / np.sqrt(fan_in))
        biases.append(np.zeros(width))
        fan_in = width
    return DeepAEParams(weights, biases, np.zeros((k, n)), arch.activation)


def deep_ae_forward(params: DeepAEParams, x: np.ndarray) -> np.ndarray:
    """Row-wise encoder application followed by the linear output map."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise DimensionMismatch(
            f"input has shape {x.shape}, encoder expects {params.weights[0].shape[0]} columns"
        )
    act, _ = ACTIVATIONS[params.activation]
    h = x
    for w, b in zip(params.weights, params.biases):
        h = act(h @ w + b)
    return h @ params.w_out


def squared_error(x: np.ndarray, xhat: np.ndarray) -> float:
    """Squared Frobenius norm of the reconstruction error."""
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {xhat.shape}")
    diff = x - xhat
    return float(np.sum(diff * diff))


def se_and_gradients(params: DeepAEParams, x: np.ndarray):
    """Squared error and its gradient w.r.t. every parameter (backprop)."""
    act, act_grad = ACTIVATIONS[params.activation]
    pre, post = [], []
    h = x
    for w, b in zip(params.weights, params.biases):
        z = h @ w + b
        h_new = act(z)
        pre.append(z)
        post.append(h_new)
        h = h_new
    out = h @ params.w_out
    diff = out - x
    se = float(np.sum(diff * diff))

    d_out = 2.0 * diff
    g_w_out = post[-1].T @ d_out
    d_h = d_out @ params.w_out.T
    g_weights = [None] * len(params.weights)
    g_biases = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        d_z = d_h * act_grad(pre[layer], post[layer])
        below = post[layer - 1] if layer > 0 else x
        g_weights[layer] = below.T @ d_z
        g_biases[layer] = d_z.sum(axis=0)
        if layer > 0:
            d_h = d_z @ params.weights[layer].T
    return se, (g_weights, g_biases, g_w_out)


def _flatten(params: DeepAEParams) -> np.ndarray:
    parts = [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
    parts.append(params.w_out.ravel())
    return np.concatenate(parts)


def _assign_flat(params: DeepAEParams, theta: np.ndarray) -> None:
    offset = 0
    for w in params.weights:
        w[...] = theta[offset : offset + w.size].reshape(w.shape)
        offset += w.size
    for b in params.biases:
        b[...] = theta[offset : offset + b.size].reshape(b.shape)
        offset += b.size
    params.w_out[...] = theta[offset:].reshape(params.w_out.shape)


def gradient_max_error(params: DeepAEParams, x: np.ndarray, step: float = 1e-6) -> float:
    """Worst deviation between analytic and central finite-difference
    gradients, scaled by the gradient's magnitude."""
    se, (gw, gb, gout) = se_and_gradients(params, x)
    analytic = np.concatenate(
        [g.ravel() for g in gw] + [g.ravel() for g in gb] + [gout.ravel()]
    )
    theta = _flatten(params)
    probe = params.copy()
    numeric = np.empty_like(analytic)
    for i in range(theta.size):
        bump = theta.copy()
        bump[i] = theta[i] + step
        _assign_flat(probe, bump)
        up = squared_error(x, deep_ae_forward(probe, x))
        bump[i] = theta[i] - step
        _assign_flat(probe, bump)
        down = squared_error(x, deep_ae_forward(probe, x))
        numeric[i] = (up - down) / (2.0 * step)
    scale = max(1.0, float(np.abs(analytic).max()), float(np.abs(numeric).max()))
    return float(np.abs(analytic - numeric).max() / scale)


def train_deep_ae(x: np.ndarray, arch: ArchSpec, k: int, steps: int = 500,
                  lr: float = 1e-3, seed: int = 0, max_halvings: int = 60):
    """Full-batch gradient descent on the reconstruction squared error.

    The step size is fixed; when the loss turns non-finite the trainer
    restarts from the best parameters seen and halves the step.  Returns
    (params, best squared error seen).  Raises Divergence if halving cannot
    restore a finite loss.
    """
    x = np.asarray(x, dtype=np.float64)
    m, n = x.shape
    if not 1 <= k < min(m, n):
        raise DimensionMismatch(f"bottleneck k must satisfy 1 <= k < min{m, n}, got {k}")
    params = init_params(n, k, arch, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        best_se = squared_error(x, deep_ae_forward(params, x))
    best_params = params.copy()
    halvings = 0
    for _ in range(steps):
        # overflow here is expected when the step is too large; the halving
        # logic below handles it, so suppress the warnings
        with np.errstate(over="ignore", invalid="ignore"):
            se, (gw, gb, gout) = se_and_gradients(params, x)
        if not np.isfinite(se):
            # restart from the best parameters seen with a smaller step
            params = best_params.copy()
            lr *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise Divergence(
                    f"loss stayed non-finite after {halvings} step halvings; lower the learning rate"
                )
            continue
        if se < best_se:
            best_se = se
            best_params = params.copy()
        for w, g in zip(params.weights, gw):
            w -= lr * g
        for b, g in zip(params.biases, gb):
            b -= lr * g
        params.w_out -= lr * gout
    with np.errstate(over="ignore", invalid="ignore"):
        final_se = squared_error(x, deep_ae_forward(params, x))
    if np.isfinite(final_se) and final_se < best_se:
        best_se = final_se
        best_params = params.copy()
    return best_params, best_se


def linear_ae_optimum(x: np.ndarray, k: int):
    """Best achievable squared error of a rank-k linear AE, with a witness.

    The optimum equals the truncated-SVD error, i.e. the sum of the squared
    discarded singular values; the witness model is V_k on both sides, so
    predictions are X @ V_k @ V_k^T.
    """
    x = np.asarray(x, dtype=np.float64)
    m, n = x.shape
    if not 1 <= k < min(m, n):
        raise DimensionMismatch(f"k must satisfy 1 <= k < min{m, n}, got {k}")
    svd = dense_svd(x)
    se_linear = float(np.sum(svd.singular[k:] ** 2))
    v_k = svd.right[:, :k].copy()
    model = LowRankModel(u=v_k, v=v_k.copy(), rank=k, config=None, kind="linear-svd")
    return model, se_linear


def _gen_gaussian(rng, m, n):
    return rng.standard_normal((m, n))


def _gen_low_rank_noise(rng, m, n):
    r = max(1, min(m, n) // 4)
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, n)) + 0.1 * rng.standard_normal((m, n))


def _gen_sparse_binary(rng, m, n):
    return (rng.random((m, n)) < 0.2).astype(np.float64)


DEFAULT_GENERATORS = {
    "gaussian": _gen_gaussian,
    "low-rank-noise": _gen_low_rank_noise,
    "sparse-binary": _gen_sparse_binary,
}


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    arch: str
    generator: str
    k: int
    se_deep: float
    se_linear: float

    @property
    def gap(self) -> float:
        return self.se_deep - self.se_linear

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "arch": self.arch,
                "generator": self.generator,
                "k": self.k,
                "se_deep": self.se_deep,
                "se_linear": self.se_linear,
                "gap": self.gap,
            }
        )


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the deep-vs-linear training-error check.

    Passes when every trial satisfies se_deep >= se_linear - tol_rel *
    se_linear; the deep model may tie (it does when it converges to the
    truncated-SVD optimum) but must never land meaningfully below.
    """

    trials: list[TrialRecord] = field(default_factory=list)
    tol_rel: float = 1e-6

    def failures(self) -> list[TrialRecord]:
        return [t for t in self.trials if t.gap < -self.tol_rel * t.se_linear]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def write_jsonl(self, stream) -> None:
        for trial in self.trials:
            stream.write(trial.to_json() + "\n")
        stream.write(self.summary() + "\n")

    def summary(self) -> str:
        gaps = np.array([t.gap for t in self.trials]) if self.trials else np.zeros(0)
        return json.dumps(
            {
                "trials": len(self.trials),
                "failures": len(self.failures()),
                "min_gap": float(gaps.min()) if gaps.size else 0.0,
                "passed": self.passed,
            }
        )


def verify_linear_bound(m: int = 30, n: int = 20, ks=(2, 5, 10),
                        archs=DEFAULT_ARCHS, generators=None, trials: int = 81,
                        restarts: int = 5, steps: int = 400, lr: float = 5e-4,
                        seed: int = 0, tol_rel: float = 1e-6) -> BoundReport:
    """Train deep AEs across architectures, generators, ranks, and seeds and
    record their best squared error against the rank-k linear optimum.

    Runs exactly ``trials`` trials, cycling round-robin through the
    (generator, architecture, k) grid with per-trial rng streams derived
    from (seed, trial index).  Every k must satisfy k < min(m, n).  Trial
    failures are recorded in the report, never raised.
    """
    generators = DEFAULT_GENERATORS if generators is None else generators
    for k in ks:
        if not 1 <= k < min(m, n):
            raise ValueError(f"every k must satisfy 1 <= k < min(m, n) = {min(m, n)}, got {k}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    combos = [
        (gen_name, gen, arch, k)
        for gen_name, gen in generators.items()
        for arch in archs
        for k in ks
    ]
    records = []
    for index in range(trials):
        gen_name, gen, arch, k = combos[index % len(combos)]
        trial_seed = int(np.random.default_rng((seed, index)).integers(2**31))
        rng = np.random.default_rng((seed, index, 1))
        x = gen(rng, m, n)
        _, se_linear = linear_ae_optimum(x, k)
        se_deep = np.inf
        for restart in range(restarts):
            _, se = train_deep_ae(x, arch, k, steps=steps, lr=lr, seed=trial_seed + restart)
            se_deep = min(se_deep, se)
        records.append(
            TrialRecord(
                seed=trial_seed,
                arch=arch.name,
                generator=gen_name,
                k=k,
                se_deep=se_deep,
                se_linear=se_linear,
            )
        )
    return BoundReport(trials=records, tol_rel=tol_rel)
