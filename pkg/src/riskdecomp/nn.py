"""Fully connected ReLU regressors with hand-written backprop and optimizers.

Parameters are stored as one flat vector per network. Internally several
networks of the same architecture can be stacked along a leading axis and
trained in lockstep, which is how the standard, bias and variance runs of a
triplet are advanced together.
"""

from dataclasses import dataclass, field

import numpy as np

from ._seeding import child_rng, child_seed
from .matrec import DivergenceError

__all__ = [
    "MlpArch",
    "MlpParams",
    "SGD",
    "Adam",
    "Rprop",
    "init_params",
    "mlp_forward",
    "mlp_forward_backward",
    "init_optimizer_state",
    "optimizer_step",
    "l2p_norm",
    "gradient_check",
    "TripletResult",
    "train_triplet",
]


@dataclass(frozen=True)
class MlpArch:
    """Layer widths from input to output; ReLU on hidden layers.

    ``init_std=None`` selects N(0, 1/fan_in) weights instead of a fixed std.
    """

    layer_widths: tuple
    init_std: float | None = 1e-3

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError("need at least two layers of positive width")
        if widths[-1] != 1:
            raise ValueError("output width must be 1")
        if self.init_std is not None and not self.init_std > 0:
            raise ValueError("init_std must be positive")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def shapes(self):
        w = self.layer_widths
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    @property
    def n_params(self):
        return sum(a * b + b for a, b in self.shapes)

    @property
    def depth(self):
        return len(self.layer_widths) - 1


@dataclass(eq=False)
class MlpParams:
    arch: MlpArch
    flat: np.ndarray

    def layers(self):
        """List of ``(W, b)`` views into ``flat``; ``W`` has shape (fan_in, fan_out)."""
        return _unflatten(self.arch, self.flat)

    def copy(self):
        return MlpParams(self.arch, self.flat.copy())


def _unflatten(arch, flat):
    # flat may carry leading stack axes
    out, pos = [], 0
    lead = flat.shape[:-1]
    for fan_in, fan_out in arch.shapes:
        w = flat[..., pos:pos + fan_in * fan_out].reshape(lead + (fan_in, fan_out))
        pos += fan_in * fan_out
        b = flat[..., pos:pos + fan_out]
        pos += fan_out
        out.append((w, b))
    return out


def init_params(arch: MlpArch, rng) -> MlpParams:
    """Gaussian weights, zero biases."""
    flat = np.zeros(arch.n_params)
    for w, _ in _unflatten(arch, flat):
        std = arch.init_std if arch.init_std is not None else 1.0 / np.sqrt(w.shape[0])
        w[...] = std * rng.standard_normal(w.shape)
    return MlpParams(arch, flat)


def _forward(arch, flat, X):
    """Stacked forward pass; returns outputs and the per-layer cache."""
    layers = _unflatten(arch, flat)
    acts, pre = [X], []
    a = X
    for i, (w, b) in enumerate(layers):
        z = a @ w + b[..., None, :]
        pre.append(z)
        a = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(a)
    return a[..., 0], (acts, pre)


def _backward(arch, flat, cache, dout):
    """Backprop of ``dout`` (d loss / d output) through the stacked network."""
    acts, pre = cache
    layers = _unflatten(arch, flat)
    grad = np.zeros_like(flat)
    grad_layers = _unflatten(arch, grad)
    delta = dout[..., None]
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = grad_layers[i]
        gw[...] = np.swapaxes(acts[i], -1, -2) @ delta
        gb[...] = delta.sum(axis=-2)
        if i > 0:
            delta = (delta @ np.swapaxes(layers[i][0], -1, -2)) * (pre[i - 1] > 0)
    return grad


def mlp_forward(params: MlpParams, X):
    out, _ = _forward(params.arch, params.flat, np.asarray(X, dtype=float))
    return out


def mlp_forward_backward(params: MlpParams, X, y):
    """Mean squared error over the batch and its exact gradient (flat vector)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.arch.layer_widths[0] or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}, "
                         f"input width {params.arch.layer_widths[0]}")
    out, cache = _forward(params.arch, params.flat, X)
    resid = out - y
    loss = float(np.mean(resid**2))
    grad = _backward(params.arch, params.flat, cache, 2.0 * resid / y.size)
    return loss, grad


def _activation_pattern(params, X):
    _, (_, pre) = _forward(params.arch, params.flat, X)
    return [z > 0 for z in pre[:-1]]


def gradient_check(params: MlpParams, X, y, n_coords=10, h=1e-4, rng=None):
    """Relative errors ``|g - fd| / max(|g|, |fd|)`` of backprop against central differences.

    Coordinates are visited in random order; one whose perturbation flips a
    ReLU unit is skipped, since the loss is not differentiable across the
    kink. Stops after ``n_coords`` usable coordinates.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    _, grad = mlp_forward_backward(params, X, y)
    errs = []
    for k in rng.permutation(params.arch.n_params):
        up, dn = params.copy(), params.copy()
        up.flat[k] += h
        dn.flat[k] -= h
        if not all(np.array_equal(a, b) for a, b in
                   zip(_activation_pattern(up, X), _activation_pattern(dn, X))):
            continue
        fd = (mlp_forward_backward(up, X, y)[0] - mlp_forward_backward(dn, X, y)[0]) / (2 * h)
        scale = max(abs(grad[k]), abs(fd))
        errs.append(0.0 if scale == 0 else abs(grad[k] - fd) / scale)
        if len(errs) == n_coords:
            break
    return np.array(errs)


# --------------------------------------------------------------------------
# optimizers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SGD:
    stepsize: float = 1e-2

    def __post_init__(self):
        if not self.stepsize > 0:
            raise ValueError("stepsize must be positive")


@dataclass(frozen=True)
class Adam:
    stepsize: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.stepsize > 0 or not self.eps > 0:
            raise ValueError("stepsize and eps must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


@dataclass(frozen=True)
class Rprop:
    stepsize: float = 5e-4
    eta_minus: float = 0.5
    eta_plus: float = 1.2
    step_min: float = 1e-6
    step_max: float = 50.0

    def __post_init__(self):
        if not self.stepsize > 0 or not 0 < self.step_min <= self.step_max:
            raise ValueError("invalid Rprop step sizes")
        if not 0 < self.eta_minus < 1 < self.eta_plus:
            raise ValueError("need 0 < eta_minus < 1 < eta_plus")


def init_optimizer_state(cfg, shape):
    if isinstance(cfg, SGD):
        return {}
    if isinstance(cfg, Adam):
        return {"t": 0, "m": np.zeros(shape), "v": np.zeros(shape)}
    if isinstance(cfg, Rprop):
        return {"prev": np.zeros(shape), "step": np.full(shape, cfg.stepsize)}
    raise TypeError(f"unknown optimizer config {cfg!r}")


def optimizer_step(params, grad, state, cfg):
    """One update; returns ``(new_params, new_state)`` without mutating inputs."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if isinstance(cfg, SGD):
        return params - cfg.stepsize * grad, state
    if isinstance(cfg, Adam):
        t = state["t"] + 1
        m = cfg.beta1 * state["m"] + (1 - cfg.beta1) * grad
        v = cfg.beta2 * state["v"] + (1 - cfg.beta2) * grad * grad
        m_hat = m / (1 - cfg.beta1**t)
        v_hat = v / (1 - cfg.beta2**t)
        new = params - cfg.stepsize * m_hat / (np.sqrt(v_hat) + cfg.eps)
        return new, {"t": t, "m": m, "v": v}
    if isinstance(cfg, Rprop):
        sign = np.sign(grad * state["prev"])
        step = np.where(sign > 0, np.minimum(state["step"] * cfg.eta_plus, cfg.step_max),
                        np.where(sign < 0, np.maximum(state["step"] * cfg.eta_minus, cfg.step_min),
                                 state["step"]))
        g = np.where(sign < 0, 0.0, grad)
        return params - np.sign(g) * step, {"prev": g, "step": step}
    raise TypeError(f"unknown optimizer config {cfg!r}")


# --------------------------------------------------------------------------
# function-space norms
# --------------------------------------------------------------------------


def _reference_values(g, X):
    if g is None:
        return np.zeros(X.shape[0])
    if isinstance(g, MlpParams):
        return mlp_forward(g, X)
    return X @ np.asarray(g, dtype=float)


def _sample_inputs(cov_diag, d, n_mc, seed):
    X = child_rng(seed, "l2p").standard_normal((n_mc, d))
    if cov_diag is not None:
        X *= np.sqrt(np.asarray(cov_diag, dtype=float))
    return X


def l2p_norm(f: MlpParams, g=None, cov_diag=None, n_mc=10_000, seed=0):
    """Monte Carlo ``||f - g||^2`` under x ~ N(0, diag(cov_diag)).

    ``g`` may be another network, a linear parameter vector or ``None``
    (the zero function). Returns ``(estimate, standard_error)``.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    X = _sample_inputs(cov_diag, f.arch.layer_widths[0], n_mc, seed)
    sq = (mlp_forward(f, X) - _reference_values(g, X)) ** 2
    se = float(np.std(sq, ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else float("inf")
    return float(np.mean(sq)), se


# --------------------------------------------------------------------------
# triplet training
# --------------------------------------------------------------------------


@dataclass(eq=False)
class TripletResult:
    """Recorded trajectories of the (standard, bias, variance) runs.

    Risk arrays are Monte Carlo estimates on one shared input sample:
    ``er = ||f_std - f*||^2``, ``ber = ||f_bias - f*||^2``, ``ver = ||f_var||^2``.
    """

    epochs: np.ndarray
    er: np.ndarray
    ber: np.ndarray
    ver: np.ndarray
    er_se: np.ndarray
    ber_se: np.ndarray
    ver_se: np.ndarray
    train_loss: np.ndarray  # (len(epochs), 3)
    init: MlpParams
    params: np.ndarray | None = None  # (len(epochs), 3, n_params)
    metadata: dict = field(default_factory=dict)


def _mean_se(sq):
    n = sq.shape[-1]
    return sq.mean(axis=-1), sq.std(axis=-1, ddof=1) / np.sqrt(n)


def train_triplet(arch: MlpArch, opt_cfg, X, ys, epochs: int, seed: int, target=None,
                  cov_diag=None, batch_size=None, record_every=1, n_mc=10_000,
                  keep_params=True, init=None):
    """Train standard, bias and variance networks from one shared initialization.

    Parameters
    ----------
    X : (n, d) array
        Shared training inputs.
    ys : sequence of three (n,) arrays
        Standard (noisy), bias (clean) and variance (noise) responses.
    target : (d,) array or None
        Linear ground truth defining f*; ``None`` means f* = 0.
    batch_size : int or None
        ``None`` runs full-batch steps (one per epoch); otherwise each epoch
        visits a seeded permutation in mini-batches shared by the three runs.
    init : MlpParams or None
        Shared starting point; ``None`` draws one from the ``init`` stream.
    """
    X = np.asarray(X, dtype=float)
    Y = np.stack([np.asarray(y, dtype=float) for y in ys])
    if Y.shape != (3, X.shape[0]):
        raise ValueError("ys must hold three response vectors matching X")
    n = X.shape[0]
    if init is None:
        init = init_params(arch, child_rng(seed, "init"))
    elif init.arch != arch:
        raise ValueError("init does not match the architecture")
    flat = np.broadcast_to(init.flat, (3, arch.n_params)).copy()
    state = init_optimizer_state(opt_cfg, flat.shape)

    # evaluation inputs come from their own stream, disjoint from training data
    X_mc = _sample_inputs(cov_diag, X.shape[1], n_mc, child_seed(seed, "mc-eval"))
    f_star = _reference_values(target, X_mc)

    rec_epochs = list(range(0, epochs + 1, record_every))
    if rec_epochs[-1] != epochs:
        rec_epochs.append(epochs)
    k = len(rec_epochs)
    risks = np.empty((k, 3))
    ses = np.empty((k, 3))
    train_loss = np.empty((k, 3))
    snaps = np.empty((k, 3, arch.n_params)) if keep_params else None

    def record(i):
        out, _ = _forward(arch, flat, X_mc)
        sq = np.stack([(out[0] - f_star) ** 2, (out[1] - f_star) ** 2, out[2] ** 2])
        risks[i], ses[i] = _mean_se(sq)
        fit, _ = _forward(arch, flat, X)
        train_loss[i] = np.mean((fit - Y) ** 2, axis=1)
        if keep_params:
            snaps[i] = flat

    rec = 0
    record(rec)
    rec += 1
    bs = n if batch_size is None else int(batch_size)
    for epoch in range(1, epochs + 1):
        if batch_size is None:
            batches = [slice(None)]
        else:
            perm = child_rng(seed, "shuffle", epoch).permutation(n)
            batches = [perm[i:i + bs] for i in range(0, n, bs)]
        for idx in batches:
            xb, yb = X[idx], Y[:, idx]
            out, cache = _forward(arch, flat, xb)
            resid = out - yb
            loss = np.mean(resid**2, axis=1)
            if not np.all(np.isfinite(loss)) or np.any(loss > 1e12):
                raise DivergenceError(f"network training diverged at epoch {epoch}: {loss}")
            grad = _backward(arch, flat, cache, 2.0 * resid / yb.shape[1])
            flat, state = optimizer_step(flat, grad, state, opt_cfg)
        if rec < k and rec_epochs[rec] == epoch:
            record(rec)
            rec += 1

    return TripletResult(
        epochs=np.asarray(rec_epochs), er=risks[:, 0], ber=risks[:, 1], ver=risks[:, 2],
        er_se=ses[:, 0], ber_se=ses[:, 1], ver_se=ses[:, 2], train_loss=train_loss,
        init=init, params=snaps,
        metadata={"batch_size": batch_size, "epochs": epochs, "n_mc": n_mc,
                  "optimizer": type(opt_cfg).__name__})
