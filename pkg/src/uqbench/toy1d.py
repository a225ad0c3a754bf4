"""End-to-end 1D regression uncertainty benchmark.

A Gaussian-process curve provides the data: 1050 evenly spaced points on
[-7, 7] split 875/175 into train/validation (every 6th point to validation),
plus 400 uniformly drawn test points on [-10, 10]. A one-hidden-layer network
(3000 relu units) learns the regression; uncertainty is then estimated by
MC-dropout, an empirical ensemble, a dual-output net trained by Gaussian NLL
(single predictive uncertainty), a deep ensemble of those, and a side learner
run both sequentially (frozen main, scaled-error regression) and jointly
(side head supplies the NLL variance).

Preprocessing and init, which the training recipe (SGD, lr 1e-1, decay 1e-2,
batch 50, 50 epochs) leaves open, were chosen for stable convergence at that
learning rate: inputs are scaled to [-1, 1], targets standardized by train
statistics, and first-layer units start with small slopes and kink positions
spread across the domain. Larger inits make the output-layer curvature
(which grows with width times mean activation) exceed the lr 1e-1 stability
bound. All choices are recorded in the dataset/run metadata.

Everything is deterministic for a fixed seed; per-method RNG streams are
decoupled by fixed seed offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels, nn
from .grid import PixelSeries
from .loss import gaussian_nll, scale_target
from .sparsify import ReliabilityLabels, SparsificationConfig, ause, auroc

__all__ = [
    "METHODS",
    "ToyConfig",
    "ToyDataset",
    "UncertaintyEstimate",
    "MethodResult",
    "ToyRun",
    "generate_dataset",
    "train_main",
    "run_mc_dropout",
    "run_empirical_ensemble",
    "run_single_pu",
    "run_deep_ensemble",
    "run_slurp_sequential",
    "run_slurp_joint",
    "coverage",
    "spearman",
    "evaluate_toy",
    "run_toy",
]

METHODS = (
    "mc_dropout",
    "empirical_ensemble",
    "single_pu",
    "deep_ensemble",
    "slurp_sequential",
    "slurp_joint",
)

# seed offsets decoupling the per-method RNG streams
_OFF_MC = 101
_OFF_PU = 307
_OFF_SEQ = 401
_OFF_JOINT = 503
_OFF_MC_INFER = 601
_MEMBER_STRIDE = 7919

_NOISE_STD = 0.1
_LENGTHSCALE = 3.0
_SIGNAL_STD = 1.0
_X_SCALE = 7.0          # inputs enter the nets as x / _X_SCALE
_INIT_SLOPE = 0.25      # first-layer slope scale (stability at lr 1e-1)
_SEQ_TARGET_QUANTILE = 0.95
_SEQ_TARGET_LEVEL = 0.9


@dataclass(frozen=True)
class ToyConfig:
    seed: int = 0
    epochs: int = 50
    batch_size: int = 50
    hidden_units: int = 3000
    ensemble_size: int = 3
    mc_passes: int = 8
    mc_dropout_rate: float = 0.4
    methods: tuple[str, ...] = METHODS

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}; choose from {METHODS}")
        if self.ensemble_size < 1 or self.mc_passes < 1:
            raise ValueError("ensemble_size and mc_passes must be >= 1")


@dataclass(frozen=True)
class ToyDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    valid_x: np.ndarray
    valid_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    plot_x: np.ndarray
    plot_f: np.ndarray
    metadata: dict


@dataclass(frozen=True)
class UncertaintyEstimate:
    """Predictive mean and standard deviation per test point."""

    mean: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.sigma.shape:
            raise ValueError("mean and sigma must be aligned")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be nonnegative")


@dataclass
class MethodResult:
    name: str
    estimate: UncertaintyEstimate
    predict: Callable[[np.ndarray], UncertaintyEstimate]
    extras: dict


@dataclass
class ToyRun:
    dataset: ToyDataset
    main_net: nn.MLP
    results: dict
    report: dict


# ---------------------------------------------------------------------------
# dataset


def _rbf_kernel(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    return _SIGNAL_STD**2 * np.exp(-0.5 * (d / _LENGTHSCALE) ** 2)


def _sample_gp(rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
    z = rng.standard_normal(x.size)
    k = _rbf_kernel(x)
    jitter = 1e-8
    while True:
        try:
            chol = np.linalg.cholesky(k + jitter * np.eye(x.size))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > 1e-2:
                raise
    return chol @ z


def generate_dataset(seed: int, n_plot: int = 512) -> ToyDataset:
    """Sample one GP function and build the 875/175/400 splits."""
    rng = np.random.default_rng(seed)
    grid_x = np.linspace(-7.0, 7.0, 1050)
    test_x = rng.uniform(-10.0, 10.0, 400)
    plot_x = np.linspace(-10.0, 10.0, n_plot)
    all_x = np.concatenate([grid_x, test_x, plot_x])
    f = _sample_gp(rng, all_x)
    grid_f = f[:1050]
    test_f = f[1050:1450]
    plot_f = f[1450:]
    noisy = grid_f + _NOISE_STD * rng.standard_normal(1050)
    valid_sel = np.zeros(1050, dtype=bool)
    valid_sel[5::6] = True  # every 6th point to validation: 175 of 1050
    return ToyDataset(
        train_x=grid_x[~valid_sel],
        train_y=noisy[~valid_sel],
        valid_x=grid_x[valid_sel],
        valid_y=noisy[valid_sel],
        test_x=test_x,
        test_y=test_f,
        plot_x=plot_x,
        plot_f=plot_f,
        metadata={
            "generator": "gaussian_process",
            "kernel": "rbf",
            "lengthscale": _LENGTHSCALE,
            "signal_std": _SIGNAL_STD,
            "noise_std": _NOISE_STD,
            "seed": seed,
            "splits": {"train": 875, "valid": 175, "test": 400},
            "train_domain": [-7.0, 7.0],
            "test_domain": [-10.0, 10.0],
            "input_scale": _X_SCALE,
            "init_slope": _INIT_SLOPE,
            "targets": "standardized by train mean/std",
        },
    )


def _target_scaler(dataset: ToyDataset) -> tuple[float, float]:
    return float(dataset.train_y.mean()), float(dataset.train_y.std())


# ---------------------------------------------------------------------------
# training helpers


def _col(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).reshape(-1, 1)


def _xin(x: np.ndarray) -> np.ndarray:
    return _col(x) / _X_SCALE


def _mse_batch(out, y):
    r = out[:, 0] - y
    g = np.zeros_like(out)
    g[:, 0] = 2.0 * r / r.size
    return float(np.mean(r * r)), g


def _gaussian_nll_batch(out, y):
    losses, dmu, dlv = gaussian_nll(out[:, 0], out[:, 1], y)
    g = np.column_stack([dmu, dlv]) / y.size
    return float(np.mean(losses)), g


def _train_mlp(net, x, y, cfg: nn.TrainConfig, loss_grad, rng):
    n = x.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            out, cache = nn.forward(net, x[idx], mode="train", rng=rng)
            _, gout = loss_grad(out, y[idx])
            grads, _ = nn.backward(net, cache, gout)
            net = nn.sgd_step(net, grads, cfg)
    return net


def _eval(net, xin):
    out, _ = nn.forward(net, xin, mode="eval")
    return out


def _spread_relu_layer(
    rng, n_units: int, slope: float, kink_range: float, group: str
) -> nn.DenseLayer:
    """1-input relu layer with small slopes and kinks spread over the domain."""
    u = rng.uniform(-slope, slope, size=(n_units, 1))
    kinks = rng.uniform(-kink_range, kink_range, size=n_units)
    return nn.DenseLayer(u, -u[:, 0] * kinks, "relu", group)


def _init_main_net(rng, hidden: int, n_out: int, dropout_rate: float = 0.0) -> nn.MLP:
    first = _spread_relu_layer(rng, hidden, _INIT_SLOPE, 1.0, "main")
    limit = np.sqrt(6.0 / (hidden + n_out))
    w2 = rng.uniform(-limit, limit, size=(n_out, hidden))
    head = nn.DenseLayer(w2, np.zeros(n_out), "identity", "main")
    return nn.MLP((first, head), dropout_rate)


def train_main(
    dataset: ToyDataset, cfg: ToyConfig, seed: int | None = None, dropout_rate: float = 0.0
) -> nn.MLP:
    """One hidden layer, relu, trained with MSE (lr 1e-1, decay 1e-2)."""
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    net = _init_main_net(rng, cfg.hidden_units, 1, dropout_rate)
    mu, sd = _target_scaler(dataset)
    tc = nn.TrainConfig(1e-1, 1e-2, cfg.batch_size, cfg.epochs, seed)
    targets = (dataset.train_y - mu) / sd
    return _train_mlp(net, _xin(dataset.train_x), targets, tc, _mse_batch, rng)


def _train_single_pu_net(dataset: ToyDataset, cfg: ToyConfig, seed: int) -> nn.MLP:
    rng = np.random.default_rng(seed)
    net = _init_main_net(rng, cfg.hidden_units, 2)
    mu, sd = _target_scaler(dataset)
    tc = nn.TrainConfig(1e-2, 1e-2, cfg.batch_size, cfg.epochs, seed)
    targets = (dataset.train_y - mu) / sd
    return _train_mlp(net, _xin(dataset.train_x), targets, tc, _gaussian_nll_batch, rng)


# ---------------------------------------------------------------------------
# estimators


def run_mc_dropout(dataset: ToyDataset, cfg: ToyConfig) -> MethodResult:
    """Main-task net trained and sampled with dropout active (inverted masks)."""
    net = train_main(
        dataset, cfg, seed=cfg.seed + _OFF_MC, dropout_rate=cfg.mc_dropout_rate
    )
    mu, sd = _target_scaler(dataset)

    def predict(x):
        rng = np.random.default_rng(cfg.seed + _OFF_MC_INFER)
        xin = _xin(x)
        passes = np.empty((cfg.mc_passes, xin.shape[0]))
        for t in range(cfg.mc_passes):
            out, _ = nn.forward(net, xin, mode="train", rng=rng)
            passes[t] = out[:, 0]
        return UncertaintyEstimate(
            passes.mean(axis=0) * sd + mu, passes.std(axis=0) * sd
        )

    return MethodResult("mc_dropout", predict(dataset.test_x), predict, {})


def run_empirical_ensemble(
    dataset: ToyDataset, cfg: ToyConfig, main: nn.MLP | None = None
) -> MethodResult:
    """Variance across independently seeded main-task nets (member 0 = main)."""
    members = []
    for i in range(cfg.ensemble_size):
        if i == 0 and main is not None:
            members.append(main)
        else:
            members.append(train_main(dataset, cfg, seed=cfg.seed + _MEMBER_STRIDE * i))
    mu, sd = _target_scaler(dataset)

    def predict(x):
        xin = _xin(x)
        preds = np.stack([_eval(net, xin)[:, 0] for net in members])
        return UncertaintyEstimate(preds.mean(axis=0) * sd + mu, preds.std(axis=0) * sd)

    return MethodResult("empirical_ensemble", predict(dataset.test_x), predict, {})


def run_single_pu(dataset: ToyDataset, cfg: ToyConfig) -> MethodResult:
    """Dual-output (mu, log_var) net trained with Gaussian NLL (lr 1e-2)."""
    net = _train_single_pu_net(dataset, cfg, cfg.seed + _OFF_PU)
    mu, sd = _target_scaler(dataset)

    def predict(x):
        out = _eval(net, _xin(x))
        return UncertaintyEstimate(
            out[:, 0] * sd + mu, np.exp(0.5 * out[:, 1]) * sd
        )

    return MethodResult("single_pu", predict(dataset.test_x), predict, {})


def run_deep_ensemble(dataset: ToyDataset, cfg: ToyConfig) -> MethodResult:
    """Uniform mixture of single-PU members; member 0 shares single_pu's seed."""
    nets = [
        _train_single_pu_net(dataset, cfg, cfg.seed + _OFF_PU + _MEMBER_STRIDE * i)
        for i in range(cfg.ensemble_size)
    ]
    mu, sd = _target_scaler(dataset)

    def predict(x):
        xin = _xin(x)
        outs = [_eval(net, xin) for net in nets]
        if len(outs) == 1:  # mixture of one is the member itself, bit for bit
            return UncertaintyEstimate(
                outs[0][:, 0] * sd + mu, np.exp(0.5 * outs[0][:, 1]) * sd
            )
        mus = np.stack([o[:, 0] for o in outs])
        variances = np.stack([np.exp(o[:, 1]) for o in outs])
        mean = mus.mean(axis=0)
        var = (variances + mus**2).mean(axis=0) - mean**2
        return UncertaintyEstimate(
            mean * sd + mu, np.sqrt(np.maximum(var, 0.0)) * sd
        )

    return MethodResult("deep_ensemble", predict(dataset.test_x), predict, {})


def _latent_and_pred(main: nn.MLP, xin: np.ndarray):
    out, cache = nn.forward(main, xin, mode="eval")
    return cache.post[0], out


def _init_side(cfg: ToyConfig, rng):
    # prediction-feature extractor: standardized predictions span about +-2.5
    extractor = nn.MLP(
        (_spread_relu_layer(rng, cfg.hidden_units, _INIT_SLOPE, 2.5, "feature_extractor"),)
    )
    context = nn.init_mlp(
        [2 * cfg.hidden_units, 128, 64, 16, 1], seed=rng, group="uncertainty_blocks"
    )
    return extractor, context


def run_slurp_sequential(
    dataset: ToyDataset, main: nn.MLP, cfg: ToyConfig
) -> MethodResult:
    """Side learner on the frozen main net.

    Inputs are the main net's hidden features plus the prediction passed
    through the side's own 3000-unit extractor; the target is the main net's
    absolute training error squashed by tanh(stretch * err), fitted with MSE.
    The stretch is set so the 95th-percentile training error maps to 0.9, and
    the inverse map atanh(clipped output) / stretch converts the side output
    back to error units.
    """
    seed = cfg.seed + _OFF_SEQ
    rng = np.random.default_rng(seed)
    extractor, context = _init_side(cfg, rng)
    tc_ext = nn.TrainConfig(1e-4, 1e-3, cfg.batch_size, cfg.epochs, seed)
    tc_ctx = nn.TrainConfig(1e-4, 1e-2, cfg.batch_size, cfg.epochs, seed)
    mu, sd = _target_scaler(dataset)

    latent, pred = _latent_and_pred(main, _xin(dataset.train_x))
    train_err = np.abs((pred[:, 0] * sd + mu) - dataset.train_y)
    q95 = float(np.quantile(train_err, _SEQ_TARGET_QUANTILE))
    stretch = float(np.arctanh(_SEQ_TARGET_LEVEL) / q95) if q95 > 0 else 1.0
    targets = scale_target(train_err, stretch)

    hidden = cfg.hidden_units
    n = latent.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            f_out, f_cache = nn.forward(extractor, pred[idx], mode="train", rng=rng)
            c_out, c_cache = nn.forward(
                context, np.concatenate([latent[idx], f_out], axis=1)
            )
            resid = c_out[:, 0] - targets[idx]
            g = np.zeros_like(c_out)
            g[:, 0] = 2.0 * resid / resid.size
            c_grads, g_cin = nn.backward(context, c_cache, g)
            e_grads, _ = nn.backward(extractor, f_cache, g_cin[:, hidden:])
            context = nn.sgd_step(context, c_grads, tc_ctx)
            extractor = nn.sgd_step(extractor, e_grads, tc_ext)

    def predict(x):
        h, p = _latent_and_pred(main, _xin(x))
        f_out, _ = nn.forward(extractor, p, mode="eval")
        c_out, _ = nn.forward(context, np.concatenate([h, f_out], axis=1), mode="eval")
        squashed = np.clip(c_out[:, 0], 0.0, 1.0 - 1e-6)
        return UncertaintyEstimate(p[:, 0] * sd + mu, np.arctanh(squashed) / stretch)

    return MethodResult(
        "slurp_sequential", predict(dataset.test_x), predict, {"stretch": stretch}
    )


def run_slurp_joint(dataset: ToyDataset, cfg: ToyConfig) -> MethodResult:
    """Main net and side learner trained together under one Gaussian NLL.

    The side head provides log-variance; gradients flow into the main net
    through the NLL mean term, through the side's prediction input, and
    through the shared latent features.
    """
    seed = cfg.seed + _OFF_JOINT
    rng = np.random.default_rng(seed)
    main = _init_main_net(rng, cfg.hidden_units, 1)
    extractor, context = _init_side(cfg, rng)
    tc_main = nn.TrainConfig(1e-1, 1e-2, cfg.batch_size, cfg.epochs, seed)
    tc_ext = nn.TrainConfig(1e-1, 1e-2, cfg.batch_size, cfg.epochs, seed)
    tc_ctx = nn.TrainConfig(1e-4, 1e-3, cfg.batch_size, cfg.epochs, seed)
    mu, sd = _target_scaler(dataset)

    hidden = cfg.hidden_units
    x = _xin(dataset.train_x)
    y = (dataset.train_y - mu) / sd
    n = x.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            m_out, m_cache = nn.forward(main, x[idx], mode="train", rng=rng)
            f_out, f_cache = nn.forward(extractor, m_out, mode="train", rng=rng)
            c_out, c_cache = nn.forward(
                context, np.concatenate([m_cache.post[0], f_out], axis=1)
            )
            _, dmu, dlv = gaussian_nll(m_out[:, 0], c_out[:, 0], y[idx])
            b = idx.size
            c_grads, g_cin = nn.backward(context, c_cache, (dlv / b)[:, None])
            e_grads, g_pred = nn.backward(extractor, f_cache, g_cin[:, hidden:])
            m_grads, _ = nn.backward(
                main,
                m_cache,
                (dmu / b)[:, None] + g_pred,
                inject={0: g_cin[:, :hidden]},
            )
            main = nn.sgd_step(main, m_grads, tc_main)
            extractor = nn.sgd_step(extractor, e_grads, tc_ext)
            context = nn.sgd_step(context, c_grads, tc_ctx)

    def predict(xq):
        h, p = _latent_and_pred(main, _xin(xq))
        f_out, _ = nn.forward(extractor, p, mode="eval")
        c_out, _ = nn.forward(context, np.concatenate([h, f_out], axis=1), mode="eval")
        return UncertaintyEstimate(p[:, 0] * sd + mu, np.exp(0.5 * c_out[:, 0]) * sd)

    return MethodResult("slurp_joint", predict(dataset.test_x), predict, {})


# ---------------------------------------------------------------------------
# evaluation


def coverage(estimate: UncertaintyEstimate, ground_truth: np.ndarray, z: float) -> float:
    """Fraction of points with |y - mean| <= z * sigma."""
    resid = np.abs(np.asarray(ground_truth, dtype=np.float64) - estimate.mean)
    return float(np.mean(resid <= z * estimate.sigma))


def spearman(a, b) -> float:
    """Spearman rank correlation with tie-averaged ranks."""
    ra = _kernels.tie_average_ranks(np.ascontiguousarray(a, dtype=np.float64))
    rb = _kernels.tie_average_ranks(np.ascontiguousarray(b, dtype=np.float64))
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    denom = np.sqrt(np.sum(ra * ra) * np.sum(rb * rb))
    if denom == 0:
        return float("nan")
    return float(np.sum(ra * rb) / denom)


def evaluate_toy(
    results: dict[str, MethodResult],
    dataset: ToyDataset,
    main: nn.MLP,
    sp_cfg: SparsificationConfig | None = None,
) -> dict:
    """Per-method AUSE / AUROC / Spearman / coverage plus main-task accuracy.

    Errors are absolute residuals on the 400 test points; the AUROC labels
    call a point reliable when the method's residual is below the median
    absolute residual of the main net.
    """
    sp_cfg = sp_cfg or SparsificationConfig()
    y = dataset.test_y
    mu, sd = _target_scaler(dataset)
    main_mu = _eval(main, _xin(dataset.test_x))[:, 0] * sd + mu
    main_resid = np.abs(y - main_mu)
    threshold = float(np.median(main_resid))
    in_domain = np.abs(dataset.test_x) <= 7.0

    const_scores = PixelSeries.from_values(np.ones_like(main_resid))
    report = {
        "sparsification": {
            "fraction_step": sp_cfg.fraction_step,
            "normalize": sp_cfg.normalize,
        },
        "main": {
            "test_mse": float(np.mean((y - main_mu) ** 2)),
            "test_mse_in_domain": float(
                np.mean((y[in_domain] - main_mu[in_domain]) ** 2)
            ),
            "n_test_in_domain": int(in_domain.sum()),
            "reliability_threshold": threshold,
        },
        "constant_baseline_ause": ause(
            PixelSeries.from_values(main_resid), const_scores, sp_cfg
        ),
        "methods": {},
    }
    for name, result in results.items():
        est = result.estimate
        resid = np.abs(y - est.mean)
        errors = PixelSeries.from_values(resid)
        scores = PixelSeries.from_values(est.sigma)
        labels = ReliabilityLabels(resid < threshold)
        try:
            roc = auroc(scores, labels)
        except ValueError:
            roc = None
        entry = {
            "ause": ause(errors, scores, sp_cfg),
            "auroc": roc,
            "spearman": spearman(est.sigma, resid),
            "coverage_z1": coverage(est, y, 1.0),
            "coverage_z2": coverage(est, y, 2.0),
            "mse": float(np.mean((y - est.mean) ** 2)),
        }
        entry.update(result.extras)
        report["methods"][name] = entry
    return report


def run_toy(cfg: ToyConfig) -> ToyRun:
    """Generate data, train every requested estimator, and evaluate."""
    dataset = generate_dataset(cfg.seed)
    main = train_main(dataset, cfg)
    checksum_before = nn.parameter_checksum(main)
    results: dict[str, MethodResult] = {}
    for method in cfg.methods:
        if method == "mc_dropout":
            results[method] = run_mc_dropout(dataset, cfg)
        elif method == "empirical_ensemble":
            results[method] = run_empirical_ensemble(dataset, cfg, main=main)
        elif method == "single_pu":
            results[method] = run_single_pu(dataset, cfg)
        elif method == "deep_ensemble":
            results[method] = run_deep_ensemble(dataset, cfg)
        elif method == "slurp_sequential":
            results[method] = run_slurp_sequential(dataset, main, cfg)
        elif method == "slurp_joint":
            results[method] = run_slurp_joint(dataset, cfg)
    report = evaluate_toy(results, dataset, main)
    report["main"]["parameter_checksum"] = checksum_before
    report["main"]["checksum_unchanged"] = (
        nn.parameter_checksum(main) == checksum_before
    )
    return ToyRun(dataset, main, results, report)
