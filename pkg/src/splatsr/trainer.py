"""Training loop: Adam updates, densification/pruning, orchestration.

Pipeline constants (learning rates, densification thresholds, opacity
reset) follow the reference 3DGS configuration; every one is a config key.
The loop is strictly sequential and seeded, so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import objective as obj
from .errors import NumericalError, UsageError
from .image_ops import ResampleSpec
from .objective import LossReport, ObjectiveConfig
from .prior import PriorProvider
from .renderer import RenderGradients, render, render_backward
from .scene import GaussianScene

PARAM_GROUPS = ("positions", "log_scales", "rotations", "opacity_logits", "colors")


@dataclass
class TrainConfig:
    iterations: int = 7000
    position_lr_init: float = 1.6e-4
    position_lr_final: float = 1.6e-6
    log_scale_lr: float = 5e-3
    rotation_lr: float = 1e-3
    opacity_lr: float = 5e-2
    color_lr: float = 2.5e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-15
    densify_interval: int = 100
    densify_from: int = 500
    densify_until_frac: float = 0.6
    grad_threshold: float = 2e-4
    split_scale_frac: float = 0.01   # of scene_extent
    split_scale_divisor: float = 1.6
    prune_opacity: float = 5e-3
    opacity_reset_interval: int = 3000
    scene_extent: float = 2.0
    seed: int = 0
    checkpoint_interval: int = 0     # 0 = no intermediate checkpoints

    def __post_init__(self):
        for name in ("position_lr_init", "position_lr_final", "log_scale_lr",
                     "rotation_lr", "opacity_lr", "color_lr"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        if self.densify_interval < 1 or self.opacity_reset_interval < 1:
            raise UsageError("intervals must be >= 1")
        if self.grad_threshold <= 0 or self.prune_opacity <= 0:
            raise UsageError("thresholds must be positive")

    @property
    def densify_until(self) -> int:
        return int(self.iterations * self.densify_until_frac)

    def position_lr(self, iteration: int) -> float:
        """Log-linear decay from init to final over the run."""
        if self.iterations <= 1:
            return self.position_lr_init
        t = min(max(iteration / self.iterations, 0.0), 1.0)
        return float(self.position_lr_init
                     * (self.position_lr_final / self.position_lr_init) ** t)

    def group_lr(self, group: str, iteration: int) -> float:
        if group == "positions":
            return self.position_lr(iteration)
        return {"log_scales": self.log_scale_lr, "rotations": self.rotation_lr,
                "opacity_logits": self.opacity_lr, "colors": self.color_lr}[group]


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)  # first moments per group
    v: dict = field(default_factory=dict)  # second moments per group
    step: int = 0

    @classmethod
    def for_scene(cls, scene: GaussianScene) -> "OptimizerState":
        state = cls()
        for g in PARAM_GROUPS:
            arr = getattr(scene, g)
            state.m[g] = np.zeros_like(arr)
            state.v[g] = np.zeros_like(arr)
        return state

    def check_coherent(self, scene: GaussianScene):
        for g in PARAM_GROUPS:
            if self.m[g].shape != getattr(scene, g).shape:
                raise AssertionError(f"optimizer state for {g} is stale: "
                                     f"{self.m[g].shape} vs {getattr(scene, g).shape}")


@dataclass
class DensifyStats:
    """Accumulated 2D positional gradient magnitudes between densify events."""

    grad_norm_sum: np.ndarray
    seen_count: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "DensifyStats":
        return cls(np.zeros(n), np.zeros(n))

    def accumulate(self, grads: RenderGradients):
        self.grad_norm_sum += grads.mean2d_grad_norm
        self.seen_count += grads.visible.astype(np.float64)

    def mean(self) -> np.ndarray:
        return self.grad_norm_sum / np.maximum(self.seen_count, 1.0)


@dataclass
class DensifyReport:
    cloned: int = 0
    split: int = 0
    pruned: int = 0


def adam_step(scene: GaussianScene, grads: RenderGradients,
              state: OptimizerState, config: TrainConfig, iteration: int):
    """In-place bias-corrected Adam update with per-group learning rates."""
    state.check_coherent(scene)
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    grad_by_group = {
        "positions": grads.d_position, "log_scales": grads.d_log_scale,
        "rotations": grads.d_rotation, "opacity_logits": grads.d_opacity_logit,
        "colors": grads.d_color,
    }
    for group in PARAM_GROUPS:
        g = grad_by_group[group]
        param = getattr(scene, group)
        if g.shape != param.shape:
            raise UsageError(f"gradient shape mismatch for {group}: "
                             f"{g.shape} vs {param.shape}")
        m = state.m[group]
        v = state.v[group]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        lr = config.group_lr(group, iteration)
        param -= lr * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)
    return scene, state


def _extend_state(state: OptimizerState, n_new: int):
    for g in PARAM_GROUPS:
        pad_shape = (n_new,) + state.m[g].shape[1:]
        state.m[g] = np.concatenate([state.m[g], np.zeros(pad_shape)])
        state.v[g] = np.concatenate([state.v[g], np.zeros(pad_shape)])


def _select_state(state: OptimizerState, keep: np.ndarray):
    for g in PARAM_GROUPS:
        state.m[g] = state.m[g][keep]
        state.v[g] = state.v[g][keep]


def densify_and_prune(scene: GaussianScene, state: OptimizerState,
                      stats: DensifyStats, config: TrainConfig,
                      rng: np.random.Generator):
    """Clone small / split large high-gradient Gaussians, then prune.

    Clones are exact duplicates; splits draw two children from the parent
    distribution with scales shrunk by the configured divisor. New Gaussians
    start with zeroed Adam moments.
    """
    from .scene import covariance_from_params

    report = DensifyReport()
    mean_grad = stats.mean()
    high = mean_grad > config.grad_threshold
    max_scale = np.exp(scene.log_scales).max(axis=1)
    limit = config.split_scale_frac * config.scene_extent
    clone_mask = high & (max_scale < limit)
    split_mask = high & (max_scale >= limit)

    new_parts = {g: [getattr(scene, g)] for g in PARAM_GROUPS}
    if np.any(clone_mask):
        for g in PARAM_GROUPS:
            new_parts[g].append(getattr(scene, g)[clone_mask].copy())
        report.cloned = int(clone_mask.sum())
    if np.any(split_mask):
        idxs = np.nonzero(split_mask)[0]
        child_pos = []
        for i in idxs:
            cov = covariance_from_params(scene.log_scales[i], scene.rotations[i])
            chol = np.linalg.cholesky(cov)
            samples = rng.standard_normal((2, 3)) @ chol.T + scene.positions[i]
            child_pos.append(samples)
        child_pos = np.concatenate(child_pos)
        rep = np.repeat(idxs, 2)
        new_parts["positions"].append(child_pos)
        new_parts["log_scales"].append(
            scene.log_scales[rep] - np.log(config.split_scale_divisor))
        new_parts["rotations"].append(scene.rotations[rep].copy())
        new_parts["opacity_logits"].append(scene.opacity_logits[rep].copy())
        new_parts["colors"].append(scene.colors[rep].copy())
        report.split = int(split_mask.sum())

    n_before = scene.count
    for g in PARAM_GROUPS:
        setattr(scene, g, np.concatenate(new_parts[g]))
    _extend_state(state, scene.count - n_before)

    # Prune: low-opacity Gaussians and split parents.
    keep = scene.opacities() >= config.prune_opacity
    keep[:n_before] &= ~split_mask
    report.pruned = int(np.sum(~keep[:n_before] & ~split_mask))
    for g in PARAM_GROUPS:
        setattr(scene, g, getattr(scene, g)[keep])
    _select_state(state, keep)
    state.check_coherent(scene)
    return scene, state, report


def reset_opacity(scene: GaussianScene, ceiling: float = 0.01):
    """Clamp opacities down to a small value (3DGS revival heuristic)."""
    logit = float(np.log(ceiling / (1.0 - ceiling)))
    np.minimum(scene.opacity_logits, logit, out=scene.opacity_logits)


def train(dataset, prior_provider: PriorProvider | None,
          objective_config: ObjectiveConfig, train_config: TrainConfig,
          initial_scene: GaussianScene, baseline: bool = False,
          log_rows: list | None = None, checkpoint_fn=None) -> GaussianScene:
    """Optimize ``initial_scene`` against the dataset.

    ``baseline=True`` trains at LR scale against the LR observations only
    (the LR-supervised reference arm); otherwise each iteration renders one
    view at HR scale and applies the combined objective. The per-iteration
    log rows are appended to ``log_rows`` when given.
    """
    scene = initial_scene.copy()
    state = OptimizerState.for_scene(scene)
    stats = DensifyStats.zeros(scene.count)
    rng = np.random.default_rng(train_config.seed)
    cfg = objective_config
    factor = dataset.factor
    resample = ResampleSpec(factor=factor, antialias=dataset.antialias)
    lr_scale = 1.0 / factor

    train_views = list(dataset.train_indices)
    if not train_views:
        raise UsageError("dataset has no training views")
    order = []

    for it in range(1, train_config.iterations + 1):
        if not order:
            order = list(rng.permutation(train_views))
        view = int(order.pop())
        cam = dataset.cameras[view]
        lr_obs = dataset.lr_images[view]
        report = LossReport()

        if baseline:
            rendered = render(scene, cam, lr_scale)
            pv, grad, (pl1, pds) = obj.loss_prior(rendered, lr_obs, cfg, None)
            total = pv
            report.prior_l1, report.prior_dssim = pl1, pds
            render_scale = lr_scale
        else:
            rendered = render(scene, cam, 1.0)
            render_scale = 1.0
            lam = cfg.lambda_e
            prior_grad = reg_grad = None
            pval = rval = 0.0
            if lam > 0.0:
                target = prior_provider.generate(view, lr_obs)
                mask = _term_mask(rendered, target, cfg.modulation.prior_mask_mode,
                                  cfg.modulation.prior_mask_percentile)
                pval, prior_grad, (report.prior_l1, report.prior_dssim) = \
                    obj.loss_prior(rendered, target, cfg, mask)
                if mask is not None:
                    report.masked_fraction_prior = float(np.mean(mask == 0.0))
            if lam < 1.0:
                down_pred = None
                mask = None
                if cfg.modulation.reg_mask_mode != "none":
                    from .image_ops import downsample
                    down_pred = downsample(rendered, resample)
                    mask = _term_mask(down_pred, lr_obs, cfg.modulation.reg_mask_mode,
                                      cfg.modulation.reg_mask_percentile)
                rval, reg_grad, (report.reg_l1, report.reg_dssim) = \
                    obj.loss_reg(rendered, lr_obs, resample, cfg, mask)
                if mask is not None:
                    report.masked_fraction_reg = float(np.mean(mask == 0.0))
            total = obj.total_loss(pval, rval, cfg, it)
            grad = obj.combine_gradients(prior_grad, reg_grad, cfg, it)
            if cfg.tv_weight > 0.0:
                from .image_ops import total_variation
                tv, tvg = total_variation(rendered, grad=True)
                total = total + cfg.tv_weight * tv
                grad = grad + cfg.tv_weight * tvg

        if not np.isfinite(total):
            raise NumericalError(f"non-finite loss at iteration {it} (view {view})")
        report.total = float(total)

        grads = render_backward(scene, cam, render_scale, grad)
        grads.assert_finite()
        adam_step(scene, grads, state, train_config, it)

        in_window = train_config.densify_from <= it <= train_config.densify_until
        if in_window:
            stats.accumulate(grads)
            if it % train_config.densify_interval == 0:
                scene, state, _ = densify_and_prune(scene, state, stats,
                                                    train_config, rng)
                stats = DensifyStats.zeros(scene.count)
        if train_config.opacity_reset_interval > 0 \
                and it % train_config.opacity_reset_interval == 0 \
                and it < train_config.densify_until:
            reset_opacity(scene)

        if log_rows is not None:
            log_rows.append({
                "iteration": it, "total": report.total,
                "prior_l1": report.prior_l1, "prior_dssim": report.prior_dssim,
                "reg_l1": report.reg_l1, "reg_dssim": report.reg_dssim,
                "n_gaussians": scene.count,
                "position_lr": train_config.position_lr(it),
                "masked_fraction_prior": report.masked_fraction_prior,
                "masked_fraction_reg": report.masked_fraction_reg,
            })
        if checkpoint_fn is not None and train_config.checkpoint_interval > 0 \
                and it % train_config.checkpoint_interval == 0:
            checkpoint_fn(scene, it)
    return scene


def _term_mask(pred, target, mode: str, percentile: float):
    if mode == "none":
        return None
    error_map = np.mean(np.abs(pred - target), axis=2)
    return obj.build_mask(error_map, mode, percentile)


def config_with(cfg, **kwargs):
    """Dataclass-preserving config override helper."""
    return replace(cfg, **kwargs)
