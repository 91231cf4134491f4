"""Differentiable Gaussian splatting with super-resolution prior training."""

from .image_ops import (ResampleSpec, downsample, dssim, l1, psnr, ssim,
                        upsample_bicubic)
from .objective import (LossReport, ModulationConfig, ObjectiveConfig,
                        build_mask, loss_prior, loss_reg, total_loss)
from .prior import PriorProvider, generate_prior
from .renderer import ProjectedGaussians, RenderGradients, project, render, render_backward
from .scene import (Camera, GaussianParams, GaussianScene, covariance_from_params,
                    init_scene_random, load_cameras, load_scene, save_cameras,
                    save_scene)
from .trainer import OptimizerState, TrainConfig, adam_step, densify_and_prune, train

__version__ = "0.1.0"
