"""Multi-level hypervision network for image demoireing."""
from .blocks import CBAM, RCAB, AttentionBlock, AttentionParams, ChannelAttention, ConfigError
from .blocks import coord_channels, coord_concat, pixel_shuffle, pixel_unshuffle
from .losses import LossBreakdown, SsimParams, mse_loss, sobel_edges, sobel_loss, ssim_loss, ssim_map, total_loss
from .metrics import MetricReport, evaluate_dataset, psnr, ssim_index
from .network import ForwardOutput, HyperVisionNet, ModelConfig, ShapeError, build_model, count_parameters, infer

__version__ = "0.1.0"
