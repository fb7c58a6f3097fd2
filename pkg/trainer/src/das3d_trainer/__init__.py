"""Toy-scale reconstruct-and-discriminate training harness for dual-modal
anomaly data; consumes the synthesis toolkit's file formats and CLI only."""

from .config import TrainConfig
from .losses import loss_depth, loss_disc, loss_rgb, ssim_mean, total_loss
from .models import AnomalyDetector, DiscriminatorUNet, ReconstructionUNet, fuse_features
from .train import train
from .infer import image_score, load_checkpoint, predict, predict_tree

__version__ = "0.1.0"
