"""
VQ-VAE 视觉分词模块
"""

from .model import (
    VqvaeConfig,
    VqvaeModel,
    gumbel_noise,
    gumbel_softmax,
    quantize,
    tokenize,
    reconstruct,
    reconstruction_mse,
    dump_token_grid,
    format_token_grid,
    save_token_grid,
)
from .train import VqvaeTrainConfig, temperature_at, train_vqvae, save_vqvae, load_vqvae

__all__ = [
    'VqvaeConfig',
    'VqvaeModel',
    'gumbel_noise',
    'gumbel_softmax',
    'quantize',
    'tokenize',
    'reconstruct',
    'reconstruction_mse',
    'dump_token_grid',
    'format_token_grid',
    'save_token_grid',
    'VqvaeTrainConfig',
    'temperature_at',
    'train_vqvae',
    'save_vqvae',
    'load_vqvae',
]
