"""Minimal dense tensors with reverse-mode differentiation."""

from .tensor import tensor, backward, no_grad, grad_enabled, precision, as_tensor, from_images
from .ops import (op, conv2d, conv_transpose2d, instance_norm2d, restyle2d, relu, leaky_relu, tanh,
                  softmax_over_channels, log_softmax_over_channels, pad2d, crop2d,
                  upsample_bilinear, sum, mean, bilinear_matrix)
from .layers import layer, conv_layer, conv_transpose_layer, instance_norm_layer, count_params
