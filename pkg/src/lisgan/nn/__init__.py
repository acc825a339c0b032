from .functional import conv2d, conv_transpose2d, linear, spatial_dropout, tprelu, weight_norm
from .layers import LayerParams, ShapeError, conv_layer, effective_weight, fc_layer, forward, output_shape, tprelu_layer
from .optim import OptimizerState, RMSprop, rmsprop_step
from .tensor import GraphError, NonFiniteError, Tensor, no_grad

__all__ = [
    "GraphError", "LayerParams", "NonFiniteError", "OptimizerState", "RMSprop", "ShapeError", "Tensor",
    "conv2d", "conv_layer", "conv_transpose2d", "effective_weight", "fc_layer", "forward", "linear",
    "no_grad", "output_shape", "rmsprop_step", "spatial_dropout", "tprelu", "tprelu_layer", "weight_norm",
]
