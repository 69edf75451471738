from .params import Param, glorot_uniform
from .layers import (
    Layer, ConvTime, ConvTransposeTime, BatchNorm, AvgPoolTime,
    Dense, Elu, Softmax, same_padding,
)
from .optim import Adam
from .gradcheck import grad_check

__all__ = [
    "Param", "glorot_uniform", "Layer", "ConvTime", "ConvTransposeTime",
    "BatchNorm", "AvgPoolTime", "Dense", "Elu", "Softmax", "same_padding",
    "Adam", "grad_check",
]
