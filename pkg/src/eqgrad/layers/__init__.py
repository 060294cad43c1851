from .conv import PadSpec, conv1d, maxpool2d, xcorr1d, xcorr2d, zero_pad2d
from .lenet import LENET_STAGE_SHAPES, lenet5_build
from .module import (
    Activation,
    Conv2DLayer,
    DenseLayer,
    Lambda,
    Module,
    Parameter,
    Sequential,
    mcc_forward,
    scc_forward,
    scc_to_mcc,
)
from .pwl import PiecewiseLinear, ShallowNet, pwl_approximant, pwl_to_shallow, sawtooth, sawtooth_compose
