from .checkpoint import CheckpointError, load_arrays, load_nets, save_arrays, save_nets
from .net import Layer, ParamNet, ShapeError, make_net, orthogonal_, orthogonal_init
from .norm import RunningNorm, running_normalize
from .optim import Adam, NonFiniteGradientError, clip_global_norm, global_norm

__all__ = [
    "Adam",
    "CheckpointError",
    "Layer",
    "NonFiniteGradientError",
    "ParamNet",
    "RunningNorm",
    "ShapeError",
    "clip_global_norm",
    "global_norm",
    "load_arrays",
    "load_nets",
    "make_net",
    "orthogonal_",
    "orthogonal_init",
    "running_normalize",
    "save_arrays",
    "save_nets",
]
