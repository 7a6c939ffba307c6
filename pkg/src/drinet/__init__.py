"""drinet: dual-representation point cloud segmentation engine.

Point features and sparse voxel features are learned iteratively: scatter
points into voxels, refine with submanifold sparse 3-D convolutions, gather
back with learned geometry attention. Differentiation is handled by the
built-in reverse-mode tensor core; hot segment kernels use a compiled Cython
backend with a NumPy fallback (see drinet.kernels.BACKEND).
"""
from .kernels import BACKEND
from .network import DRINet, ModelConfig, SegmentationOutput
from .tensor import Parameter, Tensor, backward, zero_grads
from .training import TrainConfig
from .voxels import PointCloud, VoxelMap, clip_range, voxelize

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DRINet", "ModelConfig", "SegmentationOutput", "Parameter",
    "Tensor", "backward", "zero_grads", "TrainConfig", "PointCloud",
    "VoxelMap", "clip_range", "voxelize", "__version__",
]
