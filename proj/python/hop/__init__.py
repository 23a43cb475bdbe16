"""Python access to the HoP core: benchmark generation, the feasible map, training and the polar lab."""

from ._hop import (
    Dataset,
    HopError,
    Instance,
    Model,
    generate,
    gradcheck,
    jacobian_det,
    jacobian_det_numeric,
    load_dataset,
    polarlab,
    train,
)

__all__ = [
    "Dataset",
    "HopError",
    "Instance",
    "Model",
    "generate",
    "gradcheck",
    "jacobian_det",
    "jacobian_det_numeric",
    "load_dataset",
    "polarlab",
    "train",
]
