"""Link scheduling and weighted capacity in the SINR model via length-sensitive conflict graphs."""

from .model import (
    EuclideanSpace,
    Instance,
    InstanceError,
    Link,
    MatrixSpace,
    SinrParams,
    build_instance,
    delta,
    length_classes,
    lengths,
    link_gap,
    link_length,
    sr_distance,
)

__version__ = "0.1.0"

__all__ = [
    "EuclideanSpace",
    "Instance",
    "InstanceError",
    "Link",
    "MatrixSpace",
    "SinrParams",
    "build_instance",
    "delta",
    "length_classes",
    "lengths",
    "link_gap",
    "link_length",
    "sr_distance",
]
