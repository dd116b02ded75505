"""Wasserstein isometric mapping: exact W2 distances between image measures
embedded by classical multidimensional scaling."""

from .embedding import Embedding, classical_mds, double_center, wassmap
from .evalign import RigidAlignment, circle_fit, knn_separation, procrustes, recovery_error
from .isomap import NeighborGraph, build_graph, geodesic_squared_distances, isomap
from .measure import (
    AffineMap,
    DiscreteMeasure,
    GridImage,
    image_to_measure,
    marginal_second_moment,
    marginal_second_moments,
    pushforward,
    second_moment,
    translate,
)
from .transport import (
    PairCache,
    SquaredDistanceMatrix,
    TransportPlan,
    pairwise_w2_squared,
    permutation_oracle,
    rotation_displacement,
    sinkhorn_w2,
    solve_w2,
    w2,
)

__version__ = "0.1.0"
