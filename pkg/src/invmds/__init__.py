"""Similarity-invariant point embeddings and the small tools built around them."""

from .embed import (
    FrobeniusScaler,
    InvariantEmbedding,
    InvariantMDS,
    canonical_sign,
    centered_similarity,
    classical_mds,
    frobenius_normalize,
    sign_variants,
    similarity_matrix,
    tinv_embed,
    verify_distance_preservation,
)
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DegenerateInputError,
    InvalidInputError,
    MultiplicityWarning,
    TrainingDivergenceError,
)
from .geometry import (
    Compose,
    CvrpInstance,
    Graph,
    PointCloud,
    Reflection,
    Rotation,
    Scaling,
    Translation,
    apply_transform,
    generate_cvrp_instance,
    generate_shape,
    generate_tsp_instance,
    knn_graph,
    pairwise_distances,
    random_transform,
)
from .linalg import double_center, sym_eig_topk
from .neuralnet import MPNNClassifier, Model, MpnnParams, TrainConfig, forward_full, init_model, train_classifier

__version__ = "0.1.0"
