"""Gromov dynamic time warping and related time-series distances."""

__version__ = "0.1.0"

from .barycenter import BarycenterResult, barycenter_update, gdtw_barycenter, mds_embed
from .baselines import GiResult, Invariance, dtw_gi
from .distribution import dataset_distance, pairwise_ground_costs, sinkhorn
from .dtw import AlignmentPath, SoftAlignment, dtw, enumerate_alignments, soft_argmin, soft_dtw
from .gdtw import (
    DiagonalBand,
    FwOptions,
    GdtwResult,
    Given,
    RandomMonotone,
    Status,
    gdtw,
    gdtw_grad,
    gdtw_objective,
    soft_gdtw,
    tensor_apply,
)
from .imitate import ImitationProblem, ImitationResult, imitate, imitation_loss, rollout
from .series import (
    Euclidean,
    SquaredEuclidean,
    TimeSeries,
    WassersteinGrid,
    apply_isometry,
    cross_distances,
    gen_fixture,
    load_series,
    normalize,
    pairwise_distances,
    save_series,
)
