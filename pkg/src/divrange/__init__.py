"""Joint ranges of pairs of f-divergences."""
from .divergence import (
    DiscreteDistribution,
    DivergencePoint,
    TrianglePoint,
    block_mixture,
    divergence,
    divergence_pair,
    two_point_pair,
)
from .generators import (
    Generator,
    GeneratorSpecError,
    conjugate,
    make_jensen_shannon,
    make_lecam,
    make_power,
    make_total_variation,
    parse_spec,
)
from .jointrange import (
    ConvexRegion,
    Envelope,
    Membership,
    PointCloud,
    cloud_2achievable,
    contains,
    hull,
    joint_range,
    lower_envelope,
    sample_triangle,
    upper_envelope,
)
from .analysis import (
    LimitRatios,
    MixturePair,
    achieve,
    jacobian_det,
    limit_ratios,
    ratio_bound_exists,
    singular_locus,
    verify_membership,
)

__version__ = "0.1.0"
