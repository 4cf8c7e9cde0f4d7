"""Active learning of bounded hemimetrics from binary threshold queries."""

from .core import (
    BoundsState,
    DistanceMatrix,
    InfeasibleError,
    InvalidInputError,
    LabeledDatum,
    Query,
    hemimetric_closure,
    is_hemimetric,
    max_gap,
    read_instance,
    validate_hemimetric,
    write_instance,
)
from .instances import (
    YELP_M1,
    YELP_M2,
    AttributeWeights,
    ItemRecord,
    gen_attribute_instance,
    gen_clustered,
    gen_quantized_clustered,
    gen_synthetic_restaurants,
    great_circle_km,
    load_items_csv,
    uniform_instance,
    write_items_csv,
)
from .learner import (
    LearnerOptions,
    RunStats,
    SideInformation,
    extend_online,
    ind_greedy,
    ind_greedy_sit,
    learn_hm,
    predicted_bounds,
    start_online,
)
from .policy import q_clique, q_greedy
from .projection import (
    ProjectionScope,
    brute_force_bounds,
    certificate_check,
    l_proj,
    lu_proj,
    u_proj,
)
from .response import (
    NoiseModel,
    RobustQueryConfig,
    UserOracle,
    acceptance_probability,
    compute_gamma,
    get_user_response_bounded,
    get_user_response_unbounded,
    sample_response,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsState",
    "DistanceMatrix",
    "InfeasibleError",
    "InvalidInputError",
    "LabeledDatum",
    "Query",
    "hemimetric_closure",
    "is_hemimetric",
    "max_gap",
    "read_instance",
    "validate_hemimetric",
    "write_instance",
    "YELP_M1",
    "YELP_M2",
    "AttributeWeights",
    "ItemRecord",
    "gen_attribute_instance",
    "gen_clustered",
    "gen_quantized_clustered",
    "gen_synthetic_restaurants",
    "great_circle_km",
    "load_items_csv",
    "uniform_instance",
    "write_items_csv",
    "LearnerOptions",
    "RunStats",
    "SideInformation",
    "extend_online",
    "ind_greedy",
    "ind_greedy_sit",
    "learn_hm",
    "predicted_bounds",
    "start_online",
    "ProjectionScope",
    "brute_force_bounds",
    "certificate_check",
    "l_proj",
    "lu_proj",
    "u_proj",
    "q_clique",
    "q_greedy",
    "NoiseModel",
    "RobustQueryConfig",
    "UserOracle",
    "acceptance_probability",
    "compute_gamma",
    "get_user_response_bounded",
    "get_user_response_unbounded",
    "sample_response",
]
