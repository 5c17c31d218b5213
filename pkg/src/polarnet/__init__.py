"""Layer-by-layer power control of multi-layer amplify-and-forward repeater networks."""

__version__ = "0.1.0"

from .core import (
    AmplificationProfile,
    CascadeCache,
    ChannelStack,
    ConvergenceCriterion,
    PreconditionError,
    RunRecord,
    StaleCacheError,
    StructureError,
    Termination,
    backward_step,
    forward_step,
    layer_update,
    observation_matrix,
    run_polarnet,
    total_channel,
)
from .network import (
    IidGaussian,
    NetworkGeometry,
    Rician,
    build_grid_geometry,
    free_space_gain,
    sample_channels,
    sample_initial_profile,
)
from .policies import AtMostK, Ball2, BallInf, SelectOne

