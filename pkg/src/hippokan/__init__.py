"""HiPPO-LegS coefficient encoding + Kolmogorov-Arnold networks for time-series forecasting."""

from .hippo import (
    CoeffVector,
    LegSOperator,
    basis_value,
    decode,
    decode_tail,
    encode,
    encode_step,
    legs_operator,
)
from .kan import KanNetwork, SplineGrid, bspline_basis, param_count
from .models import DirectKanModel, HippoKanModel, HippoMlpModel, model_param_count
from .training import EvalReport, TrainConfig, evaluate, lag_metric, train

__version__ = "0.1.0"
