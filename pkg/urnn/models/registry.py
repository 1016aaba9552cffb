"""
Model construction by family name and restoration from saved parameter groups.
"""

import dataclasses
import logging
from typing import Dict, Optional, Union

import numpy as np

from urnn.config import RunConfig
from urnn.core.errors import ConfigError, ConsistencyError
from urnn.core.optim import init_lstm, init_rnn, init_urnn
from urnn.core.unitary import FixedPermutation
from urnn.models.base import RecurrentModel
from urnn.models.baselines import LSTM, RNN
from urnn.models.params import LSTMParams, ModelDims, RNNParams, URNNParams
from urnn.models.urnn_cell import URNN

logger = logging.getLogger(__name__)

PERM_GROUP = "w.perm"

# reference hidden sizes per task group
DEFAULT_SIZES = {
    "copy": {"urnn": 128, "rnn_tanh": 80, "irnn": 80, "lstm": 40},
    "adding": {"urnn": 512, "rnn_tanh": 128, "irnn": 128, "lstm": 128},
    "mnist": {"urnn": 512, "rnn_tanh": 128, "irnn": 128, "lstm": 128},
}


def init_model(model: str, dims: ModelDims, seed: int) -> RecurrentModel:
    if model == "urnn":
        return URNN(init_urnn(dims, seed))
    if model == "rnn_tanh":
        return RNN(init_rnn(dims, seed, activation="tanh"))
    if model == "irnn":
        return RNN(init_rnn(dims, seed, activation="relu"))
    if model == "lstm":
        return LSTM(init_lstm(dims, seed))
    raise ConfigError(f"unknown model '{model}'")


def build_model(cfg: RunConfig, seed: Optional[int] = None) -> RecurrentModel:
    """Freshly initialized model for a run configuration"""
    model = init_model(cfg.model, cfg.dims, cfg.seed if seed is None else seed)
    logger.debug("built %s %s with %d parameters", model.kind, cfg.dims, model.n_params())
    return model


def as_model(obj: Union[RecurrentModel, URNNParams, RNNParams, LSTMParams]) -> RecurrentModel:
    if isinstance(obj, RecurrentModel):
        return obj
    if isinstance(obj, URNNParams):
        return URNN(obj)
    if isinstance(obj, RNNParams):
        return RNN(obj)
    if isinstance(obj, LSTMParams):
        return LSTM(obj)
    raise TypeError(f"cannot wrap {type(obj).__name__} as a recurrent model")


def model_from_groups(cfg: RunConfig, groups: Dict[str, np.ndarray]) -> RecurrentModel:
    """Rebuild the model described by cfg and load saved groups into it.

    Raises ConsistencyError when a group is missing or has the wrong shape.
    """
    model = build_model(cfg)
    if isinstance(model, URNN):
        if PERM_GROUP not in groups:
            raise ConsistencyError(f"missing parameter group '{PERM_GROUP}'")
        indices = np.asarray(groups[PERM_GROUP])
        if indices.shape != (cfg.n_h,):
            raise ConsistencyError(
                f"parameter group '{PERM_GROUP}' has shape {indices.shape}, model expects {(cfg.n_h,)}"
            )
        p = model.params
        w = dataclasses.replace(p.w, perm=FixedPermutation(indices.astype(np.intp), p.w.perm.seed))
        model = URNN(dataclasses.replace(p, w=w))
    model.params.load_arrays(groups)
    return model
