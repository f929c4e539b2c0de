"""Deep operator networks trained on bi-fidelity data.

A cheap low-fidelity solver feeds the branch network and the DeepONet learns
the discrepancy to the true response.  Subpackages: ``autodiff`` and ``nn``
(tensors, MLPs, Adam), ``deeponet``, ``bifidelity``, ``physics`` (Duffing
and heat-transfer testbeds), ``analysis`` and ``experiments``/``cli``.
"""

from .autodiff import Tape, Tensor, backward
from .bifidelity import BiFidelityModel, HifiSamples, TrunkLayout, build_discrepancy_dataset, standard_baseline_dataset
from .data import DatasetBundle, load_bundle, save_bundle
from .deeponet import DeepONet, SensorGrid, TrainConfig, build_deeponet, onet_forward, onet_loss, train
from .nn import AdamState, Mlp, MlpSpec, adam_step, forward, init_mlp

__version__ = "0.1.0"

__all__ = [
    "Tape", "Tensor", "backward",
    "BiFidelityModel", "HifiSamples", "TrunkLayout", "build_discrepancy_dataset", "standard_baseline_dataset",
    "DatasetBundle", "load_bundle", "save_bundle",
    "DeepONet", "SensorGrid", "TrainConfig", "build_deeponet", "onet_forward", "onet_loss", "train",
    "AdamState", "Mlp", "MlpSpec", "adam_step", "forward", "init_mlp",
]
