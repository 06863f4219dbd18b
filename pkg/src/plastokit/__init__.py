"""plastokit: small-strain elastoplasticity with constraint-preserving
neural hardening models, trained directly from uniaxial stress-strain paths.
"""

__version__ = "0.1.0"

from .constitutive import (ElasticParams, LinearElasticity, VonMisesYield,
                           YieldParams, elastic_stress)
from .datasets import UniaxialDataset, load_dataset, write_dataset_csv
from .loadpath import LoadingPath, extension_segments, three_pull_path
from .networks import (AnalyticIsotropicHardening, AnalyticKinematicPotential,
                       ConstrainedNet, IsotropicHardeningNet,
                       KinematicHardeningNet, init_net, logistic_param,
                       net_forward, softplus_param)
from .reference import (MultiNlkModel, MultiNlkParams, ParamBounds,
                        SingleNlkModel, SingleNlkParams,
                        generate_uniaxial_dataset, run_uniaxial_path, voce_R)
from .returnmap import SurrogateModel
from .state import MaterialState, MultiBackstressState, PlasticIncrement
from .training import (TrainConfig, TrainRecord, ablate_constraints,
                       evaluate_extrapolation, fit_phenomenological,
                       path_loss, train)

__all__ = [
    "AnalyticIsotropicHardening", "AnalyticKinematicPotential",
    "ConstrainedNet", "ElasticParams", "IsotropicHardeningNet",
    "KinematicHardeningNet", "LinearElasticity", "LoadingPath",
    "MaterialState", "MultiBackstressState", "MultiNlkModel",
    "MultiNlkParams", "ParamBounds", "PlasticIncrement", "SingleNlkModel",
    "SingleNlkParams", "SurrogateModel", "TrainConfig", "TrainRecord",
    "UniaxialDataset", "VonMisesYield", "YieldParams", "ablate_constraints",
    "elastic_stress", "evaluate_extrapolation", "extension_segments",
    "fit_phenomenological", "generate_uniaxial_dataset", "init_net",
    "load_dataset", "logistic_param", "net_forward", "path_loss",
    "run_uniaxial_path", "softplus_param", "three_pull_path", "train",
    "voce_R", "write_dataset_csv",
]
