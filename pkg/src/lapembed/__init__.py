"""Self-supervised representation learning on similarity graphs.

Components: weighted-graph core and cut objectives, an exact spectral oracle
for the relaxed partition problem, an MLP encoder trained with a positive-pair
trace loss plus feature decorrelation (optionally with hidden-state
interpolation), and few-shot / linear evaluation of the frozen features.
"""

from .data import AugmentationPolicy, Dataset
from .encoder import MlpEncoder, init_encoder, load_encoder, save_encoder
from .graph import Partition, WeightedGraph
from .losses import LossBreakdown, decorrelation_loss, total_loss, trace_loss
from .mixup import MixPlan, sample_mix_plan
from .spectral import EigenmapResult, generalized_eigenmaps
from .train import TrainConfig, TrainReport, train
from .fewshot import evaluate_fewshot, linear_evaluation

__version__ = "0.1.0"
