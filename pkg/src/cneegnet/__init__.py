"""Training and evaluation engine for compact convolutional P300 classifiers.

Submodules: nn (layer kernels and gradient checking), models (architecture
assembly), optim (optimizer family), data (epoch datasets, balancing,
splitting, file format), synth (synthetic oddball ERP generator), training
(train/evaluate loop), sweep (hyperparameter search), estimator
(scikit-learn style wrappers), cli (command line entry point).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    FormatError,
    ShapeError,
    UsageError,
)
from .models import ModelConfig, build_model, preset_config, shape_trace  # noqa: F401
from .optim import Optimizer, OptimizerHyper  # noqa: F401
from .data import EpochDataset, SplitSpec, balance_undersample, read_epochs, split, write_epochs  # noqa: F401
from .synth import SynthConfig, generate, snr_estimate  # noqa: F401
from .training import TrainConfig, TrainReport, aggregate_report, evaluate, run_experiment, train  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from .reporting import load_report, report_digest, save_report  # noqa: F401
from .sweep import SweepSpace, run_sweep, sample_config  # noqa: F401
from .estimator import CNEEGNetClassifier, EEGNetClassifier  # noqa: F401
