"""Two-head dense network, RMSprop, IDX loading and rotated-MNIST training."""

from .idx import (
    IMAGES_MAGIC,
    LABELS_MAGIC,
    Dataset,
    load_idx,
    load_mnist,
    mnist_available,
    read_idx,
    write_idx,
)
from .network import (
    HEADS,
    HIDDEN_SIZES,
    INPUT_SIZE,
    N_CLASSES,
    Cache,
    DenseNet,
    Gradients,
    backward,
    cross_entropy,
    forward,
    predict,
    softmax,
    test_error,
)
from .optim import RMSPropState, rmsprop_step
from .rotation import ROTATIONS, rotate, rotate_batch
from .training import (
    EPOCH_COLUMNS,
    GATE_COLUMNS,
    MnistConfig,
    MnistResult,
    OptimizerSees,
    TrainMode,
    TrainResult,
    rotated,
    run_mnist,
    summarize_runs,
    train,
)

__all__ = [
    "EPOCH_COLUMNS",
    "GATE_COLUMNS",
    "HEADS",
    "HIDDEN_SIZES",
    "IMAGES_MAGIC",
    "INPUT_SIZE",
    "LABELS_MAGIC",
    "N_CLASSES",
    "ROTATIONS",
    "Cache",
    "Dataset",
    "DenseNet",
    "Gradients",
    "MnistConfig",
    "MnistResult",
    "OptimizerSees",
    "RMSPropState",
    "TrainMode",
    "TrainResult",
    "backward",
    "cross_entropy",
    "forward",
    "load_idx",
    "load_mnist",
    "mnist_available",
    "predict",
    "read_idx",
    "rmsprop_step",
    "rotate",
    "rotate_batch",
    "rotated",
    "run_mnist",
    "softmax",
    "summarize_runs",
    "test_error",
    "train",
    "write_idx",
]
