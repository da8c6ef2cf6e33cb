"""Well log curve synthesis with an efficient selective-attention LSTM.

From-scratch float64 layers (linear, LSTM, multi-head self-attention,
positional encoding), a Top-K attention-driven routing layer, four
assembled architectures, a synthetic well generator, and an experiment
harness with a CLI. Every layer is validated against central finite
differences.
"""

from .nn import Adam, Linear, Parameter, grad_check, mse_loss, sigmoid, softmax_rows
from .layers import (
    AttentionParams,
    LstmCellParams,
    LstmSequence,
    LstmState,
    PositionalEncoding,
    RnnCellParams,
    SelfAttention,
    attention_forward,
    lstm_sequence,
    lstm_step,
    positional_encoding_add,
    rnn_step,
)
from .select import (
    RouteLayer,
    SelectConfig,
    SelectionResult,
    attention_scores,
    route_forward,
    selection_gradient_mask_check,
    selection_size,
    top_k_select,
)
from .models import (
    Model,
    ModelConfig,
    build_model,
    load_checkpoint,
    model_backward,
    model_forward,
    save_checkpoint,
)
from .data import (
    CHANNELS,
    EXPERIMENT_CHANNELS,
    CsvFormatError,
    NormStats,
    SyntheticConfig,
    WellLog,
    WindowDataset,
    denormalize,
    fit_normalizer,
    generate_synthetic,
    load_csv,
    make_windows,
    normalize,
    save_csv,
    split_wells,
)
from .harness import (
    DivergenceError,
    RunConfig,
    TrainResult,
    cmd_ablate,
    cmd_bench,
    cmd_compare,
    cmd_gen_data,
    cmd_predict,
    cmd_train,
    prepare_data,
    rmse,
    train_model,
)

__version__ = "0.1.0"

__all__ = [
    "Adam", "Linear", "Parameter", "grad_check", "mse_loss", "sigmoid",
    "softmax_rows",
    "AttentionParams", "LstmCellParams", "LstmSequence", "LstmState",
    "PositionalEncoding", "RnnCellParams", "SelfAttention",
    "attention_forward", "lstm_sequence", "lstm_step",
    "positional_encoding_add", "rnn_step",
    "RouteLayer", "SelectConfig", "SelectionResult", "attention_scores",
    "route_forward", "selection_gradient_mask_check", "selection_size",
    "top_k_select",
    "Model", "ModelConfig", "build_model", "load_checkpoint",
    "model_backward", "model_forward", "save_checkpoint",
    "CHANNELS", "EXPERIMENT_CHANNELS", "CsvFormatError", "NormStats",
    "SyntheticConfig", "WellLog", "WindowDataset", "denormalize",
    "fit_normalizer", "generate_synthetic", "load_csv", "make_windows",
    "normalize", "save_csv", "split_wells",
    "DivergenceError", "RunConfig", "TrainResult", "cmd_ablate", "cmd_bench",
    "cmd_compare", "cmd_gen_data", "cmd_predict", "cmd_train", "prepare_data",
    "rmse", "train_model",
]
