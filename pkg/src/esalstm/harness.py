"""Experiment harness: training with history export, leave-one-channel-out
prediction, model comparison, the two ablations, and timing.

A run is fully described by a RunConfig and is reproducible from it alone.
Everything that is not wall-clock time is deterministic in the seeds;
timing lands in dedicated columns/files so determinism checks can ignore it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import (
    EXPERIMENT_CHANNELS,
    NormStats,
    SyntheticConfig,
    WellLog,
    WindowDataset,
    concat_datasets,
    denormalize,
    fit_normalizer,
    generate_synthetic,
    load_csv,
    make_windows,
    normalize,
    prediction_windows,
    save_csv,
    split_wells,
)
from .models import (
    Model,
    ModelConfig,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from .nn import Adam, mse_loss
from .select import SelectConfig


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss. ``result`` holds the state as of
    the last finite epoch so a last-good checkpoint can still be written."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


def rmse(pred, actual) -> float:
    """Root mean square error."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise ValueError(f"rmse: length mismatch {p.size} vs {a.size}")
    if p.size == 0:
        raise ValueError("rmse: empty input")
    return float(np.sqrt(np.mean((p - a) ** 2)))


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    model: ModelConfig = field(default_factory=ModelConfig)
    target_channel: str = "res"
    data_dir: str | None = None            # None -> synthetic wells
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    patience: int = 15
    train_stride: int = 1
    val_fraction: float = 0.1
    n_train_wells: int = 15
    n_test_wells: int = 5
    out_dir: str = "run_out"
    seed: int = 0
    data_seed: int | None = None           # dataset/split seed; defaults to seed

    @property
    def effective_data_seed(self) -> int:
        return self.seed if self.data_seed is None else self.data_seed


# flat key=value serialization ------------------------------------------------

def run_config_to_text(run: RunConfig) -> str:
    lines = []
    m = run.model
    lines.append(f"arch={m.arch}")
    lines.append(f"hidden_dim={m.hidden_dim}")
    lines.append(f"n_heads={m.n_heads}")
    lines.append(f"select_ratio={m.select.ratio!r}")
    lines.append(f"select_mode={m.select.mode}")
    lines.append(f"lstm_layers={m.lstm_layers}")
    lines.append(f"fcnn_depth={m.fcnn_depth}")
    lines.append(f"window_len={m.window_len}")
    lines.append(f"n_input_channels={m.n_input_channels}")
    lines.append(f"target_channel={run.target_channel}")
    lines.append(f"data_dir={'' if run.data_dir is None else run.data_dir}")
    s = run.synthetic
    lines.append(f"synth_wells={s.n_wells}")
    lines.append(f"synth_samples={s.samples_per_well}")
    lines.append(f"synth_states={s.n_states}")
    lines.append(f"synth_persistence={s.persistence!r}")
    lines.append(f"epochs={run.epochs}")
    lines.append(f"batch_size={run.batch_size}")
    lines.append(f"lr={run.lr!r}")
    lines.append(f"patience={run.patience}")
    lines.append(f"train_stride={run.train_stride}")
    lines.append(f"val_fraction={run.val_fraction!r}")
    lines.append(f"n_train_wells={run.n_train_wells}")
    lines.append(f"n_test_wells={run.n_test_wells}")
    lines.append(f"out_dir={run.out_dir}")
    lines.append(f"seed={run.seed}")
    lines.append(f"data_seed={'' if run.data_seed is None else run.data_seed}")
    return "\n".join(lines) + "\n"


def run_config_from_pairs(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Build a RunConfig from flat key=value pairs, overriding ``base``."""
    run = base if base is not None else RunConfig()
    m = run.model
    sel = m.select
    syn = run.synthetic

    def geti(key, cur):
        return int(pairs[key]) if key in pairs and pairs[key] != "" else cur

    def getf(key, cur):
        return float(pairs[key]) if key in pairs and pairs[key] != "" else cur

    def gets(key, cur):
        return pairs[key] if key in pairs and pairs[key] != "" else cur

    sel = SelectConfig(ratio=getf("select_ratio", sel.ratio),
                       mode=gets("select_mode", sel.mode))
    m = replace(
        m,
        arch=gets("arch", m.arch),
        hidden_dim=geti("hidden_dim", m.hidden_dim),
        n_heads=geti("n_heads", m.n_heads),
        select=sel,
        lstm_layers=geti("lstm_layers", m.lstm_layers),
        fcnn_depth=geti("fcnn_depth", m.fcnn_depth),
        window_len=geti("window_len", m.window_len),
        n_input_channels=geti("n_input_channels", m.n_input_channels),
    )
    syn = replace(
        syn,
        n_wells=geti("synth_wells", syn.n_wells),
        samples_per_well=geti("synth_samples", syn.samples_per_well),
        n_states=geti("synth_states", syn.n_states),
        persistence=getf("synth_persistence", syn.persistence),
    )
    data_dir = pairs.get("data_dir", run.data_dir or "")
    data_seed = pairs.get("data_seed", "" if run.data_seed is None else str(run.data_seed))
    return replace(
        run,
        model=m,
        synthetic=syn,
        target_channel=gets("target_channel", run.target_channel),
        data_dir=data_dir if data_dir else None,
        epochs=geti("epochs", run.epochs),
        batch_size=geti("batch_size", run.batch_size),
        lr=getf("lr", run.lr),
        patience=geti("patience", run.patience),
        train_stride=geti("train_stride", run.train_stride),
        val_fraction=getf("val_fraction", run.val_fraction),
        n_train_wells=geti("n_train_wells", run.n_train_wells),
        n_test_wells=geti("n_test_wells", run.n_test_wells),
        out_dir=gets("out_dir", run.out_dir),
        seed=geti("seed", run.seed),
        data_seed=int(data_seed) if data_seed != "" else None,
    )


def load_run_config(path, base: RunConfig | None = None) -> RunConfig:
    pairs = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            pairs[k.strip()] = v.strip()
    return run_config_from_pairs(pairs, base)


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

@dataclass
class PreparedData:
    train_wells: list[WellLog]      # normalized
    test_wells: list[WellLog]       # normalized
    raw_test_wells: list[WellLog]
    stats: NormStats


def prepare_data(run: RunConfig) -> PreparedData:
    """Load or generate wells, split, fit the normalizer on training wells
    only, and normalize everything."""
    ds = run.effective_data_seed
    if run.data_dir is not None:
        paths = sorted(Path(run.data_dir).glob("*.csv"))
        if not paths:
            raise FileNotFoundError(f"no well CSV files in {run.data_dir}")
        wells = [load_csv(p) for p in paths]
    else:
        wells = generate_synthetic(replace(run.synthetic, seed=ds))
    train, test = split_wells(wells, run.n_train_wells, run.n_test_wells, seed=ds)
    stats = fit_normalizer(train)
    return PreparedData(
        train_wells=[normalize(w, stats) for w in train],
        test_wells=[normalize(w, stats) for w in test],
        raw_test_wells=test,
        stats=stats,
    )


def input_channels_for(target_channel: str) -> tuple[str, ...]:
    return tuple(c for c in EXPERIMENT_CHANNELS if c != target_channel)


def training_windows(run: RunConfig, prepared: PreparedData) -> tuple[WindowDataset, WindowDataset]:
    """Window the normalized training wells and hold out a validation slice."""
    ds = concat_datasets([
        make_windows(w, run.target_channel, run.model.window_len,
                     stride=run.train_stride)
        for w in prepared.train_wells
    ])
    rng = np.random.default_rng((run.seed, 101))
    perm = rng.permutation(len(ds))
    n_val = max(1, int(round(run.val_fraction * len(ds))))
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    def subset(idx):
        return WindowDataset(
            x=ds.x[idx], y=ds.y[idx], depths=ds.depths[idx],
            well_ids=[ds.well_ids[i] for i in idx],
            input_channels=ds.input_channels, target_channel=ds.target_channel,
            window_len=ds.window_len)

    return subset(train_idx), subset(val_idx)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_rmse: float
    seconds: float


@dataclass
class TrainResult:
    model: Model
    history: list[EpochStats]
    best_epoch: int
    best_val_rmse: float
    stats: NormStats
    input_channels: tuple[str, ...]
    target_channel: str
    lstm_steps: int
    total_seconds: float


def _predict_in_batches(model: Model, x: np.ndarray, batch: int = 256) -> np.ndarray:
    preds = np.empty(x.shape[0])
    for lo in range(0, x.shape[0], batch):
        preds[lo:lo + batch] = model.forward_batch(x[lo:lo + batch])
    return preds


def train_model(run: RunConfig, prepared: PreparedData | None = None) -> TrainResult:
    """Train one model per the run config. The model seed is the run seed.

    Raises DivergenceError if the loss goes non-finite; the result inside the
    exception carries the last finite-state parameters.
    """
    if prepared is None:
        prepared = prepare_data(run)
    train_ds, val_ds = training_windows(run, prepared)
    if len(train_ds) == 0:
        raise ValueError("no training windows")
    model = build_model(replace(run.model, seed=run.seed))
    opt = Adam(model.parameters(), lr=run.lr)
    stats = prepared.stats
    target = run.target_channel

    val_actual = denormalize(val_ds.y, stats, target)

    def val_rmse_now() -> float:
        preds = denormalize(_predict_in_batches(model, val_ds.x), stats, target)
        return rmse(preds, val_actual)

    history: list[EpochStats] = []
    best_values = model.get_values()
    best_val = np.inf
    best_epoch = 0
    since_best = 0
    t_start = time.perf_counter()
    shuffle_rng = np.random.default_rng((run.seed, 202))

    for epoch in range(1, run.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_ds))
        total = 0.0
        for lo in range(0, len(order), run.batch_size):
            idx = order[lo:lo + run.batch_size]
            preds = model.forward_batch(train_ds.x[idx])
            loss, dpred = mse_loss(preds, train_ds.y[idx])
            model.backward_batch(dpred)
            opt.step()
            total += loss * idx.size
        train_loss = total / len(order)
        if not np.isfinite(train_loss):
            model.set_values(best_values)
            partial = TrainResult(
                model=model, history=history, best_epoch=best_epoch,
                best_val_rmse=float(best_val), stats=stats,
                input_channels=train_ds.input_channels, target_channel=target,
                lstm_steps=model.lstm_step_count,
                total_seconds=time.perf_counter() - t_start)
            raise DivergenceError(
                f"non-finite training loss at epoch {epoch}; "
                f"best checkpoint is from epoch {best_epoch}", partial)
        v = val_rmse_now()
        history.append(EpochStats(epoch, train_loss, v, time.perf_counter() - t0))
        if v < best_val:
            best_val = v
            best_epoch = epoch
            best_values = model.get_values()
            since_best = 0
        else:
            since_best += 1
            if since_best > run.patience:
                break

    model.set_values(best_values)
    if run.epochs == 0:
        best_val = val_rmse_now()
    return TrainResult(
        model=model, history=history, best_epoch=best_epoch,
        best_val_rmse=float(best_val), stats=stats,
        input_channels=train_ds.input_channels, target_channel=target,
        lstm_steps=model.lstm_step_count,
        total_seconds=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class WellPrediction:
    well_id: str
    label: str | None
    depths: np.ndarray
    actual: np.ndarray        # nan where the true value is masked
    predicted: np.ndarray
    rmse: float | None        # None when no actuals exist


def predict_well(model: Model, well_norm: WellLog, raw_well: WellLog,
                 stats: NormStats, target_channel: str,
                 input_channels: tuple[str, ...]) -> WellPrediction:
    """Predict the target over every depth with a full input window."""
    L = model.config.window_len
    ends, x = prediction_windows(well_norm, input_channels, L)
    preds = denormalize(_predict_in_batches(model, x), stats, target_channel)
    if target_channel in raw_well.channels:
        actual = raw_well.channels[target_channel][ends].astype(np.float64).copy()
        valid = raw_well.mask[target_channel][ends]
        actual[~valid] = np.nan
    else:
        actual = np.full(ends.size, np.nan)
        valid = np.zeros(ends.size, dtype=bool)
    score = rmse(preds[valid], actual[valid]) if valid.any() else None
    return WellPrediction(
        well_id=raw_well.well_id, label=raw_well.label,
        depths=raw_well.depths[ends], actual=actual, predicted=preds, rmse=score)


def evaluate_test_wells(result: TrainResult, prepared: PreparedData) -> dict[str, WellPrediction]:
    """Per-well predictions on the held-out wells, keyed by split label."""
    out = {}
    for norm_w, raw_w in zip(prepared.test_wells, prepared.raw_test_wells):
        wp = predict_well(result.model, norm_w, raw_w, prepared.stats,
                          result.target_channel, result.input_channels)
        out[raw_w.label or raw_w.well_id] = wp
    return out


def pooled_rmse(predictions: dict[str, WellPrediction]) -> float:
    preds, actuals = [], []
    for wp in predictions.values():
        valid = ~np.isnan(wp.actual)
        preds.append(wp.predicted[valid])
        actuals.append(wp.actual[valid])
    return rmse(np.concatenate(preds), np.concatenate(actuals))


# ---------------------------------------------------------------------------
# file outputs
# ---------------------------------------------------------------------------

def _writelines(path, lines) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def write_history_csv(history: list[EpochStats], path) -> None:
    lines = ["epoch,train_loss,val_rmse,seconds"]
    for row in history:
        lines.append(f"{row.epoch},{row.train_loss:.12g},{row.val_rmse:.12g},"
                     f"{row.seconds:.3f}")
    _writelines(path, lines)


def write_prediction_csv(wp: WellPrediction, path) -> None:
    lines = ["depth,actual,predicted,abs_error"]
    for d, a, p in zip(wp.depths, wp.actual, wp.predicted):
        if np.isnan(a):
            lines.append(f"{d:.2f},,{p:.9g},")
        else:
            lines.append(f"{d:.2f},{a:.9g},{p:.9g},{abs(p - a):.9g}")
    _writelines(path, lines)


def stats_to_extras(stats: NormStats, target_channel: str,
                    input_channels: tuple[str, ...]) -> dict[str, str]:
    extras = {
        "target_channel": target_channel,
        "input_channels": ",".join(input_channels),
    }
    for c in sorted(stats.mean):
        extras[f"norm.{c}.mean"] = repr(stats.mean[c])
        extras[f"norm.{c}.std"] = repr(stats.std[c])
    return extras


def stats_from_extras(extras: dict[str, str]) -> NormStats:
    mean, std = {}, {}
    for k, v in extras.items():
        if k.startswith("norm.") and k.endswith(".mean"):
            mean[k[len("norm."):-len(".mean")]] = float(v)
        elif k.startswith("norm.") and k.endswith(".std"):
            std[k[len("norm."):-len(".std")]] = float(v)
    if not mean:
        raise ValueError("checkpoint carries no normalization statistics")
    return NormStats(mean=mean, std=std, source_wells=())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_data(cfg: SyntheticConfig, out_dir) -> list[Path]:
    """Write one CSV per synthetic well."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for well in generate_synthetic(cfg):
        p = out / f"{well.well_id}.csv"
        save_csv(well, p)
        paths.append(p)
    return paths


def cmd_train(run: RunConfig, prepared: PreparedData | None = None) -> TrainResult:
    """Train, then write checkpoint.txt, history.csv and run_config.txt."""
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.txt").write_text(run_config_to_text(run), encoding="utf-8")
    if prepared is None:
        prepared = prepare_data(run)
    try:
        result = train_model(run, prepared)
    except DivergenceError as exc:
        if exc.result is not None:
            write_history_csv(exc.result.history, out / "history.csv")
            save_checkpoint(exc.result.model, out / "checkpoint.txt",
                            stats_to_extras(exc.result.stats,
                                            exc.result.target_channel,
                                            exc.result.input_channels))
        raise
    write_history_csv(result.history, out / "history.csv")
    save_checkpoint(result.model, out / "checkpoint.txt",
                    stats_to_extras(result.stats, result.target_channel,
                                    result.input_channels))
    return result


def cmd_predict(checkpoint_path, well_csv, target_channel: str | None = None,
                out_path=None) -> WellPrediction:
    """Predict one well from a trained checkpoint; writes the prediction CSV."""
    model, extras = load_checkpoint(checkpoint_path)
    stats = stats_from_extras(extras)
    target = target_channel or extras.get("target_channel")
    if not target:
        raise ValueError("no target channel given and none stored in checkpoint")
    stored = extras.get("input_channels")
    inputs = tuple(stored.split(",")) if stored else input_channels_for(target)
    raw = load_csv(well_csv)
    missing = [c for c in inputs if c not in raw.channels]
    if missing:
        raise ValueError(f"{well_csv}: required input channels missing: {missing}")
    norm = normalize(raw, stats)
    wp = predict_well(model, norm, raw, stats, target, inputs)
    if out_path is not None:
        write_prediction_csv(wp, out_path)
    return wp


COMPARED_MODELS = ("fcnn-4", "fcnn-8", "lstm", "cascaded_lstm", "esa_lstm")


def _config_for_name(base: ModelConfig, name: str) -> ModelConfig:
    if name == "fcnn-4":
        return replace(base, arch="fcnn", fcnn_depth=4)
    if name == "fcnn-8":
        return replace(base, arch="fcnn", fcnn_depth=8)
    if name == "lstm":
        return replace(base, arch="lstm")
    if name == "cascaded_lstm":
        return replace(base, arch="cascaded_lstm")
    if name == "esa_lstm":
        return replace(base, arch="esa_lstm")
    raise ValueError(f"unknown model name {name!r}")


@dataclass
class CompareResult:
    rmse: dict[str, dict[str, float | None]]   # model -> target -> value
    mean_epoch_seconds: dict[str, float]
    failures: list[tuple[str, str, str]]


def cmd_compare(run: RunConfig, targets=EXPERIMENT_CHANNELS,
                model_names=COMPARED_MODELS) -> CompareResult:
    """Train every model on every leave-one-out target; write the RMSE table
    (deterministic) and the timing table (wall clock) separately."""
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table: dict[str, dict[str, float | None]] = {m: {} for m in model_names}
    epoch_times: dict[str, list[float]] = {m: [] for m in model_names}
    failures = []
    cell = 0
    prepared = prepare_data(run)
    for name in model_names:
        for target in targets:
            sub = replace(run, model=_config_for_name(run.model, name),
                          target_channel=target, seed=run.seed ^ cell,
                          data_seed=run.effective_data_seed)
            cell += 1
            try:
                result = train_model(sub, prepared)
                preds = evaluate_test_wells(result, prepared)
                table[name][target] = pooled_rmse(preds)
                epoch_times[name] += [h.seconds for h in result.history]
            except Exception as exc:  # keep the rest of the grid running
                table[name][target] = None
                failures.append((name, target, str(exc)))

    mean_secs = {m: (float(np.mean(t)) if t else float("nan"))
                 for m, t in epoch_times.items()}

    lines = ["model," + ",".join(targets)]
    for name in model_names:
        cells = [name]
        for t in targets:
            v = table[name][t]
            cells.append("FAIL" if v is None else f"{v:.6g}")
        lines.append(",".join(cells))
    _writelines(out / "compare.csv", lines)
    _writelines(out / "compare_timing.csv",
                ["model,mean_epoch_seconds"]
                + [f"{m},{mean_secs[m]:.3f}" for m in model_names])

    width = max(len(m) for m in model_names) + 2
    txt = ["model".ljust(width) + "".join(t.rjust(12) for t in targets)
           + "epoch_s".rjust(12)]
    for name in model_names:
        row = name.ljust(width)
        for t in targets:
            v = table[name][t]
            row += ("FAIL" if v is None else f"{v:.4g}").rjust(12)
        row += f"{mean_secs[name]:.2f}".rjust(12)
        txt.append(row)
    _writelines(out / "compare.txt", txt)
    return CompareResult(rmse=table, mean_epoch_seconds=mean_secs, failures=failures)


NEURON_SWEEP = (10, 30, 50, 100)
RATIO_SWEEP = (0.0, 0.1, 0.3, 0.5, 1.0)


@dataclass
class AblationResult:
    axis: str
    values: tuple
    cells: dict[str, dict]      # well label -> axis value -> rmse
    failures: list[tuple[str, str]]


def cmd_ablate(run: RunConfig, axis: str) -> AblationResult:
    """Sweep FC width or selection ratio; rows are the test wells A..E."""
    if axis == "neurons":
        values = NEURON_SWEEP
    elif axis == "ratio":
        values = RATIO_SWEEP
    else:
        raise ValueError(f"unknown ablation axis {axis!r} (expected neurons|ratio)")
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    prepared = prepare_data(run)
    labels = [w.label or w.well_id for w in prepared.raw_test_wells]
    cells: dict[str, dict] = {lab: {} for lab in labels}
    failures = []
    for cell, value in enumerate(values):
        if axis == "neurons":
            m = replace(run.model, arch="esa_lstm", hidden_dim=int(value))
        else:
            m = replace(run.model, arch="esa_lstm",
                        select=replace(run.model.select, ratio=float(value)))
        sub = replace(run, model=m, seed=run.seed ^ cell,
                      data_seed=run.effective_data_seed)
        try:
            result = train_model(sub, prepared)
            preds = evaluate_test_wells(result, prepared)
            for lab in labels:
                cells[lab][value] = preds[lab].rmse
        except Exception as exc:
            for lab in labels:
                cells[lab][value] = None
            failures.append((str(value), str(exc)))

    header = "well," + ",".join(str(v) for v in values)
    lines = [header]
    for lab in labels:
        row = [lab]
        for v in values:
            cell_v = cells[lab][v]
            row.append("FAIL" if cell_v is None else f"{cell_v:.6g}")
        lines.append(",".join(row))
    _writelines(out / f"ablate_{axis}.csv", lines)
    return AblationResult(axis=axis, values=values, cells=cells, failures=failures)


@dataclass
class BenchResult:
    steps_per_window: dict[float, int]      # ratio -> LSTM steps per window
    epoch_seconds: dict[str, tuple[float, float]]   # name -> (mean, std)


def cmd_bench(run: RunConfig, window_len: int = 128, ratios=(0.1, 0.3, 0.5, 1.0),
              n_epochs: int = 5, n_windows: int = 256) -> BenchResult:
    """Step-count audit plus per-model epoch timing at a fixed window length.

    One warm-up epoch is excluded from the timing. The step counts prove the
    selective cost: a routed window costs round(ratio * L) LSTM steps.
    """
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng((run.seed, 909))
    base = replace(run.model, window_len=window_len)

    steps = {}
    for ratio in ratios:
        cfg = replace(base, arch="esa_lstm",
                      select=SelectConfig(ratio=ratio, mode=run.model.select.mode),
                      seed=run.seed)
        model = build_model(cfg)
        w = rng.standard_normal((window_len, cfg.n_input_channels))
        model.forward(w)
        steps[ratio] = model.lstm_step_count

    x = rng.standard_normal((n_windows, window_len, base.n_input_channels))
    y = rng.standard_normal(n_windows)
    timed_models = {
        "lstm": replace(base, arch="lstm", seed=run.seed),
        "esa_lstm_p0.3": replace(base, arch="esa_lstm",
                                 select=SelectConfig(0.3, run.model.select.mode),
                                 seed=run.seed),
        "esa_lstm_p1.0": replace(base, arch="esa_lstm",
                                 select=SelectConfig(1.0, run.model.select.mode),
                                 seed=run.seed),
        "fcnn-4": replace(base, arch="fcnn", fcnn_depth=4, seed=run.seed),
    }
    epoch_seconds = {}
    for name, cfg in timed_models.items():
        model = build_model(cfg)
        opt = Adam(model.parameters(), lr=run.lr)
        times = []
        for epoch in range(n_epochs + 1):     # first epoch is warm-up
            t0 = time.perf_counter()
            for lo in range(0, n_windows, run.batch_size):
                preds = model.forward_batch(x[lo:lo + run.batch_size])
                _, dpred = mse_loss(preds, y[lo:lo + run.batch_size])
                model.backward_batch(dpred)
                opt.step()
            times.append(time.perf_counter() - t0)
        times = times[1:]
        epoch_seconds[name] = (float(np.mean(times)), float(np.std(times)))

    _writelines(out / "bench_steps.csv",
                ["ratio,window_len,lstm_steps_per_window"]
                + [f"{r},{window_len},{steps[r]}" for r in ratios])
    _writelines(out / "bench_timing.csv",
                ["model,mean_epoch_seconds,std_epoch_seconds"]
                + [f"{m},{mu:.4f},{sd:.4f}" for m, (mu, sd) in epoch_seconds.items()])
    return BenchResult(steps_per_window=steps, epoch_seconds=epoch_seconds)
