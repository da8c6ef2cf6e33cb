"""Well log ingestion, synthetic well generation, normalization, windowing,
and the train/test well split.

A well log is a set of equally sampled depth channels with per-sample
validity masks. The synthetic generator stands in for field data: a
persistent Markov chain over lithology states drives per-channel means, and
AR(1) noise is layered on top, so channels are cross-correlated through the
shared state path and leave-one-channel-out prediction is learnable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from string import ascii_uppercase

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

# canonical channel order: resistivity, density, natural gamma, caliper,
# spontaneous potential
CHANNELS = ("res", "den", "gr", "cal", "sp")
# the four channels used in the leave-one-out experiments; sp is ingested
# and available but excluded from the default protocol
EXPERIMENT_CHANNELS = ("res", "den", "gr", "cal")

CHANNEL_UNITS = {"res": "ohm.m", "den": "g/cm3", "gr": "API", "cal": "mm", "sp": "mV"}


class CsvFormatError(ValueError):
    """Malformed well CSV (bad depth column, irregular spacing, ...)."""


@dataclass
class WellLog:
    """Depth-indexed multichannel log with per-sample validity masks."""

    well_id: str
    depth_start: float
    dz: float
    channels: dict[str, np.ndarray]
    mask: dict[str, np.ndarray]
    label: str | None = None

    def __post_init__(self):
        if self.dz <= 0:
            raise ValueError(f"dz must be positive, got {self.dz}")
        lengths = {c: len(v) for c, v in self.channels.items()}
        if len(set(lengths.values())) > 1:
            raise ValueError(f"channel lengths differ: {lengths}")
        for c in self.channels:
            if c not in self.mask:
                self.mask[c] = np.ones(lengths[c], dtype=bool)

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.channels.values())))

    @property
    def depths(self) -> np.ndarray:
        return self.depth_start + self.dz * np.arange(self.n_samples)


@dataclass
class NormStats:
    """Per-channel z-scoring statistics, fit on training wells only."""

    mean: dict[str, float]
    std: dict[str, float]
    source_wells: tuple[str, ...]

    STD_FLOOR = 1e-8


@dataclass
class WindowDataset:
    """Supervised sliding-window view: inputs are the non-target channels
    over the window, the target is the target channel at the final sample.
    Every emitted sample is fully valid."""

    x: np.ndarray                  # (n, window_len, n_inputs)
    y: np.ndarray                  # (n,)
    depths: np.ndarray             # (n,) depth of each window's final sample
    well_ids: list[str]
    input_channels: tuple[str, ...]
    target_channel: str
    window_len: int

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class SyntheticConfig:
    """Shape and texture of the generated wells."""

    n_wells: int = 20
    samples_per_well: int = 6001       # 50 m to 350 m at 0.05 m
    depth_start: float = 50.0
    dz: float = 0.05
    n_states: int = 4
    persistence: float = 0.98
    state_means: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_STATE_MEANS))
    ar_coeff: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_AR_COEFF))
    ar_scale: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_AR_SCALE))
    seed: int = 20


DEFAULT_STATE_MEANS = {
    "res": (15.0, 45.0, 95.0, 180.0),
    "den": (2.05, 2.25, 2.45, 2.60),
    "gr": (140.0, 100.0, 65.0, 35.0),
    "cal": (232.0, 222.0, 213.0, 206.0),
    "sp": (-15.0, -35.0, -55.0, -75.0),
}
DEFAULT_AR_COEFF = {"res": 0.9, "den": 0.9, "gr": 0.9, "cal": 0.9, "sp": 0.9}
DEFAULT_AR_SCALE = {"res": 3.5, "den": 0.018, "gr": 3.5, "cal": 0.9, "sp": 2.2}


# ---------------------------------------------------------------------------
# CSV input/output
# ---------------------------------------------------------------------------

def load_csv(path) -> WellLog:
    """Parse a well CSV (header ``depth,res,den,gr,cal,sp``, subset allowed;
    empty cell = missing sample)."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in f if ln.strip()]
    if not lines:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "depth":
        raise CsvFormatError(f"{path}: first column must be 'depth', got {header[:1]}")
    names = header[1:]
    if len(names) < 2:
        raise CsvFormatError(f"{path}: need at least 2 channels besides depth")
    unknown = [n for n in names if n not in CHANNELS]
    if unknown:
        warnings.warn(f"{path.name}: unknown channel columns kept as-is: {unknown}")

    depths = []
    cols: list[list[float]] = [[] for _ in names]
    masks: list[list[bool]] = [[] for _ in names]
    for row_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvFormatError(
                f"{path}: row {row_no} has {len(cells)} cells, expected {len(header)}")
        depths.append(float(cells[0]))
        for j, cell in enumerate(cells[1:]):
            cell = cell.strip()
            if cell == "":
                cols[j].append(np.nan)
                masks[j].append(False)
            else:
                cols[j].append(float(cell))
                masks[j].append(True)

    depths = np.asarray(depths)
    if depths.size == 0:
        raise CsvFormatError(f"{path}: no samples")
    # rows are numbered over data rows, 1-based, matching error reports
    diffs = np.diff(depths)
    bad = np.nonzero(diffs <= 0)[0]
    if bad.size:
        raise CsvFormatError(
            f"{path}: depth not strictly increasing at row {int(bad[0]) + 2}")
    if depths.size > 1:
        dz = float(diffs[0])
        irregular = np.nonzero(np.abs(diffs - dz) > 1e-6)[0]
        if irregular.size:
            raise CsvFormatError(
                f"{path}: irregular depth spacing at row {int(irregular[0]) + 2} "
                f"(expected step {dz})")
    else:
        dz = 0.05

    channels = {n: np.asarray(c) for n, c in zip(names, cols)}
    mask = {n: np.asarray(m, dtype=bool) for n, m in zip(names, masks)}
    return WellLog(well_id=path.stem, depth_start=float(depths[0]), dz=dz,
                   channels=channels, mask=mask)


def save_csv(log: WellLog, path) -> None:
    """Write a well CSV; masked samples become empty cells."""
    names = [c for c in CHANNELS if c in log.channels]
    names += [c for c in log.channels if c not in names]
    depth_fmt = "{:.2f}" if abs(round(log.dz, 2) - log.dz) < 1e-12 else "{:.6f}"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("depth," + ",".join(names) + "\n")
        depths = log.depths
        for i in range(log.n_samples):
            cells = [depth_fmt.format(depths[i])]
            for n in names:
                if log.mask[n][i]:
                    cells.append(f"{log.channels[n][i]:.12g}")
                else:
                    cells.append("")
            f.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# synthetic wells
# ---------------------------------------------------------------------------

def _state_path(n: int, n_states: int, persistence: float,
                rng: np.random.Generator) -> np.ndarray:
    """Markov lithology path: stay with probability ``persistence``, else
    jump uniformly to one of the other states."""
    states = np.empty(n, dtype=np.intp)
    s = int(rng.integers(n_states))
    stay = rng.random(n)
    jump = rng.integers(0, max(n_states - 1, 1), size=n)
    for t in range(n):
        if n_states > 1 and stay[t] >= persistence:
            # deterministic remap so the new state differs from the old
            nxt = jump[t]
            s = int(nxt if nxt < s else nxt + 1)
        states[t] = s
    return states


def generate_synthetic(cfg: SyntheticConfig) -> list[WellLog]:
    """Seeded synthetic wells; output depends only on the config."""
    if cfg.n_states < 1:
        raise ValueError(f"n_states must be >= 1, got {cfg.n_states}")
    if cfg.n_states > 1 and not (0.0 < cfg.persistence < 1.0):
        raise ValueError(
            f"degenerate transition matrix: persistence {cfg.persistence} not in (0, 1)")
    channels = list(cfg.state_means)
    for c in channels:
        if len(cfg.state_means[c]) != cfg.n_states:
            raise ValueError(
                f"channel {c!r} has {len(cfg.state_means[c])} state means, "
                f"expected {cfg.n_states}")

    wells = []
    for w in range(cfg.n_wells):
        rng = np.random.default_rng((cfg.seed, w))
        states = _state_path(cfg.samples_per_well, cfg.n_states, cfg.persistence, rng)
        vals: dict[str, np.ndarray] = {}
        for c in channels:
            means = np.asarray(cfg.state_means[c])[states]
            a = cfg.ar_coeff.get(c, 0.0)
            scale = cfg.ar_scale.get(c, 0.0)
            eps = rng.standard_normal(cfg.samples_per_well)
            noise = lfilter([scale], [1.0, -a], eps)
            vals[c] = means + noise
        wells.append(WellLog(
            well_id=f"well_{w:02d}", depth_start=cfg.depth_start, dz=cfg.dz,
            channels=vals,
            mask={c: np.ones(cfg.samples_per_well, dtype=bool) for c in channels},
        ))
    return wells


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def fit_normalizer(train_wells: list[WellLog]) -> NormStats:
    """Per-channel mean/std over the valid samples of the training wells."""
    if not train_wells:
        raise ValueError("fit_normalizer: no training wells")
    names = set(train_wells[0].channels)
    for well in train_wells[1:]:
        names &= set(well.channels)
    mean, std = {}, {}
    for c in sorted(names):
        vals = np.concatenate([w.channels[c][w.mask[c]] for w in train_wells])
        if vals.size == 0:
            raise ValueError(f"fit_normalizer: channel {c!r} has no valid samples")
        mean[c] = float(vals.mean())
        std[c] = max(float(vals.std()), NormStats.STD_FLOOR)
    return NormStats(mean=mean, std=std,
                     source_wells=tuple(w.well_id for w in train_wells))


def normalize(log: WellLog, stats: NormStats) -> WellLog:
    """Z-score each channel that has fitted statistics."""
    channels = {}
    for c, v in log.channels.items():
        if c in stats.mean:
            channels[c] = (v - stats.mean[c]) / stats.std[c]
        else:
            channels[c] = v.copy()
    return replace(log, channels=channels, mask={c: m.copy() for c, m in log.mask.items()})


def denormalize(values: np.ndarray, stats: NormStats, channel: str) -> np.ndarray:
    return np.asarray(values) * stats.std[channel] + stats.mean[channel]


# ---------------------------------------------------------------------------
# windowing and splitting
# ---------------------------------------------------------------------------

def make_windows(log: WellLog, target_channel: str, L: int, stride: int = 1,
                 input_channels: tuple[str, ...] | None = None) -> WindowDataset:
    """One sample per valid end position t: inputs over [t-L+1, t], target at
    t. Windows touching any masked needed value are dropped."""
    if L < 1:
        raise ValueError(f"window length must be >= 1, got {L}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if target_channel not in log.channels:
        raise ValueError(f"{log.well_id}: target channel {target_channel!r} not present")
    if input_channels is None:
        input_channels = tuple(c for c in EXPERIMENT_CHANNELS if c != target_channel)
    missing = [c for c in input_channels if c not in log.channels]
    if missing:
        raise ValueError(f"{log.well_id}: input channels missing from log: {missing}")

    n = log.n_samples
    empty = WindowDataset(
        x=np.empty((0, L, len(input_channels))), y=np.empty(0), depths=np.empty(0),
        well_ids=[], input_channels=tuple(input_channels),
        target_channel=target_channel, window_len=L)
    if L > n:
        warnings.warn(f"{log.well_id}: window length {L} exceeds well length {n}; "
                      "empty dataset")
        return empty

    data = np.stack([log.channels[c] for c in input_channels], axis=1)    # (n, c)
    inputs_valid = np.all([log.mask[c] for c in input_channels], axis=0)  # (n,)
    window_ok = sliding_window_view(inputs_valid, L).all(axis=1)          # (n-L+1,)
    ends = np.arange(L - 1, n, stride)
    keep = window_ok[ends - (L - 1)] & log.mask[target_channel][ends]
    ends = ends[keep]
    if ends.size == 0:
        return empty

    x = sliding_window_view(data, L, axis=0)          # (n-L+1, c, L)
    x = x[ends - (L - 1)].transpose(0, 2, 1).copy()   # (m, L, c)
    y = log.channels[target_channel][ends].copy()
    return WindowDataset(
        x=x, y=y, depths=log.depths[ends], well_ids=[log.well_id] * ends.size,
        input_channels=tuple(input_channels), target_channel=target_channel,
        window_len=L)


def prediction_windows(log: WellLog, input_channels: tuple[str, ...], L: int):
    """Windows for inference only: target validity is not required. Returns
    (end_indices, x) with x shaped (m, L, n_inputs)."""
    missing = [c for c in input_channels if c not in log.channels]
    if missing:
        raise ValueError(f"{log.well_id}: input channels missing from log: {missing}")
    n = log.n_samples
    if L > n:
        raise ValueError(f"{log.well_id}: well has {n} samples, shorter than "
                         f"window length {L}")
    data = np.stack([log.channels[c] for c in input_channels], axis=1)
    inputs_valid = np.all([log.mask[c] for c in input_channels], axis=0)
    window_ok = sliding_window_view(inputs_valid, L).all(axis=1)
    ends = np.arange(L - 1, n)[window_ok]
    x = sliding_window_view(data, L, axis=0)[ends - (L - 1)].transpose(0, 2, 1).copy()
    return ends, x


def concat_datasets(datasets: list[WindowDataset]) -> WindowDataset:
    datasets = [d for d in datasets if len(d) > 0]
    if not datasets:
        raise ValueError("concat_datasets: all datasets empty")
    first = datasets[0]
    for d in datasets[1:]:
        if (d.input_channels != first.input_channels
                or d.target_channel != first.target_channel
                or d.window_len != first.window_len):
            raise ValueError("concat_datasets: incompatible datasets")
    return WindowDataset(
        x=np.concatenate([d.x for d in datasets]),
        y=np.concatenate([d.y for d in datasets]),
        depths=np.concatenate([d.depths for d in datasets]),
        well_ids=sum((d.well_ids for d in datasets), []),
        input_channels=first.input_channels, target_channel=first.target_channel,
        window_len=first.window_len)


def split_wells(wells: list[WellLog], n_train: int = 15, n_test: int = 5,
                seed: int = 0) -> tuple[list[WellLog], list[WellLog]]:
    """Seeded disjoint split; test wells are labeled A, B, C, ... in split
    order."""
    if n_train + n_test > len(wells):
        raise ValueError(
            f"cannot split {len(wells)} wells into {n_train} train + {n_test} test")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(wells))
    train = [wells[i] for i in perm[:n_train]]
    test = [wells[i] for i in perm[n_train:n_train + n_test]]
    for i, well in enumerate(test):
        well.label = ascii_uppercase[i] if i < len(ascii_uppercase) else f"T{i}"
    return train, test
