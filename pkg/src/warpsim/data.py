"""Time-series containers, text-format ingestion, normalization, synthetic
data generation and similar/dissimilar pair sampling.

Two on-disk formats are supported:

* ``ucr-tsv``: one instance per line, first field an integer label, the
  remaining tab-separated fields the single channel's values.
* ``mts-v1``: line 1 is ``"N T D"``; then N blocks, each a line with the
  integer label followed by T lines of D space-separated reals. UTF-8,
  ``\\n`` line endings. Values are written with ``repr`` so a round trip
  through the file is bitwise exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Structurally invalid dataset file (ragged rows, bad header, ...)."""


class ParseError(ValueError):
    """Unparseable token; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TimeSeries:
    """A T x D matrix of measurements with an optional class label."""

    values: np.ndarray
    label: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"series values must be T x D with T,D >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        if self.label is not None and self.label < 0:
            raise ValueError("label must be a non-negative integer")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Equal-shape labeled instances with labels in [0, num_classes)."""

    instances: tuple[TimeSeries, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise ValueError("dataset must contain at least one instance")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        t, d = self.instances[0].values.shape
        for k, inst in enumerate(self.instances):
            if inst.values.shape != (t, d):
                raise ValueError(
                    f"instance {k} has shape {inst.values.shape}, expected {(t, d)}"
                )
            if inst.label is None or not (0 <= inst.label < self.num_classes):
                raise ValueError(f"instance {k} label {inst.label!r} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def length(self) -> int:
        return self.instances[0].length

    @property
    def channels(self) -> int:
        return self.instances[0].channels

    @property
    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=np.int64)


@dataclass(frozen=True)
class PairBatch:
    """Series pairs with binary targets; target 1 means same class."""

    pairs: tuple[tuple[TimeSeries, TimeSeries, int], ...]

    def __len__(self) -> int:
        return len(self.pairs)


def _remap_labels(raw_labels: list[int]) -> tuple[list[int], int]:
    # Dense 0..C-1 ids in order of first appearance.
    mapping: dict[int, int] = {}
    out = []
    for lab in raw_labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return out, len(mapping)


def _fit_length(row: np.ndarray, target: int, pad: bool, truncate: bool, line_no: int) -> np.ndarray:
    t = row.shape[0]
    if t == target:
        return row
    if t > target:
        if truncate:
            return row[:target]
        raise FormatError(f"row at line {line_no} has length {t}, exceeds target {target}")
    if pad:
        return np.concatenate([row, np.zeros((target - t,) + row.shape[1:])])
    raise FormatError(f"row at line {line_no} has length {t}, below target {target}")


def _load_ucr_tsv(path: Path, pad_to, truncate) -> Dataset:
    raw_labels: list[int] = []
    rows: list[np.ndarray] = []
    line_nos: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise FormatError(f"row at line {line_no} has no values")
            try:
                label = int(fields[0])
            except ValueError:
                raise ParseError(line_no, f"label {fields[0]!r} is not an integer") from None
            vals = []
            for tok in fields[1:]:
                try:
                    vals.append(float(tok))
                except ValueError:
                    raise ParseError(line_no, f"value {tok!r} is not numeric") from None
            raw_labels.append(label)
            rows.append(np.asarray(vals, dtype=np.float64))
            line_nos.append(line_no)

    if not rows:
        raise FormatError("empty dataset file")
    lengths = {r.shape[0] for r in rows}
    if len(lengths) > 1 and pad_to is None and truncate is None:
        bad = next(ln for r, ln in zip(rows, line_nos) if r.shape[0] != rows[0].shape[0])
        raise FormatError(
            f"ragged rows (lengths {sorted(lengths)}), first mismatch at line {bad}; "
            "pass pad_to or truncate"
        )
    if truncate is not None:
        target = int(truncate)
    elif pad_to == "max":
        target = max(lengths)
    elif pad_to is not None:
        target = int(pad_to)
    else:
        target = rows[0].shape[0]
    rows = [
        _fit_length(r, target, pad=pad_to is not None, truncate=truncate is not None, line_no=ln)
        for r, ln in zip(rows, line_nos)
    ]
    labels, num_classes = _remap_labels(raw_labels)
    instances = tuple(TimeSeries(r[:, None], lab) for r, lab in zip(rows, labels))
    return Dataset(instances, num_classes)


def _load_mts_v1(path: Path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    pos = 0

    def next_line() -> tuple[int, str]:
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise FormatError("unexpected end of file")
        pos += 1
        return pos, lines[pos - 1]

    line_no, header = next_line()
    parts = header.split()
    if len(parts) != 3:
        raise FormatError(f"header at line {line_no} must be 'N T D', got {header!r}")
    try:
        n, t, d = (int(p) for p in parts)
    except ValueError:
        raise ParseError(line_no, f"non-integer header field in {header!r}") from None
    if n < 1 or t < 1 or d < 1:
        raise FormatError(f"header counts must be positive, got {header!r}")

    raw_labels = []
    blocks = []
    for _ in range(n):
        line_no, lab_line = next_line()
        try:
            raw_labels.append(int(lab_line.strip()))
        except ValueError:
            raise ParseError(line_no, f"label {lab_line.strip()!r} is not an integer") from None
        block = np.empty((t, d), dtype=np.float64)
        for i in range(t):
            line_no, row_line = next_line()
            toks = row_line.split()
            if len(toks) != d:
                raise FormatError(f"row at line {line_no} has {len(toks)} values, expected {d}")
            for j, tok in enumerate(toks):
                try:
                    block[i, j] = float(tok)
                except ValueError:
                    raise ParseError(line_no, f"value {tok!r} is not numeric") from None
        blocks.append(block)

    labels, num_classes = _remap_labels(raw_labels)
    instances = tuple(TimeSeries(b, lab) for b, lab in zip(blocks, labels))
    return Dataset(instances, num_classes)


def load_dataset(path, fmt: str, pad_to=None, truncate=None) -> Dataset:
    """Load a dataset in the named format.

    ``pad_to`` is ``"max"`` or an integer target length (zero-pad at the
    end); ``truncate`` cuts rows down to an integer length. Without either
    flag, ragged ucr-tsv input is a :class:`FormatError`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt == "ucr-tsv":
        return _load_ucr_tsv(path, pad_to, truncate)
    if fmt == "mts-v1":
        return _load_mts_v1(path)
    raise ValueError(f"unknown format {fmt!r}")


def save_dataset(dataset: Dataset, path) -> None:
    """Write ``dataset`` in mts-v1. Values round-trip bitwise."""
    out = [f"{len(dataset)} {dataset.length} {dataset.channels}"]
    for inst in dataset.instances:
        out.append(str(inst.label))
        for row in inst.values:
            out.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def znormalize(series: TimeSeries) -> TimeSeries:
    """Scale each channel to mean 0 and population std 1.

    A zero-variance channel maps to all zeros.
    """
    v = series.values
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    out = np.where(std > 0.0, (v - mean) / np.where(std > 0.0, std, 1.0), 0.0)
    return TimeSeries(out, series.label)


def znormalize_dataset(dataset: Dataset) -> Dataset:
    return Dataset(tuple(znormalize(inst) for inst in dataset.instances), dataset.num_classes)


def sample_pair_batch(dataset: Dataset, pairs_per_side: int, rng: np.random.Generator) -> PairBatch:
    """Draw ``pairs_per_side`` same-label and as many different-label pairs.

    Pairs are ordered, drawn uniformly with replacement over the feasible
    index pairs; an instance is never paired with itself.
    """
    labels = dataset.labels
    n = len(dataset)
    counts = np.bincount(labels, minlength=dataset.num_classes)
    if not np.any(counts >= 2):
        raise ValueError("cannot form positive pairs: no class has at least 2 instances")
    if np.count_nonzero(counts) < 2:
        raise ValueError("cannot form negative pairs: dataset has a single class")

    def draw(want_same: bool) -> tuple[int, int]:
        while True:
            i, j = rng.integers(0, n, size=2)
            if i == j:
                continue
            if (labels[i] == labels[j]) == want_same:
                return int(i), int(j)

    pairs = []
    for _ in range(pairs_per_side):
        i, j = draw(True)
        pairs.append((dataset.instances[i], dataset.instances[j], 1))
    for _ in range(pairs_per_side):
        i, j = draw(False)
        pairs.append((dataset.instances[i], dataset.instances[j], 0))
    return PairBatch(tuple(pairs))


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the event-pattern generator.

    Each class owns a prototype: a smooth background (shared by all
    classes) plus localized events at evenly spaced anchors, whose
    amplitude pattern identifies the class. Instances circular-shift the
    prototype by up to ``shift_range`` and additionally jitter every
    event's position by up to ``shift_range``; ``warp_strength`` drives
    the monotone resampling of the background and the event duration
    jitter; white noise of std ``noise_sigma`` is added last.

    Position and duration variation is what elastic measures absorb and
    lock-step comparison pays for, so 1-NN under an elastic measure
    beats the Euclidean baseline on this family by design.
    """

    num_classes: int
    instances_per_class: int
    length: int
    channels: int = 1
    shift_range: int = 0
    warp_strength: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if min(self.num_classes, self.instances_per_class, self.length, self.channels) < 1:
            raise ValueError("counts and dimensions must be positive")
        if self.shift_range < 0 or self.warp_strength < 0 or self.noise_sigma < 0:
            raise ValueError("shift_range, warp_strength and noise_sigma must be non-negative")
        if self.shift_range >= self.length:
            raise ValueError("shift_range must be smaller than the series length")


_EVENT_AMP_HIGH = 3.8
_EVENT_AMP_LOW = 2.2
_BACKGROUND_SCALE = 0.3


def _smooth_prototype(t: int, d: int, rng: np.random.Generator) -> np.ndarray:
    walk = np.cumsum(rng.standard_normal((t, d)), axis=0)
    kernel = np.ones(5) / 5.0
    return np.stack([np.convolve(walk[:, c], kernel, mode="same") for c in range(d)], axis=1)


def _monotone_warp(values: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    t = values.shape[0]
    if t == 1:
        return values.copy()
    slopes = rng.uniform(1.0 - strength, 1.0 + strength, size=t - 1)
    pos = np.concatenate([[0.0], np.cumsum(slopes)])
    pos *= (t - 1) / pos[-1]
    grid = np.arange(t, dtype=np.float64)
    return np.stack([np.interp(pos, grid, values[:, c]) for c in range(values.shape[1])], axis=1)


def _event_bump(t: int, center: float, width: float) -> np.ndarray:
    # Raised cosine with compact support, placed circularly.
    grid = np.arange(t, dtype=np.float64)
    dist = np.abs((grid - center + t / 2.0) % t - t / 2.0)
    return np.where(dist < width, 0.5 * (1.0 + np.cos(np.pi * dist / width)), 0.0)


def event_layout(t: int, num_classes: int) -> tuple[np.ndarray, float, list[np.ndarray]]:
    """Anchor positions, base event width and per-class amplitude patterns.

    Classes take every other Gray code over the event bits, so any two
    class patterns differ in at least two event amplitudes.
    """
    bits = max(3, math.ceil(math.log2(max(2 * num_classes, 2))))
    codes = [i ^ (i >> 1) for i in range(2**bits)][::2]
    patterns = [
        np.array([_EVENT_AMP_HIGH if (code >> e) & 1 == 0 else _EVENT_AMP_LOW for e in range(bits)])
        for code in codes[:num_classes]
    ]
    anchors = np.array([(e + 1) * t / (bits + 1) for e in range(bits)])
    return anchors, max(1.5, t / 25.6), patterns


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> Dataset:
    """Generate a labeled dataset of event patterns on a shared smooth
    background, randomized by shift, per-event jitter, warp and noise."""
    t = spec.length
    anchors, base_width, patterns = event_layout(t, spec.num_classes)
    background = _smooth_prototype(t, spec.channels, rng) * _BACKGROUND_SCALE
    instances = []
    for cls in range(spec.num_classes):
        amps = patterns[cls]
        for _ in range(spec.instances_per_class):
            shift = int(rng.integers(-spec.shift_range, spec.shift_range + 1))
            values = _monotone_warp(np.roll(background, shift, axis=0), spec.warp_strength, rng)
            for e in range(anchors.size):
                jitter = int(rng.integers(-spec.shift_range, spec.shift_range + 1))
                width = base_width * (1.0 + spec.warp_strength * rng.uniform(-1.0, 1.0))
                values = values + amps[e] * _event_bump(t, anchors[e] + shift + jitter, width)[:, None]
            values = values + spec.noise_sigma * rng.standard_normal(values.shape)
            instances.append(TimeSeries(values, cls))
    return Dataset(tuple(instances), spec.num_classes)


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified random train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x73706C69]))
    labels = dataset.labels
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in range(dataset.num_classes):
        idx = np.flatnonzero(labels == cls)
        if idx.size == 0:
            continue
        perm = rng.permutation(idx)
        n_test = int(round(test_fraction * idx.size))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test_idx.extend(perm[:n_test].tolist())
        train_idx.extend(perm[n_test:].tolist())
    train_idx.sort()
    test_idx.sort()
    train = Dataset(tuple(dataset.instances[i] for i in train_idx), dataset.num_classes)
    test = Dataset(tuple(dataset.instances[i] for i in test_idx), dataset.num_classes)
    return train, test
