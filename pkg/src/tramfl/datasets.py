"""Labeled datasets: synthetic Gaussian-blob generation, CSV I/O, label
histograms, and minibatch sampling.

All randomness flows through explicit seeds or ``numpy.random.Generator``
streams, so every operation here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, StateError


@dataclass
class LabeledSample:
    """One feature vector with its class index."""

    features: np.ndarray
    label: int

    def __eq__(self, other):
        if not isinstance(other, LabeledSample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)


@dataclass
class LabeledDataset:
    """Ordered collection of samples sharing a feature dimension and label range."""

    samples: list[LabeledSample]
    num_classes: int
    dims: int
    _dense: tuple | None = field(default=None, repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.dims == other.dims
            and self.samples == other.samples
        )

    def __len__(self):
        return len(self.samples)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (features, labels) arrays, cached after the first call."""
        if self._dense is None:
            feats = np.stack([s.features for s in self.samples])
            labels = np.array([s.label for s in self.samples], dtype=np.int64)
            self._dense = (feats, labels)
        return self._dense


@dataclass
class LabelHistogram:
    """Per-class sample counts.

    Counts are stored as floats so the same type can hold fractional
    expected-usage values alongside realized integer counts.
    """

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, LabelHistogram):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def total(self) -> float:
        return float(self.counts.sum())


def generate_synthetic(
    num_classes: int, dims: int, per_class: int, separation: float, seed: int
) -> LabeledDataset:
    """Sample a labeled dataset of unit-variance Gaussian blobs.

    Class means sit at ``separation`` times a unit direction per class:
    standard basis vectors when ``dims >= num_classes``, otherwise random
    unit directions drawn from the seeded generator. Samples are ordered
    class-major (all of class 0, then class 1, ...).
    """
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if not separation > 0:
        raise ValueError(f"separation must be > 0, got {separation}")

    rng = np.random.default_rng(seed)
    if dims >= num_classes:
        means = np.zeros((num_classes, dims))
        means[np.arange(num_classes), np.arange(num_classes)] = separation
    else:
        directions = rng.standard_normal((num_classes, dims))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        means = separation * directions

    samples = []
    for c in range(num_classes):
        feats = means[c] + rng.standard_normal((per_class, dims))
        samples.extend(LabeledSample(feats[i], c) for i in range(per_class))
    return LabeledDataset(samples, num_classes, dims)


def generate_synthetic_split(
    num_classes: int,
    dims: int,
    train_per_class: int,
    test_per_class: int,
    separation: float,
    seed: int,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Generate one synthetic dataset and split it class-wise into train/test.

    Both halves share the same class means (a single generator call), which a
    pair of independently seeded calls to :func:`generate_synthetic` would not
    guarantee when ``dims < num_classes``.
    """
    block = train_per_class + test_per_class
    full = generate_synthetic(num_classes, dims, block, separation, seed)
    train_samples, test_samples = [], []
    for c in range(num_classes):
        start = c * block
        train_samples.extend(full.samples[start : start + train_per_class])
        test_samples.extend(full.samples[start + train_per_class : start + block])
    return (
        LabeledDataset(train_samples, num_classes, dims),
        LabeledDataset(test_samples, num_classes, dims),
    )


def load_csv(path, has_header: bool = False) -> LabeledDataset:
    """Read a dataset from ``label,f1,...,fd`` lines.

    The label must be a nonnegative integer literal; the feature width is
    fixed by the first data row. Blank lines are ignored. Raises
    :class:`ParseError` with the 1-based line number on malformed input.
    """
    samples: list[LabeledSample] = []
    dims = None
    max_label = -1
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if has_header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise ParseError(f"{path}: line {lineno}: expected 'label,f1,...', got {line!r}")
            try:
                label = int(fields[0])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: label must be an integer, got {fields[0]!r}"
                ) from None
            if label < 0:
                raise ParseError(f"{path}: line {lineno}: negative label {label}")
            if dims is None:
                dims = len(fields) - 1
            elif len(fields) - 1 != dims:
                raise ParseError(
                    f"{path}: line {lineno}: expected {dims} features, got {len(fields) - 1}"
                )
            try:
                feats = np.array([float(f) for f in fields[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric feature value") from None
            if not np.all(np.isfinite(feats)):
                raise ParseError(f"{path}: line {lineno}: non-finite feature value")
            samples.append(LabeledSample(feats, label))
            max_label = max(max_label, label)
    if not samples:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(samples, max_label + 1, dims)


def save_csv(ds: LabeledDataset, path, header: bool = False) -> None:
    """Write a dataset in the format read by :func:`load_csv` (LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header:
            handle.write("label," + ",".join(f"f{i + 1}" for i in range(ds.dims)) + "\n")
        for s in ds.samples:
            handle.write(f"{s.label}," + ",".join(repr(float(v)) for v in s.features) + "\n")


def _num_classes_of(data) -> int:
    num_classes = getattr(data, "num_classes", None)
    if num_classes is not None:
        return num_classes
    return len(data.hist.counts)


def histogram(data) -> LabelHistogram:
    """Per-class sample counts of a dataset or shard."""
    num_classes = _num_classes_of(data)
    labels = [s.label for s in data.samples]
    if not labels:
        return LabelHistogram(np.zeros(num_classes))
    return LabelHistogram(np.bincount(labels, minlength=num_classes).astype(np.float64))


def draw_minibatch(shard, batch_size: int, rng: np.random.Generator):
    """Draw a batch of samples from a shard and report its label counts.

    Sampling is uniform without replacement; if the shard holds fewer than
    ``batch_size`` samples it falls back to sampling with replacement. Every
    call advances ``rng``.

    Returns ``(samples, counts)`` where ``counts`` sums to ``batch_size``.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    population = len(shard.samples)
    if population == 0:
        raise StateError("cannot draw a minibatch from an empty shard")
    replace = population < batch_size
    idx = rng.choice(population, size=batch_size, replace=replace)
    batch = [shard.samples[i] for i in idx]
    counts = np.bincount(
        [s.label for s in batch], minlength=_num_classes_of(shard)
    ).astype(np.float64)
    return batch, LabelHistogram(counts)
