"""Epoch dataset container, class balancing, stratified splitting, and the
bit-exact epoch file format.

Condition tags are stored as one byte per epoch: bit0 = walking, bit1 =
loaded, bit2 = late. The file format ("EEP1") is little-endian throughout:
magic, u32 version=1, u32 N, u32 C, u32 T, f32 sample_rate_hz, u32 subject-id
byte length + UTF-8 bytes, N label bytes (0/1), N condition bytes, then
N*C*T float32 samples in (epoch, channel, time) order. No padding.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, FormatError

MAGIC = b"EEP1"
VERSION = 1

COND_WALKING = 1
COND_LOADED = 2
COND_LATE = 4


def condition_code(posture="seated", load="unloaded", phase="early"):
    if posture not in ("seated", "walking"):
        raise ConfigError(f"posture must be seated|walking, got {posture!r}")
    if load not in ("unloaded", "loaded"):
        raise ConfigError(f"load must be unloaded|loaded, got {load!r}")
    if phase not in ("early", "late"):
        raise ConfigError(f"phase must be early|late, got {phase!r}")
    code = 0
    if posture == "walking":
        code |= COND_WALKING
    if load == "loaded":
        code |= COND_LOADED
    if phase == "late":
        code |= COND_LATE
    return code


def condition_name(code, with_phase=False):
    """Human-readable tag, e.g. 'walking-loaded' or 'seated-unloaded-late'."""
    posture = "walking" if code & COND_WALKING else "seated"
    load = "loaded" if code & COND_LOADED else "unloaded"
    name = f"{posture}-{load}"
    if with_phase:
        name += "-late" if code & COND_LATE else "-early"
    return name


@dataclass
class EpochDataset:
    """Labeled stimulus-locked epochs: epochs (N, C, T) float32, labels (N,)
    with 0 = non-target / 1 = target, conditions (N,) bit-coded uint8."""

    epochs: np.ndarray
    labels: np.ndarray
    conditions: np.ndarray
    sample_rate_hz: float = 128.0
    subject_id: str = ""

    def __post_init__(self):
        self.epochs = np.ascontiguousarray(self.epochs, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        self.conditions = np.ascontiguousarray(self.conditions, dtype=np.uint8)
        if self.epochs.ndim != 3:
            raise DataError(f"epochs must be (N, C, T), got shape {self.epochs.shape}")
        n = self.epochs.shape[0]
        if self.labels.shape != (n,) or self.conditions.shape != (n,):
            raise DataError(
                f"labels/conditions must have length {n}, got "
                f"{self.labels.shape} / {self.conditions.shape}"
            )
        if self.labels.size and self.labels.max() > 1:
            raise DataError("labels must be 0 (non-target) or 1 (target)")

    @property
    def n_epochs(self):
        return self.epochs.shape[0]

    @property
    def n_channels(self):
        return self.epochs.shape[1]

    @property
    def n_samples(self):
        return self.epochs.shape[2]

    def take(self, indices):
        """New dataset holding the given epochs (copied, original order kept)."""
        idx = np.asarray(indices, dtype=np.int64)
        return EpochDataset(
            epochs=self.epochs[idx].copy(),
            labels=self.labels[idx].copy(),
            conditions=self.conditions[idx].copy(),
            sample_rate_hz=self.sample_rate_hz,
            subject_id=self.subject_id,
        )

    def class_counts(self):
        return (int((self.labels == 0).sum()), int((self.labels == 1).sum()))

    def majority_condition_name(self):
        """Most frequent posture-load tag; used to label training reports."""
        if self.n_epochs == 0:
            raise DataError("empty dataset has no condition")
        codes, counts = np.unique(self.conditions & (COND_WALKING | COND_LOADED),
                                  return_counts=True)
        return condition_name(int(codes[np.argmax(counts)]))


@dataclass
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {total}")
        if min(self.train_frac, self.val_frac, self.test_frac) < 0:
            raise ConfigError("split fractions must be non-negative")


def balance_undersample(ds, seed):
    """Equalize class counts by dropping random majority-class epochs.

    Survivors keep their original order; the removed set is drawn uniformly
    without replacement from the seeded generator.
    """
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError(f"both classes must be present, got counts {n0}/{n1}")
    if n0 == n1:
        return ds.take(np.arange(ds.n_epochs))
    rng = np.random.default_rng(seed)
    minority = 1 if n1 < n0 else 0
    keep_count = min(n0, n1)
    majority_idx = np.flatnonzero(ds.labels != minority)
    survivors = rng.choice(majority_idx, size=keep_count, replace=False)
    keep = np.union1d(np.flatnonzero(ds.labels == minority), survivors)
    return ds.take(np.sort(keep))


def _allocate(counts, quota, bump_priority):
    """Largest-remainder allocation of `quota` epochs over classes.

    bump_priority tracks how many remainder bumps each class has already
    received across splits, so consecutive splits rotate the extra epoch and
    the leftover (train) split stays balanced.
    """
    total = counts.sum()
    exact = quota * counts / total
    alloc = np.floor(exact).astype(int)
    remainder = quota - alloc.sum()
    if remainder > 0:
        order = sorted(
            range(len(counts)),
            key=lambda c: (-(exact[c] - alloc[c]), bump_priority[c], c),
        )
        for c in order[:remainder]:
            alloc[c] += 1
            bump_priority[c] += 1
    return alloc


def split(ds, spec):
    """Stratified (train, val, test) split.

    Split sizes are floor(frac * N) for val and test with the remainder going
    to train; within each split, class counts follow largest-remainder
    allocation with rotated bumps so per-split class imbalance stays <= 1 on
    balanced input. Assignment is a seeded shuffle; epochs keep their
    original relative order inside each split.
    """
    n = ds.n_epochs
    if n < 10:
        raise DataError(f"need at least 10 epochs to split, got {n}")
    counts = np.bincount(ds.labels, minlength=2)
    if (counts == 0).any():
        raise DataError("both classes must be present to stratify")
    n_val = int(np.floor(spec.val_frac * n))
    n_test = int(np.floor(spec.test_frac * n))

    rng = np.random.default_rng(spec.seed)
    per_class = [rng.permutation(np.flatnonzero(ds.labels == c)) for c in range(2)]

    bumps = [0, 0]
    val_alloc = _allocate(counts, n_val, bumps)
    test_alloc = _allocate(counts, n_test, bumps)

    val_idx, test_idx, train_idx = [], [], []
    for c in range(2):
        pool = per_class[c]
        a, b = val_alloc[c], test_alloc[c]
        val_idx.append(pool[:a])
        test_idx.append(pool[a : a + b])
        train_idx.append(pool[a + b :])
    parts = {
        "train": np.sort(np.concatenate(train_idx)),
        "val": np.sort(np.concatenate(val_idx)),
        "test": np.sort(np.concatenate(test_idx)),
    }
    fracs = {"train": spec.train_frac, "val": spec.val_frac, "test": spec.test_frac}
    for name, idx in parts.items():
        if fracs[name] > 0:
            got = np.bincount(ds.labels[idx], minlength=2)
            if (got == 0).any():
                raise DataError(
                    f"{name} split would miss a class (N={n} too small for "
                    f"fractions {fracs})"
                )
    return ds.take(parts["train"]), ds.take(parts["val"]), ds.take(parts["test"])


def match_condition_lengths(groups, seed=0):
    """Truncate every group to the smallest group's size by uniform random
    subsampling (original order preserved)."""
    if len(groups) < 2:
        raise DataError(f"need at least 2 condition groups, got {len(groups)}")
    sizes = [g.n_epochs for g in groups]
    if min(sizes) == 0:
        raise DataError("condition groups must be non-empty")
    target = min(sizes)
    rng = np.random.default_rng(seed)
    out = []
    for g in groups:
        if g.n_epochs == target:
            out.append(g.take(np.arange(g.n_epochs)))
        else:
            keep = rng.choice(g.n_epochs, size=target, replace=False)
            out.append(g.take(np.sort(keep)))
    return out


def write_epochs(ds, path):
    """Serialize to the epoch file format; write/read round-trips bitwise."""
    n, c, t = ds.epochs.shape
    sid = ds.subject_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIf", VERSION, n, c, t, ds.sample_rate_hz))
        fh.write(struct.pack("<I", len(sid)))
        fh.write(sid)
        fh.write(ds.labels.tobytes())
        fh.write(ds.conditions.tobytes())
        fh.write(np.ascontiguousarray(ds.epochs, dtype="<f4").tobytes())


def _need(buf, offset, count, what):
    if offset + count > len(buf):
        raise FormatError(f"truncated file: expected {what}", offset=offset)
    return offset + count


def read_epochs(path):
    """Parse an epoch file, reporting the byte offset of any malformation."""
    with open(path, "rb") as fh:
        buf = fh.read()
    off = 0
    _need(buf, off, 4, "magic")
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", offset=0)
    off = 4
    end = _need(buf, off, 20, "header")
    version, n, c, t, rate = struct.unpack("<IIIIf", buf[off:end])
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    off = end
    end = _need(buf, off, 4, "subject-id length")
    (sid_len,) = struct.unpack("<I", buf[off:end])
    off = end
    end = _need(buf, off, sid_len, "subject-id bytes")
    try:
        subject_id = buf[off:end].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"subject id is not valid UTF-8: {exc}", offset=off) from exc
    off = end

    labels_off = off
    off = _need(buf, off, n, "label bytes")
    labels = np.frombuffer(buf[labels_off:off], dtype=np.uint8)
    if labels.size and labels.max() > 1:
        bad = int(np.argmax(labels > 1))
        raise FormatError(f"label byte must be 0 or 1, got {labels[bad]}",
                          offset=labels_off + bad)
    cond_off = off
    off = _need(buf, off, n, "condition bytes")
    conditions = np.frombuffer(buf[cond_off:off], dtype=np.uint8)
    if conditions.size and conditions.max() > 7:
        bad = int(np.argmax(conditions > 7))
        raise FormatError(f"condition byte must use bits 0-2 only, got "
                          f"{conditions[bad]}", offset=cond_off + bad)

    if n > 0 and (c == 0 or t == 0):
        raise FormatError(f"invalid dims N={n} C={c} T={t}", offset=8)
    payload = n * c * t * 4
    data_off = off
    off = _need(buf, off, payload, f"{n}x{c}x{t} float32 payload")
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after payload", offset=off)
    data = np.frombuffer(buf[data_off:off], dtype="<f4").reshape(n, c, t)
    return EpochDataset(
        epochs=data.copy(),
        labels=labels.copy(),
        conditions=conditions.copy(),
        sample_rate_hz=float(rate),
        subject_id=subject_id,
    )
