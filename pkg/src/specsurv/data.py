"""Survival and journey data containers, risk sets, and CSV I/O.

A survival dataset holds right-censored observations: a strictly
positive observation time per sample, an event indicator (True when the
event occurred, False when the sample was censored), and a feature row
per sample. A journey dataset holds grouped impression histories where
at most one impression per journey converts.

Risk sets use the closed convention: the set at-risk at an anchor's
observation time includes every sample whose time is greater than or
equal to the anchor's, the anchor itself among them. Tied times all
share the same risk set, and orderings that need a total order break
ties by sample index.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_features, check_survival_arrays

__all__ = [
    "Observation",
    "SurvivalDataset",
    "RiskSet",
    "Journey",
    "JourneyDataset",
    "risk_set",
    "load_csv",
    "write_csv",
    "load_journeys",
    "write_journeys",
    "train_test_split_indices",
]


@dataclass(frozen=True)
class Observation:
    """A single right-censored observation."""

    time: float
    event: bool

    def __post_init__(self):
        if not (self.time > 0 and np.isfinite(self.time)):
            raise ValueError(f"observation time must be positive and finite, got {self.time}")


@dataclass(frozen=True)
class RiskSet:
    """Members at risk at one anchor's observation time."""

    anchor: int
    members: np.ndarray


class SurvivalDataset:
    """Immutable right-censored survival data.

    Parameters
    ----------
    features : ndarray of shape (n, d)
    time : ndarray of shape (n,)
        Strictly positive observation times.
    event : ndarray of shape (n,)
        True where the event was observed, False where censored.
    """

    def __init__(self, features, time, event):
        time, event = check_survival_arrays(time, event)
        features = check_features(features, n_rows=time.shape[0])
        self.features = features
        self.time = time
        self.event = event
        # Ascending time, ties broken by sample index.
        self.sorted_order = np.lexsort((np.arange(time.shape[0]), time))
        for arr in (self.features, self.time, self.event, self.sorted_order):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_events(self):
        return int(self.event.sum())

    @property
    def censoring_rate(self):
        return 1.0 - self.n_events / self.n

    def observations(self):
        """The data as a list of ``Observation`` records."""
        return [Observation(float(t), bool(e)) for t, e in zip(self.time, self.event)]

    def subset(self, indices):
        """Dataset restricted to ``indices`` (order preserved)."""
        indices = np.asarray(indices, dtype=np.intp)
        return SurvivalDataset(self.features[indices], self.time[indices], self.event[indices])

    def __repr__(self):
        return (
            f"SurvivalDataset(n={self.n}, d={self.d}, "
            f"censoring_rate={self.censoring_rate:.3f})"
        )


def risk_set(ds, i):
    """Risk set at sample ``i``'s observation time, anchor included.

    Closed convention: members are all ``j`` with ``time[j] >= time[i]``,
    so ties are included in both directions.
    """
    if not 0 <= i < ds.n:
        raise IndexError(f"anchor index {i} out of range for n={ds.n}")
    members = np.flatnonzero(ds.time >= ds.time[i])
    return RiskSet(anchor=i, members=members)


# ---------------------------------------------------------------------------
# Journey (counting-process) data


@dataclass(frozen=True)
class Journey:
    """One impression history.

    ``items`` are row indices into the shared item feature table and
    ``impression_times`` their display times. ``event_item``/``event_time``
    identify the converting impression, or are both None for a censored
    journey.
    """

    journey_id: str
    items: np.ndarray
    impression_times: np.ndarray
    event_item: int | None = None
    event_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", np.asarray(self.items, dtype=np.intp))
        object.__setattr__(
            self, "impression_times", np.asarray(self.impression_times, dtype=np.float64)
        )
        if self.items.shape != self.impression_times.shape:
            raise ValueError(f"journey {self.journey_id}: items/impression_times length mismatch")
        if self.items.shape[0] == 0:
            raise ValueError(f"journey {self.journey_id} has no impressions")
        if (self.event_item is None) != (self.event_time is None):
            raise ValueError(
                f"journey {self.journey_id}: event item and event time must be set together"
            )
        if self.event_item is not None and self.event_item not in self.items:
            raise ValueError(
                f"journey {self.journey_id}: event item {self.event_item} was never shown"
            )

    @property
    def observed(self):
        return self.event_item is not None

    def at_risk_items(self):
        """Items whose impressions were on display when the journey ended.

        Every impression shown at or before the event time is at risk;
        for censored journeys there is no anchor and the full impression
        list is returned.
        """
        if not self.observed:
            return self.items
        mask = self.impression_times <= self.event_time
        mask[np.flatnonzero(self.items == self.event_item)] = True
        return self.items[mask]


@dataclass
class JourneyDataset:
    """Journeys plus the shared item feature table."""

    journeys: list
    item_features: np.ndarray = field(default=None)

    def __post_init__(self):
        self.item_features = check_features(self.item_features)
        self.item_features.setflags(write=False)
        for j in self.journeys:
            if j.items.max(initial=-1) >= self.item_features.shape[0]:
                raise ValueError(f"journey {j.journey_id} references an unknown item")

    @property
    def n_items(self):
        return self.item_features.shape[0]

    @property
    def n_journeys(self):
        return len(self.journeys)

    @property
    def conversion_rate(self):
        return sum(j.observed for j in self.journeys) / max(len(self.journeys), 1)

    def __repr__(self):
        return (
            f"JourneyDataset(n_journeys={self.n_journeys}, n_items={self.n_items}, "
            f"conversion_rate={self.conversion_rate:.3f})"
        )


# ---------------------------------------------------------------------------
# CSV I/O
#
# Survival CSV: `time` and `event` columns plus one column per feature.
# Journey CSV: `journey_id`, `item_id`, `impression_time`, `event` rows, one
# per impression; the converting impression carries event=1 and records the
# conversion time in its impression_time field. Item features live in a
# sidecar CSV keyed by `item_id`.


def _format(x):
    return repr(float(x))


def load_csv(path, time_column="time", event_column="event", feature_columns=None):
    """Load a survival dataset from CSV.

    Feature columns default to every column other than the time and
    event columns, in file order. Validation errors name the offending
    row (1-based, excluding the header).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    for required in (time_column, event_column):
        if required not in header:
            raise ValueError(f"{path}: missing required column '{required}'")
    if feature_columns is None:
        feature_columns = [c for c in header if c not in (time_column, event_column)]
    missing = [c for c in feature_columns if c not in header]
    if missing:
        raise ValueError(f"{path}: missing feature columns {missing}")
    col = {name: header.index(name) for name in header}

    n = len(rows)
    if n == 0:
        raise ValueError(f"{path}: no data rows")
    time = np.empty(n)
    event = np.empty(n)
    X = np.empty((n, len(feature_columns)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 1} has {len(row)} fields, expected {len(header)}")
        try:
            time[r] = float(row[col[time_column]])
            event[r] = float(row[col[event_column]])
            for k, name in enumerate(feature_columns):
                X[r, k] = float(row[col[name]])
        except ValueError as exc:
            raise ValueError(f"{path}: row {r + 1}: {exc}") from None
        if not time[r] > 0:
            raise ValueError(f"{path}: row {r + 1}: non-positive time {time[r]}")
        if event[r] not in (0.0, 1.0):
            raise ValueError(f"{path}: row {r + 1}: event must be 0 or 1, got {row[col[event_column]]}")
    return SurvivalDataset(X, time, event)


def write_csv(ds, path, feature_names=None):
    """Write a survival dataset to CSV (deterministic formatting)."""
    if feature_names is None:
        feature_names = [f"x{k}" for k in range(ds.d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "event", *feature_names])
        for i in range(ds.n):
            writer.writerow(
                [_format(ds.time[i]), int(ds.event[i])]
                + [_format(v) for v in ds.features[i]]
            )


def load_journeys(path, items_path):
    """Load a journey dataset from an impressions CSV and an item sidecar.

    The impressions file has columns ``journey_id, item_id, impression_time,
    event``; the row with event=1 is the converting impression and its
    impression_time field records the conversion time. The sidecar is keyed
    by ``item_id`` with one column per feature.
    """
    with open(items_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "item_id":
            raise ValueError(f"{items_path}: first column must be 'item_id'")
        item_rows = list(reader)
    item_ids = [row[0] for row in item_rows]
    index_of = {item_id: k for k, item_id in enumerate(item_ids)}
    if len(index_of) != len(item_ids):
        raise ValueError(f"{items_path}: duplicate item ids")
    features = np.array(
        [[float(v) for v in row[1:]] for row in item_rows], dtype=np.float64
    )

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["journey_id", "item_id", "impression_time", "event"]
        if header != expected:
            raise ValueError(f"{path}: expected header {expected}, got {header}")
        by_journey = {}
        for r, row in enumerate(reader):
            if len(row) != 4:
                raise ValueError(f"{path}: row {r + 1} has {len(row)} fields, expected 4")
            jid, item_id, t, ev = row
            if item_id not in index_of:
                raise ValueError(f"{path}: row {r + 1}: unknown item id '{item_id}'")
            by_journey.setdefault(jid, []).append((index_of[item_id], float(t), ev == "1"))

    journeys = []
    for jid, impressions in by_journey.items():
        items = np.array([imp[0] for imp in impressions], dtype=np.intp)
        times = np.array([imp[1] for imp in impressions])
        clicked = [k for k, imp in enumerate(impressions) if imp[2]]
        if len(clicked) > 1:
            raise ValueError(f"{path}: journey '{jid}' has {len(clicked)} event rows")
        if clicked:
            k = clicked[0]
            journeys.append(
                Journey(jid, items, times, event_item=int(items[k]), event_time=float(times[k]))
            )
        else:
            journeys.append(Journey(jid, items, times))
    return JourneyDataset(journeys, features), item_ids


def write_journeys(ads, path, items_path, item_ids=None):
    """Write a journey dataset and its item-feature sidecar."""
    if item_ids is None:
        item_ids = [f"item{k}" for k in range(ads.n_items)]
    with open(items_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id"] + [f"x{k}" for k in range(ads.item_features.shape[1])])
        for item_id, row in zip(item_ids, ads.item_features):
            writer.writerow([item_id] + [_format(v) for v in row])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["journey_id", "item_id", "impression_time", "event"])
        for j in ads.journeys:
            for item, t in zip(j.items, j.impression_times):
                clicked = j.observed and item == j.event_item
                written_time = j.event_time if clicked else t
                writer.writerow([j.journey_id, item_ids[item], _format(written_time), int(clicked)])


def train_test_split_indices(n, test_frac, rng):
    """Shuffled train/test index split."""
    order = rng.permutation(n)
    n_test = int(round(n * test_frac))
    n_test = min(max(n_test, 1), n - 1) if 0 < test_frac < 1 else n_test
    return np.sort(order[n_test:]), np.sort(order[:n_test])
