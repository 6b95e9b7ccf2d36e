"""
Rating file ingestion and indexed rating tables.

Ratings are read as :class:`RawRating` records with opaque string IDs, then
:func:`build_dataset` deduplicates them, assigns dense internal indices (by
first appearance in the training stream) and prunes the test set down to the
users and items seen in training.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConfigError, RatingParseError, RatingRangeError

_log = logging.getLogger(__name__)

RatingFormat = Literal["movietweetings", "csv"]

MOVIETWEETINGS_SCALE = (0.0, 10.0)
_CSV_HEADER_NAMES = {"rating", "ratings", "score"}


@dataclass(frozen=True)
class RawRating:
    user: str
    item: str
    rating: float
    timestamp: int = 0


def _parse_rating(text: str, lineno: int, path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise RatingParseError(f"non-numeric rating {text!r}", lineno, path) from None
    if not math.isfinite(value):
        raise RatingParseError(f"non-finite rating {text!r}", lineno, path)
    return value


def _parse_timestamp(text: str, lineno: int, path) -> int:
    try:
        return int(text)
    except ValueError:
        raise RatingParseError(f"bad timestamp {text!r}", lineno, path) from None


def parse_ratings_lines(
    lines: Iterable[str], format: RatingFormat = "movietweetings", path=None
) -> list[RawRating]:
    """
    Parse rating records from an iterable of text lines.

    Blank lines are skipped.  For the CSV format a first line whose rating
    column reads ``rating`` (or ``ratings``/``score``) is taken as a header.
    """
    if format not in ("movietweetings", "csv"):
        raise ValueError(f"unknown ratings format {format!r}")

    out: list[RawRating] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if format == "movietweetings":
            fields = line.split("::")
            if len(fields) != 4:
                raise RatingParseError(
                    f"expected 4 '::'-separated fields, got {len(fields)}", lineno, path
                )
        else:
            fields = [f.strip() for f in line.split(",")]
            if len(fields) not in (3, 4):
                raise RatingParseError(
                    f"expected 3 or 4 comma-separated fields, got {len(fields)}", lineno, path
                )
            if lineno == 1 and fields[2].lower() in _CSV_HEADER_NAMES:
                continue

        rating = _parse_rating(fields[2], lineno, path)
        if format == "movietweetings":
            lo, hi = MOVIETWEETINGS_SCALE
            if not lo <= rating <= hi:
                raise RatingRangeError(f"rating {rating} outside [{lo}, {hi}]", lineno, path)
        ts = _parse_timestamp(fields[3], lineno, path) if len(fields) == 4 else 0
        out.append(RawRating(fields[0], fields[1], rating, ts))
    return out


def parse_ratings_file(
    path: str | PathLike, format: RatingFormat = "movietweetings"
) -> list[RawRating]:
    """
    Read a ratings file.

    ``movietweetings`` files hold ``user::item::rating::timestamp`` records
    (ratings must lie in [0, 10]); ``csv`` files hold
    ``user,item,rating[,timestamp]`` with an optional header line.  Records
    are returned in file order.
    """
    with open(path, encoding="utf-8", newline=None) as f:
        return parse_ratings_lines(f, format, path)


def format_ratings(records: Iterable[RawRating], format: RatingFormat = "movietweetings") -> str:
    """Render records back to the text form :func:`parse_ratings_file` reads."""
    sep = "::" if format == "movietweetings" else ","
    lines = []
    for r in records:
        rating = repr(r.rating) if r.rating != int(r.rating) else str(int(r.rating))
        lines.append(sep.join([r.user, r.item, rating, str(r.timestamp)]))
    return "".join(line + "\n" for line in lines)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _csr(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, nrows: int):
    order = np.lexsort((cols, rows))
    ptr = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nrows), out=ptr[1:])
    return (
        _readonly(ptr),
        _readonly(cols[order].astype(np.int64)),
        _readonly(vals[order].astype(np.float64)),
    )


@dataclass(frozen=True, eq=False)
class IdMap:
    """Bidirectional map between external IDs and dense indices."""

    ids: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_ids(cls, ids: Sequence[str]) -> IdMap:
        ids = tuple(ids)
        return cls(ids, {e: n for n, e in enumerate(ids)})

    def __len__(self):
        return len(self.ids)

    def lookup(self, ext: str) -> int | None:
        return self.index.get(ext)


class RatingsTable:
    """
    Sparse rating store with dense contiguous user/item indices.

    The triples are kept in dataset order (``users``, ``items``, ``ratings``,
    ``timestamps``); ``by_user`` and ``by_item`` are CSR re-indexings with each
    row's entries sorted by index.  All arrays are read-only.
    """

    def __init__(
        self,
        users: np.ndarray,
        items: np.ndarray,
        ratings: np.ndarray,
        timestamps: np.ndarray,
        user_map: IdMap,
        item_map: IdMap,
    ):
        self.users = _readonly(np.asarray(users, dtype=np.int64).copy())
        self.items = _readonly(np.asarray(items, dtype=np.int64).copy())
        self.ratings = _readonly(np.asarray(ratings, dtype=np.float64).copy())
        self.timestamps = _readonly(np.asarray(timestamps, dtype=np.int64).copy())
        self.user_map = user_map
        self.item_map = item_map

        n = len(self.users)
        if not (len(self.items) == len(self.ratings) == len(self.timestamps) == n):
            raise ValueError("triple arrays differ in length")
        if n and (
            self.users.min() < 0
            or self.users.max() >= self.num_users
            or self.items.min() < 0
            or self.items.max() >= self.num_items
        ):
            raise ValueError("index out of range for the id maps")

        self.user_ptr, self.user_items, self.user_ratings = _csr(
            self.users, self.items, self.ratings, self.num_users
        )
        self.item_ptr, self.item_users, self.item_ratings = _csr(
            self.items, self.users, self.ratings, self.num_items
        )
        if n and len(np.unique(self.users * self.num_items + self.items)) != n:
            raise ValueError("duplicate (user, item) pair")

    @property
    def num_users(self) -> int:
        return len(self.user_map)

    @property
    def num_items(self) -> int:
        return len(self.item_map)

    def __len__(self):
        return len(self.users)

    def by_user(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.user_ptr[u], self.user_ptr[u + 1]
        return self.user_items[lo:hi], self.user_ratings[lo:hi]

    def by_item(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.item_ptr[i], self.item_ptr[i + 1]
        return self.item_users[lo:hi], self.item_ratings[lo:hi]

    def rating(self, u: int, i: int) -> float | None:
        """The stored rating of ``u`` for ``i``, or ``None``."""
        if not (0 <= u < self.num_users):
            return None
        lo, hi = self.user_ptr[u], self.user_ptr[u + 1]
        pos = lo + np.searchsorted(self.user_items[lo:hi], i)
        if pos < hi and self.user_items[pos] == i:
            return float(self.user_ratings[pos])
        return None

    def triples(self):
        for u, i, r in zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()):
            yield u, i, r

    def to_raw(self) -> list[RawRating]:
        uid, iid = self.user_map.ids, self.item_map.ids
        return [
            RawRating(uid[u], iid[i], r, t)
            for u, i, r, t in zip(
                self.users.tolist(), self.items.tolist(), self.ratings.tolist(),
                self.timestamps.tolist(),
            )
        ]

    def __repr__(self):
        return f"<RatingsTable {self.num_users} users, {self.num_items} items, {len(self)} ratings>"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train/test tables sharing one pair of ID maps."""

    train: RatingsTable
    test: RatingsTable
    dropped_test: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def test_empty(self) -> bool:
        return len(self.test) == 0

    def to_raw(self) -> tuple[list[RawRating], list[RawRating]]:
        return self.train.to_raw(), self.test.to_raw()


def dedup_latest(records: Iterable[RawRating]) -> list[RawRating]:
    """
    Collapse repeated (user, item) pairs, keeping the latest-timestamped
    record.  The surviving record takes the slot of the pair's first
    appearance; equal timestamps resolve to the later line.
    """
    slot: dict[tuple[str, str], int] = {}
    out: list[RawRating] = []
    for r in records:
        key = (r.user, r.item)
        k = slot.get(key)
        if k is None:
            slot[key] = len(out)
            out.append(r)
        elif r.timestamp >= out[k].timestamp:
            out[k] = r
    return out


def _table(records: Sequence[RawRating], umap: IdMap, imap: IdMap) -> RatingsTable:
    n = len(records)
    users = np.fromiter((umap.index[r.user] for r in records), np.int64, n)
    items = np.fromiter((imap.index[r.item] for r in records), np.int64, n)
    ratings = np.fromiter((r.rating for r in records), np.float64, n)
    stamps = np.fromiter((r.timestamp for r in records), np.int64, n)
    return RatingsTable(users, items, ratings, stamps, umap, imap)


def build_dataset(train_raw: Sequence[RawRating], test_raw: Sequence[RawRating]) -> Dataset:
    """
    Build an indexed :class:`Dataset` from raw train and test records.

    Duplicated pairs keep their latest rating, indices follow first
    appearance in ``train_raw``, and test records whose user or item never
    occurs in training are dropped.  An empty training set is a
    :class:`ConfigError`; an empty post-pruning test set is only flagged in
    ``Dataset.warnings``.
    """
    train = dedup_latest(train_raw)
    if not train:
        raise ConfigError("training data is empty")

    umap = IdMap.from_ids(dict.fromkeys(r.user for r in train))
    imap = IdMap.from_ids(dict.fromkeys(r.item for r in train))

    test_all = dedup_latest(test_raw)
    test = [r for r in test_all if r.user in umap.index and r.item in imap.index]
    dropped = len(test_all) - len(test)

    warnings: list[str] = []
    if dropped:
        _log.info("pruned %d of %d test ratings with unseen users or items", dropped, len(test_all))
    if not test:
        warnings.append("test set is empty after pruning")
        _log.warning("test set is empty after pruning")

    _log.info(
        "dataset: %d users, %d items, %d train / %d test ratings",
        len(umap), len(imap), len(train), len(test),
    )
    return Dataset(_table(train, umap, imap), _table(test, umap, imap), dropped, tuple(warnings))
