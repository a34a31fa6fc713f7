"""
Data models for the simulated ground truth: defect sets, threshold queries,
non-adaptive query plans and their response vectors.

Items are numbered 1..n throughout. Queries come in two storage forms
behind one interface:
- sparse: sorted 1-based indices
- dense:  a boolean membership bitmap of length n (used once |W| >= n/64)

A QueryPlan stores all of its queries in one CSR layout (flat member array
plus row offsets) and is read-only after construction.

Author: Agent
Date: 2025-10-18
"""

import hashlib
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Queries at or above this fraction of the universe are stored as bitmaps
DENSE_FRACTION = 1 / 64


class UniverseMismatchError(ValueError):
    """Raised when objects over different universes are combined."""


def _readonly(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_sorted_members(indices: np.ndarray, n: int) -> None:
    if indices.size == 0:
        return
    if indices[0] < 1 or indices[-1] > n:
        raise ValueError(f"indices must lie in [1, {n}]")
    if indices.size > 1 and not np.all(np.diff(indices) > 0):
        raise ValueError("indices must be strictly increasing (sorted, no duplicates)")


# ============================================================================
# DEFECT SET
# ============================================================================

class DefectSet(BaseModel):
    """The planted set B ⊆ [n]; d = |B|."""
    model_config = ConfigDict(frozen=True)

    universe_size: int = Field(gt=0, description="Universe size n")
    members: Tuple[int, ...] = Field(default=(), description="Strictly increasing defective indices")

    @model_validator(mode='after')
    def check_members(self) -> 'DefectSet':
        _check_sorted_members(np.asarray(self.members, dtype=np.int64), self.universe_size)
        return self

    @classmethod
    def from_indices(cls, universe_size: int, indices: Iterable[int]) -> 'DefectSet':
        """Build from any iterable of distinct indices (sorted here)."""
        ordered = sorted(int(i) for i in indices)
        return cls(universe_size=universe_size, members=tuple(ordered))

    @property
    def size(self) -> int:
        return len(self.members)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)


# ============================================================================
# QUERY
# ============================================================================

class Query(BaseModel):
    """
    A query set W ⊆ [n].

    Exactly one of `indices` (sparse) or `bitmap` (dense) is stored; use
    Query.from_indices to get the representation picked by density.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    universe_size: int = Field(gt=0, description="Universe size n")
    indices: Optional[np.ndarray] = Field(default=None, description="Sorted 1-based members (sparse form)")
    bitmap: Optional[np.ndarray] = Field(default=None, description="Membership flags, position i-1 for item i (dense form)")

    @model_validator(mode='after')
    def check_representation(self) -> 'Query':
        if (self.indices is None) == (self.bitmap is None):
            raise ValueError("exactly one of indices or bitmap must be given")
        if self.indices is not None:
            _check_sorted_members(self.indices, self.universe_size)
        elif self.bitmap.shape != (self.universe_size,):
            raise ValueError(f"bitmap must have length {self.universe_size}")
        return self

    @field_validator('indices', mode='before')
    @classmethod
    def freeze_indices(cls, v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        return None if v is None else _readonly(v, np.int64)

    @field_validator('bitmap', mode='before')
    @classmethod
    def freeze_bitmap(cls, v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        return None if v is None else _readonly(v, np.bool_)

    @classmethod
    def from_indices(cls, universe_size: int, indices: Iterable[int]) -> 'Query':
        """Sorted, de-duplicated query; dense storage once |W| >= n/64."""
        members = np.unique(np.fromiter((int(i) for i in indices), dtype=np.int64))
        if members.size >= DENSE_FRACTION * universe_size and members.size > 0:
            _check_sorted_members(members, universe_size)
            bitmap = np.zeros(universe_size, dtype=np.bool_)
            bitmap[members - 1] = True
            return cls(universe_size=universe_size, bitmap=bitmap)
        return cls(universe_size=universe_size, indices=members)

    @property
    def is_dense(self) -> bool:
        return self.bitmap is not None

    @property
    def size(self) -> int:
        """k = |W|."""
        if self.bitmap is not None:
            return int(np.count_nonzero(self.bitmap))
        return int(self.indices.size)

    def member_indices(self) -> np.ndarray:
        if self.bitmap is not None:
            return np.flatnonzero(self.bitmap).astype(np.int64) + 1
        return self.indices

    def contains(self, item: int) -> bool:
        if not 1 <= item <= self.universe_size:
            return False
        if self.bitmap is not None:
            return bool(self.bitmap[item - 1])
        pos = int(np.searchsorted(self.indices, item))
        return pos < self.indices.size and int(self.indices[pos]) == item

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Query):
            return NotImplemented
        return self.universe_size == other.universe_size and np.array_equal(self.member_indices(), other.member_indices())

    def __hash__(self) -> int:
        return hash((self.universe_size, self.member_indices().tobytes()))


# ============================================================================
# QUERY PLAN
# ============================================================================

class QueryPlan(BaseModel):
    """
    A non-adaptive plan Q = (Q_1, …, Q_q) for λ-threshold queries.

    Query i owns members[offsets[i]:offsets[i+1]] (sorted, 1-based).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, populate_by_name=True)

    universe_size: int = Field(gt=0, description="Universe size n")
    lambda_: int = Field(ge=1, alias='lambda', description="Threshold λ")
    members: np.ndarray = Field(description="Concatenated query members, int64")
    offsets: np.ndarray = Field(description="Row offsets, length q+1, int64")

    @field_validator('members', 'offsets', mode='before')
    @classmethod
    def freeze_arrays(cls, v) -> np.ndarray:
        return _readonly(v, np.int64)

    @model_validator(mode='after')
    def check_layout(self) -> 'QueryPlan':
        offsets, members = self.offsets, self.members
        if offsets.ndim != 1 or offsets.size < 1 or offsets[0] != 0 or offsets[-1] != members.size:
            raise ValueError("offsets must start at 0 and end at len(members)")
        if np.any(np.diff(offsets) < 0):
            raise ValueError("offsets must be non-decreasing")
        if members.size:
            if members.min() < 1 or members.max() > self.universe_size:
                raise ValueError(f"query members must lie in [1, {self.universe_size}]")
            steps = np.diff(members)
            # positions where a new query starts are exempt from the ordering check
            row_starts = np.zeros(members.size, dtype=np.bool_)
            row_starts[offsets[1:-1][offsets[1:-1] < members.size]] = True
            if np.any((steps <= 0) & ~row_starts[1:]):
                raise ValueError("each query must be strictly increasing")
        return self

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def empty(cls, universe_size: int, lam: int) -> 'QueryPlan':
        return cls(universe_size=universe_size, lambda_=lam,
                   members=np.zeros(0, dtype=np.int64), offsets=np.zeros(1, dtype=np.int64))

    @classmethod
    def from_member_arrays(cls, universe_size: int, lam: int, rows: Sequence[np.ndarray]) -> 'QueryPlan':
        """Build from per-query sorted 1-based index arrays."""
        sizes = np.fromiter((len(r) for r in rows), dtype=np.int64, count=len(rows))
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        members = np.concatenate([np.asarray(r, dtype=np.int64) for r in rows]) if rows else np.zeros(0, dtype=np.int64)
        return cls(universe_size=universe_size, lambda_=lam, members=members, offsets=offsets)

    @classmethod
    def from_queries(cls, universe_size: int, lam: int, queries: Sequence[Query]) -> 'QueryPlan':
        for query in queries:
            if query.universe_size != universe_size:
                raise UniverseMismatchError(f"query over n={query.universe_size} in a plan over n={universe_size}")
        return cls.from_member_arrays(universe_size, lam, [q.member_indices() for q in queries])

    def concat(self, other: 'QueryPlan') -> 'QueryPlan':
        """Queries of self followed by those of other."""
        if other.universe_size != self.universe_size:
            raise UniverseMismatchError(f"cannot join plans over n={self.universe_size} and n={other.universe_size}")
        if other.lambda_ != self.lambda_:
            raise ValueError(f"cannot join plans with thresholds {self.lambda_} and {other.lambda_}")
        offsets = np.concatenate([self.offsets, other.offsets[1:] + self.members.size])
        return QueryPlan(universe_size=self.universe_size, lambda_=self.lambda_,
                         members=np.concatenate([self.members, other.members]), offsets=offsets)

    # ------------------------------------------------------------------
    # access
    # ------------------------------------------------------------------

    @property
    def num_queries(self) -> int:
        """q."""
        return int(self.offsets.size - 1)

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def row(self, i: int) -> np.ndarray:
        return self.members[self.offsets[i]:self.offsets[i + 1]]

    def query(self, i: int) -> Query:
        return Query.from_indices(self.universe_size, self.row(i))

    def queries(self) -> Iterator[Query]:
        for i in range(self.num_queries):
            yield self.query(i)

    def rows(self) -> List[np.ndarray]:
        return [self.row(i) for i in range(self.num_queries)]

    def digest(self) -> str:
        """SHA-256 over (n, λ, layout); equal plans have equal digests."""
        h = hashlib.sha256()
        h.update(f"{self.universe_size}:{self.lambda_}:".encode("utf-8"))
        h.update(self.offsets.astype('<i8').tobytes())
        h.update(self.members.astype('<i8').tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QueryPlan):
            return NotImplemented
        return self.digest() == other.digest()

    def __hash__(self) -> int:
        return hash(self.digest())


# ============================================================================
# RESPONSES
# ============================================================================

class ResponseVector(BaseModel):
    """Q^{≥λ}(B) ∈ {0,1}^q, one bit per plan query."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray = Field(description="uint8 array of 0/1 responses")

    @field_validator('bits', mode='before')
    @classmethod
    def check_bits(cls, v) -> np.ndarray:
        arr = _readonly(v, np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return arr

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> 'ResponseVector':
        return cls(bits=np.fromiter((int(b) for b in bits), dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.bits.size)

    def as_string(self) -> str:
        """Outcome id such as '0110'; '' for the empty plan."""
        return self.bits.tobytes().translate(bytes.maketrans(b'\x00\x01', b'01')).decode('ascii')

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResponseVector):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())
