"""Runtime values for simulation.

Values are plain Python data where possible (int, bool, tuple, frozenset)
plus small frozen wrappers for process identities, enumerated-set members
and control states, and an immutable FinMap for finite functions.

Everything is hashable and totally ordered via value_key, which gives the
simulator deterministic iteration and lets exhaustive exploration use
states as dictionary keys.  canon() normalises sets of pairs to FinMap so
that structurally equal values compare equal regardless of how they were
built (the empty set and the empty map coincide).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Proc:
    name: str


@dataclass(frozen=True)
class EnumVal:
    set_name: str
    elem: str


@dataclass(frozen=True)
class StateVal:
    name: str


class FinMap:
    """Immutable finite map with key-sorted iteration."""

    __slots__ = ("_items", "_lookup", "_hash")

    def __init__(self, items=()):
        if isinstance(items, dict):
            pairs = list(items.items())
        else:
            pairs = list(items)
        pairs.sort(key=lambda kv: value_key(kv[0]))
        self._items = tuple(pairs)
        self._lookup = dict(pairs)
        if len(self._lookup) != len(self._items):
            raise ValueError("duplicate keys in FinMap")
        self._hash = hash(self._items)

    def get(self, key, default=None):
        return self._lookup.get(key, default)

    def __getitem__(self, key):
        return self._lookup[key]

    def __contains__(self, key) -> bool:
        return key in self._lookup

    def __len__(self) -> int:
        return len(self._items)

    def items(self):
        return self._items

    def keys(self):
        return tuple(k for k, _ in self._items)

    def values(self):
        return tuple(v for _, v in self._items)

    def set(self, key, value) -> "FinMap":
        return FinMap([(k, v) for k, v in self._items if k != key] + [(key, value)])

    def __eq__(self, other) -> bool:
        return isinstance(other, FinMap) and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {v!r}" for k, v in self._items)
        return f"FinMap({{{inner}}})"


def value_key(v):
    """Total order over all runtime values, by rank then payload."""
    if type(v) is bool:
        return (0, v)
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, Proc):
        return (2, v.name)
    if isinstance(v, EnumVal):
        return (3, v.set_name, v.elem)
    if isinstance(v, StateVal):
        return (4, v.name)
    if isinstance(v, tuple):
        return (5, len(v), tuple(value_key(x) for x in v))
    if isinstance(v, frozenset):
        return (6, len(v), tuple(sorted(value_key(x) for x in v)))
    if isinstance(v, FinMap):
        return (7, len(v), tuple((value_key(k), value_key(val))
                                 for k, val in v.items()))
    raise TypeError(f"not a runtime value: {v!r}")


def canon(v):
    """Normalise a value: a set whose members are all pairs with distinct
    first components becomes a FinMap."""
    if isinstance(v, frozenset):
        if all(isinstance(x, tuple) and len(x) == 2 for x in v):
            keys = [x[0] for x in v]
            if len(set(map(value_key, keys))) == len(keys):
                return FinMap(list(v))
    return v


def as_pairs(v) -> frozenset:
    """View a set-like value as a set of elements (maps become pair sets)."""
    if isinstance(v, FinMap):
        return frozenset(v.items())
    if isinstance(v, frozenset):
        return v
    raise TypeError(f"not a set-like value: {v!r}")


def is_setlike(v) -> bool:
    return isinstance(v, (frozenset, FinMap))


def format_value(v) -> str:
    """Compact human-readable rendering, deterministic."""
    if type(v) is bool:
        return "TRUE" if v else "FALSE"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Proc):
        return v.name
    if isinstance(v, EnumVal):
        return f"{v.set_name}.{v.elem}"
    if isinstance(v, StateVal):
        return v.name
    if isinstance(v, tuple):
        return "(" + ", ".join(format_value(x) for x in v) + ")"
    if isinstance(v, frozenset):
        inner = ", ".join(format_value(x) for x in sorted(v, key=value_key))
        return "{" + inner + "}"
    if isinstance(v, FinMap):
        inner = ", ".join(f"{format_value(k)}: {format_value(val)}"
                          for k, val in v.items())
        return "{" + inner + "}"
    raise TypeError(f"not a runtime value: {v!r}")


def value_to_json(v):
    """JSON-compatible structure for trace export; deterministic."""
    if type(v) is bool or isinstance(v, int):
        return v
    if isinstance(v, (Proc, StateVal)):
        return v.name
    if isinstance(v, EnumVal):
        return f"{v.set_name}.{v.elem}"
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    if isinstance(v, frozenset):
        return [value_to_json(x) for x in sorted(v, key=value_key)]
    if isinstance(v, FinMap):
        return {format_value(k): value_to_json(val) for k, val in v.items()}
    raise TypeError(f"not a runtime value: {v!r}")
