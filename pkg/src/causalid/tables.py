"""Exact probability mass tables over finite variable sets.

A :class:`JointTable` is a dense array of masses, one cell per full
assignment, enumerated mixed-radix over the variable order (first variable
most significant).  Everything stays exact up to float accumulation; there
is no sampling anywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "Assignment",
    "JointTable",
    "TableError",
    "marginalize",
    "conditional_mutual_information",
    "assignments",
]

Assignment = Mapping[str, int]

_NORM_TOL = 1e-12


class TableError(ValueError):
    """Invalid table construction or table operation argument."""


def assignments(variables: Iterable[str], cards: Mapping[str, int]) -> Iterator[dict[str, int]]:
    """All assignments of ``variables``, last variable fastest."""
    names = tuple(variables)
    if not names:
        yield {}
        return
    radix = [cards[v] for v in names]
    values = [0] * len(names)
    while True:
        yield dict(zip(names, values))
        i = len(names) - 1
        while i >= 0:
            values[i] += 1
            if values[i] < radix[i]:
                break
            values[i] = 0
            i -= 1
        if i < 0:
            return


@dataclass(frozen=True, eq=False)
class JointTable:
    """Probability mass function over an ordered finite variable set."""

    variables: tuple[str, ...]
    cards: tuple[int, ...]
    mass: np.ndarray
    _marginals: dict = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if len(self.variables) != len(set(self.variables)):
            raise TableError("duplicate variable")
        if len(self.cards) != len(self.variables):
            raise TableError("one cardinality per variable required")
        if any(c < 2 for c in self.cards):
            raise TableError("cardinalities must be at least 2")
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.size != int(np.prod([*self.cards, 1])):
            raise TableError("mass size does not match cardinalities")
        mass = mass.reshape(self.cards)
        if (mass < 0).any():
            raise TableError("negative mass")
        if abs(float(mass.sum()) - 1.0) > _NORM_TOL:
            raise TableError(f"masses sum to {float(mass.sum())!r}, not 1")
        mass = mass.copy()
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "_marginals", {})

    def __eq__(self, other):
        if not isinstance(other, JointTable):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.cards == other.cards
            and np.array_equal(self.mass, other.mass)
        )

    def card(self, v: str) -> int:
        return self.cards[self._axis(v)]

    def _axis(self, v: str) -> int:
        try:
            return self.variables.index(v)
        except ValueError:
            raise TableError(f"unknown variable {v!r}") from None

    def marginal_array(self, keep: Iterable[str]) -> np.ndarray:
        """Mass array over ``keep`` in this table's variable order; cached."""
        keep_set = frozenset(keep)
        for v in keep_set:
            self._axis(v)
        cached = self._marginals.get(keep_set)
        if cached is None:
            drop = tuple(i for i, v in enumerate(self.variables) if v not in keep_set)
            cached = self.mass.sum(axis=drop) if drop else self.mass
            self._marginals[keep_set] = cached
        return cached

    def mass_of(self, assignment: Assignment) -> float:
        """Marginal probability of a (possibly partial) assignment."""
        arr = self.marginal_array(assignment.keys())
        idx = tuple(assignment[v] for v in self.variables if v in assignment)
        return float(arr[idx])


def marginalize(joint: JointTable, keep: Iterable[str]) -> JointTable:
    """Sum out everything not in ``keep``; kept variable order is preserved."""
    keep_set = frozenset(keep)
    names = tuple(v for v in joint.variables if v in keep_set)
    for v in keep_set:
        joint._axis(v)
    if not names:
        raise TableError("cannot marginalize away every variable")
    return JointTable(
        names,
        tuple(joint.cards[joint.variables.index(v)] for v in names),
        joint.marginal_array(keep_set),
    )


def conditional_mutual_information(
    joint: JointTable,
    x: Iterable[str],
    y: Iterable[str],
    z: Iterable[str] = (),
) -> float:
    """I(x; y | z) in nats, computed exactly from the table.

    Zero cells are treated as contributing zero, the usual measure-theoretic
    convention.
    """
    xs, ys, zs = frozenset(x), frozenset(y), frozenset(z)
    if xs & ys or xs & zs or ys & zs:
        raise TableError("x, y, z must be pairwise disjoint")
    sub = marginalize(joint, xs | ys | zs)
    order = sub.variables
    axes = {v: i for i, v in enumerate(order)}
    pxyz = sub.mass

    def collapsed(keep: frozenset[str]) -> np.ndarray:
        drop = tuple(axes[v] for v in order if v not in keep)
        return pxyz.sum(axis=drop, keepdims=True) if drop else pxyz

    pz = collapsed(zs)
    pxz = collapsed(xs | zs)
    pyz = collapsed(ys | zs)
    positive = pxyz > 0
    ratio = np.ones_like(pxyz)
    np.divide(pxyz * pz, pxz * pyz, out=ratio, where=positive)
    return float((pxyz * np.log(ratio, where=positive, out=np.zeros_like(pxyz))).sum())
