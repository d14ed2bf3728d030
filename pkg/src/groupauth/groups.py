"""Finite cyclic group arithmetic in exponent form.

A cyclic group of order ``n`` is handled additively as integers mod ``n``:
an element is the exponent of the mother-group generator that produces it.
For every divisor ``k`` of ``n`` there is exactly one subgroup of order
``k``, generated by the element with exponent ``n // k``.  Protocol code
only ever needs to pick a subgroup element, take its inverse, and encode
the result as an L-bit word, so nothing heavier than modular addition is
required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Protocol words (ids, keys, nonces, message fields) are plain unsigned
# integers below 2**word_bits.
LWord = int

DEFAULT_WORD_BITS = 32


@dataclass(frozen=True)
class GroupSpec:
    """Cyclic mother group of order ``order``, words ``word_bits`` wide."""

    order: int
    word_bits: int = DEFAULT_WORD_BITS

    def __post_init__(self) -> None:
        if self.order < 2:
            raise ValueError(f"group order must be >= 2, got {self.order}")
        if self.word_bits < 1:
            raise ValueError(f"word_bits must be >= 1, got {self.word_bits}")
        if self.order > (1 << self.word_bits):
            raise ValueError(
                f"order {self.order} does not fit in {self.word_bits}-bit words"
            )

    @property
    def word_mask(self) -> int:
        return (1 << self.word_bits) - 1


@dataclass(frozen=True)
class SubgroupHandle:
    """The unique subgroup of a given order inside its mother group."""

    group: GroupSpec
    order: int           # divisor k of the mother-group order
    gen_exponent: int    # exponent of the subgroup generator, n // k
    label: int           # small integer id used as the look-up table key

    def holds_index(self, i: int) -> bool:
        """True if ``i`` addresses a non-identity element of this subgroup."""
        return 1 <= i <= self.order - 1


@dataclass(frozen=True)
class GroupElement:
    """A group element, stored as its mother-group exponent."""

    exponent: int


def make_group(n: int, word_bits: int = DEFAULT_WORD_BITS) -> GroupSpec:
    """Construct the cyclic mother group of order ``n``."""
    return GroupSpec(order=n, word_bits=word_bits)


def subgroup_for_divisor(group: GroupSpec, k: int, label: int = 0) -> SubgroupHandle:
    """Return the unique order-``k`` subgroup of ``group``.

    ``k`` must be a divisor of the group order and at least 2: the
    identity-only subgroup has no usable elements.
    """
    if k < 2:
        raise ValueError(f"subgroup order must be >= 2, got {k}")
    if group.order % k != 0:
        raise ValueError(f"{k} does not divide group order {group.order}")
    return SubgroupHandle(group=group, order=k, gen_exponent=group.order // k, label=label)


def element(sub: SubgroupHandle, i: int) -> GroupElement:
    """The i-th power of the subgroup generator, identity excluded."""
    if not sub.holds_index(i):
        raise ValueError(
            f"index must be in [1, {sub.order - 1}] for an order-{sub.order} subgroup, got {i}"
        )
    return GroupElement((i * sub.gen_exponent) % sub.group.order)


def inverse(sub: SubgroupHandle, i: int) -> GroupElement:
    """Group inverse of ``element(sub, i)``; exponents sum to 0 mod n."""
    n = sub.group.order
    return GroupElement((n - element(sub, i).exponent) % n)


def encode(elem: GroupElement, group: GroupSpec) -> LWord:
    """Embed an element into the word domain: its exponent, zero-extended."""
    if not 0 <= elem.exponent < group.order:
        raise ValueError(f"exponent {elem.exponent} outside [0, {group.order})")
    return elem.exponent


def is_group_generator(group: GroupSpec, k: int) -> bool:
    """True if the k-th power of the mother generator generates the whole group."""
    if not 1 <= k < group.order:
        raise ValueError(f"exponent must be in [1, {group.order}), got {k}")
    return math.gcd(k, group.order) == 1
