"""Provisioning: the server look-up table and per-tag memories.

One tag is assigned per non-identity subgroup element, but indices are
capped so that no index value is unique to a single subgroup: with Q the
second-largest subgroup order, every subgroup only uses indices
``1 .. min(own_order - 1, Q - 1)``.  The index travels in cleartext during
authentication, so an index held by exactly one subgroup would betray the
tag's subgroup on its own.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .groups import GroupSpec, SubgroupHandle, encode, inverse, make_group, subgroup_for_divisor


@dataclass
class Tag:
    """A tag's memory: everything is write-once except the rolling nonce."""

    subgroup_id: int
    index: int
    inv_word: int        # encoded inverse of the tag's subgroup element
    tag_id: int
    key: int
    nonce: int           # rolling nonce, replaced only on a verified msg4
    pending_nonce1: int | None = None  # volatile, held between msg2 and msg4

    def clone(self) -> "Tag":
        return replace(self)


@dataclass
class ServerRow:
    """Look-up table row: identity, key, and the old/new nonce pair."""

    tag_id: int
    key: int
    nonce_old: int
    nonce_new: int

    def clone(self) -> "ServerRow":
        return replace(self)


@dataclass
class ServerTable:
    group: GroupSpec
    subgroups: list[SubgroupHandle]              # fixed search order
    rows: dict[tuple[int, int], ServerRow]       # (subgroup label, index) -> row
    index_cap: int

    @property
    def gamma(self) -> int:
        """Number of subgroups, the reader's worst-case search width."""
        return len(self.subgroups)

    def clone(self) -> "ServerTable":
        return ServerTable(
            group=self.group,
            subgroups=list(self.subgroups),
            rows={k: row.clone() for k, row in self.rows.items()},
            index_cap=self.index_cap,
        )


def lookup(table: ServerTable, subgroup_id: int, index: int) -> ServerRow | None:
    """Row for (subgroup, index), or None if never provisioned."""
    return table.rows.get((subgroup_id, index))


def _draw_distinct_word(rng: random.Random, bits: int, used: set[int]) -> int:
    # uniform over [1, 2**bits), rejecting collisions; zero would make a
    # degenerate XOR mask
    while True:
        value = rng.randrange(1, 1 << bits)
        if value not in used:
            used.add(value)
            return value


def provision(
    group: GroupSpec, divisors: list[int], seed: int
) -> tuple[ServerTable, list[Tag]]:
    """Build the server table and the matching tag memories.

    ``divisors`` lists the subgroup orders to deploy, all distinct divisors
    of the group order and at least 2 of them.  Identical seeds produce
    bit-identical systems.
    """
    if len(divisors) < 2:
        raise ValueError("need at least 2 subgroups")
    if len(set(divisors)) != len(divisors):
        raise ValueError(f"duplicate divisors in {divisors}")
    subgroups = [
        subgroup_for_divisor(group, k, label=j)
        for j, k in enumerate(divisors, start=1)
    ]

    # second-largest order bounds every subgroup's usable indices
    ordered = sorted(divisors, reverse=True)
    index_cap = ordered[1] - 1
    if index_cap < 1:
        raise ValueError("second-largest subgroup has no non-identity elements")

    rng = random.Random(seed)
    used_ids: set[int] = set()
    used_keys: set[int] = set()
    rows: dict[tuple[int, int], ServerRow] = {}
    tags: list[Tag] = []
    bits = group.word_bits

    for sub in subgroups:
        top = min(sub.order - 1, index_cap)
        for i in range(1, top + 1):
            tag_id = _draw_distinct_word(rng, bits, used_ids)
            key = _draw_distinct_word(rng, bits, used_keys)
            first_nonce = rng.randrange(0, 1 << bits)
            inv_word = encode(inverse(sub, i), group)
            rows[(sub.label, i)] = ServerRow(
                tag_id=tag_id, key=key, nonce_old=0, nonce_new=first_nonce
            )
            tags.append(
                Tag(
                    subgroup_id=sub.label,
                    index=i,
                    inv_word=inv_word,
                    tag_id=tag_id,
                    key=key,
                    nonce=first_nonce,
                )
            )

    table = ServerTable(group=group, subgroups=subgroups, rows=rows, index_cap=index_cap)
    return table, tags


@dataclass
class System:
    """A provisioned deployment: the table plus every matching tag."""

    group: GroupSpec
    divisors: list[int]
    table: ServerTable
    tags: list[Tag] = field(default_factory=list)

    @classmethod
    def provision(
        cls, n: int, word_bits: int, divisors: list[int], seed: int
    ) -> "System":
        group = make_group(n, word_bits)
        table, tags = provision(group, list(divisors), seed)
        return cls(group=group, divisors=list(divisors), table=table, tags=tags)

    def clone(self) -> "System":
        return System(
            group=self.group,
            divisors=list(self.divisors),
            table=self.table.clone(),
            tags=[t.clone() for t in self.tags],
        )

    def tag_at(self, subgroup_id: int, index: int) -> Tag:
        for tag in self.tags:
            if tag.subgroup_id == subgroup_id and tag.index == index:
                return tag
        raise KeyError(f"no tag at subgroup {subgroup_id}, index {index}")


# --- text export/import -----------------------------------------------------
#
# Line-oriented formats.  Data lines are whitespace-separated lowercase hex;
# '#' lines are comments, the header comment carries the group parameters so
# a file round-trips on its own.

def dump_table(table: ServerTable) -> str:
    divisors = ",".join(str(s.order) for s in table.subgroups)
    lines = [
        "# groupauth server table",
        f"# n={table.group.order} L={table.group.word_bits} divisors={divisors}",
        "# j i id key r_old r_new",
    ]
    for (j, i) in sorted(table.rows):
        row = table.rows[(j, i)]
        lines.append(
            f"{j:x} {i:x} {row.tag_id:x} {row.key:x} {row.nonce_old:x} {row.nonce_new:x}"
        )
    return "\n".join(lines) + "\n"


def dump_tags(system: System) -> str:
    divisors = ",".join(str(k) for k in system.divisors)
    lines = [
        "# groupauth tag memories",
        f"# n={system.group.order} L={system.group.word_bits} divisors={divisors}",
        "# j i inv id key r4",
    ]
    for tag in sorted(system.tags, key=lambda t: (t.subgroup_id, t.index)):
        lines.append(
            f"{tag.subgroup_id:x} {tag.index:x} {tag.inv_word:x} "
            f"{tag.tag_id:x} {tag.key:x} {tag.nonce:x}"
        )
    return "\n".join(lines) + "\n"


def _parse_header(text: str) -> tuple[GroupSpec, list[int]]:
    for line in text.splitlines():
        if line.startswith("# n="):
            fields = dict(part.split("=", 1) for part in line[2:].split())
            group = make_group(int(fields["n"]), int(fields["L"]))
            divisors = [int(k) for k in fields["divisors"].split(",")]
            return group, divisors
    raise ValueError("missing parameter header line ('# n=... L=... divisors=...')")


def load_table(text: str) -> ServerTable:
    """Rebuild a ServerTable from its ``dump_table`` text."""
    group, divisors = _parse_header(text)
    subgroups = [
        subgroup_for_divisor(group, k, label=j)
        for j, k in enumerate(divisors, start=1)
    ]
    index_cap = sorted(divisors, reverse=True)[1] - 1
    rows: dict[tuple[int, int], ServerRow] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        j, i, tag_id, key, r_old, r_new = (int(part, 16) for part in line.split())
        if not 1 <= i <= index_cap:
            raise ValueError(f"index {i} outside [1, {index_cap}]")
        rows[(j, i)] = ServerRow(tag_id=tag_id, key=key, nonce_old=r_old, nonce_new=r_new)
    return ServerTable(group=group, subgroups=subgroups, rows=rows, index_cap=index_cap)


def load_tags(text: str) -> list[Tag]:
    """Rebuild tag memories from their ``dump_tags`` text."""
    group, _ = _parse_header(text)
    del group  # tags carry words only; header is validated for round-trips
    tags = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        j, i, inv_word, tag_id, key, r4 = (int(part, 16) for part in line.split())
        tags.append(
            Tag(subgroup_id=j, index=i, inv_word=inv_word, tag_id=tag_id, key=key, nonce=r4)
        )
    return tags
