"""Anonymity-set privacy metrics and the compromised-tags simulation.

An adversary who has read out some tags partitions the population into
sets it cannot distinguish within.  Two scalar metrics summarise a
partition of N tags into blocks of sizes |P_i|:

    privacy level   R = (1/N^2) * sum(|P_i|^2)        in [1/N, 1]
    info leakage    I = sum((|P_i|/N) * log2(N/|P_i|)) in [0, log2 N] bits

Under this scheme a read-out tag betrays nothing about its subgroup, so C
compromised tags yield C singletons plus one block of the remaining N-C;
both metrics then collapse to closed forms in (N, C).  A generic group-key
deployment is modelled for comparison: there a compromised tag exposes its
whole group, splitting the survivors by group membership.  That baseline
is an approximation for comparison curves, not a reconstruction of any
published scheme.
"""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

PROPOSED = "proposed"
BASELINE = "baseline"

PRIVACY_LEVEL = "privacy_level"
INFO_LEAKAGE = "info_leakage"


@dataclass(frozen=True)
class Partition:
    """Disjoint anonymity-set sizes; must cover the whole population."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(s < 1 for s in self.sizes):
            raise ValueError(f"every block needs at least one tag: {self.sizes}")

    @property
    def total(self) -> int:
        return sum(self.sizes)


def _check_cover(partition: Partition, total: int) -> None:
    if partition.total != total:
        raise ValueError(f"partition covers {partition.total} tags, expected {total}")


def privacy_level(partition: Partition, total: int) -> float:
    """Average anonymity-set size, normalised by the population."""
    _check_cover(partition, total)
    return sum(s * s for s in partition.sizes) / (total * total)


def privacy_level_closed(total: int, compromised: int) -> float:
    """Closed form of the privacy level for C singletons plus one rest block."""
    if not 0 <= compromised <= total:
        raise ValueError(f"compromised count {compromised} outside [0, {total}]")
    rest = total - compromised
    return (compromised + rest * rest) / (total * total)


def info_leakage(partition: Partition, total: int) -> float:
    """Identity information disclosed by the partition, in bits."""
    _check_cover(partition, total)
    return sum((s / total) * math.log2(total / s) for s in partition.sizes)


def info_leakage_closed(total: int, compromised: int) -> float:
    """Closed form of the leakage for C singletons plus one rest block.

    Undefined at C == N; use ``info_leakage`` on the all-singleton
    partition for that corner (it gives log2 N).
    """
    if not 0 <= compromised < total:
        raise ValueError(f"compromised count {compromised} outside [0, {total})")
    rest = total - compromised
    return (compromised / total) * math.log2(total) + (rest / total) * math.log2(total / rest)


def partition_proposed(total: int, compromised: Iterable[int]) -> Partition:
    """Partition induced here by a compromised set: depends only on its size."""
    count = len(set(compromised))
    if count > total:
        raise ValueError(f"{count} compromised tags in a population of {total}")
    sizes = [1] * count
    if total - count > 0:
        sizes.append(total - count)
    return Partition(tuple(sizes))


def partition_groupkey_baseline(
    group_sizes: Sequence[int], compromised: Iterable[int]
) -> Partition:
    """Partition for a group-key deployment (tags numbered 0..N-1 by group).

    Compromised tags are singletons; survivors of any touched group are
    distinguishable as that group; survivors of untouched groups blur into
    one block.
    """
    total = sum(group_sizes)
    compromised = set(compromised)
    for t in compromised:
        if not 0 <= t < total:
            raise ValueError(f"tag number {t} outside [0, {total})")
    hit_per_group = [0] * len(group_sizes)
    bounds = list(itertools.accumulate(group_sizes))
    for t in compromised:
        hit_per_group[bisect.bisect_right(bounds, t)] += 1
    sizes = [1] * len(compromised)
    untouched = 0
    for size, hits in zip(group_sizes, hit_per_group):
        if hits == 0:
            untouched += size
        elif size - hits > 0:
            sizes.append(size - hits)
    if untouched:
        sizes.append(untouched)
    return Partition(tuple(sizes))


@dataclass
class PrivacyCurve:
    metric: str                      # PRIVACY_LEVEL or INFO_LEAKAGE
    points: list[tuple[int, float]]  # (C, averaged value), C strictly increasing
    runs_averaged: int


def _partition_for(model: str, group_sizes: Sequence[int], total: int,
                   compromised: set[int]) -> Partition:
    if model == PROPOSED:
        return partition_proposed(total, compromised)
    if model == BASELINE:
        return partition_groupkey_baseline(group_sizes, compromised)
    raise ValueError(f"unknown partition model {model!r}")


def monte_carlo(
    total: int,
    group_sizes: Sequence[int],
    c_values: Sequence[int],
    runs: int,
    model: str,
    seed: int,
    exhaustive: bool = False,
) -> tuple[PrivacyCurve, PrivacyCurve]:
    """Average both metrics over uniformly drawn compromised sets.

    Per C value, ``runs`` independent C-subsets of the population are
    sampled (deterministically from the seed) and both metrics averaged.
    With ``exhaustive`` every C-subset is enumerated instead, which is the
    exact expectation; only sensible for small populations.
    """
    if sum(group_sizes) != total:
        raise ValueError(f"group sizes sum to {sum(group_sizes)}, expected {total}")
    if runs < 1:
        raise ValueError("need at least one run")
    if list(c_values) != sorted(set(c_values)):
        raise ValueError("C values must be strictly increasing")
    level_points: list[tuple[int, float]] = []
    leak_points: list[tuple[int, float]] = []
    for c in c_values:
        if not 0 <= c <= total:
            raise ValueError(f"C={c} outside [0, {total}]")
        if exhaustive:
            samples: Iterable[set[int]] = (
                set(combo) for combo in itertools.combinations(range(total), c)
            )
            n_samples = math.comb(total, c)
        else:
            # one derived seed per (C, run): runs are order-independent
            samples = (
                set(random.Random(f"{seed}:{c}:{run}").sample(range(total), c))
                for run in range(runs)
            )
            n_samples = runs
        level_sum = 0.0
        leak_sum = 0.0
        for compromised in samples:
            part = _partition_for(model, group_sizes, total, compromised)
            level_sum += privacy_level(part, total)
            leak_sum += info_leakage(part, total)
        level_points.append((c, level_sum / n_samples))
        leak_points.append((c, leak_sum / n_samples))
    runs_used = 0 if exhaustive else runs  # 0 marks exact enumeration
    return (
        PrivacyCurve(PRIVACY_LEVEL, level_points, runs_used),
        PrivacyCurve(INFO_LEAKAGE, leak_points, runs_used),
    )


def curves_to_csv(
    proposed: tuple[PrivacyCurve, PrivacyCurve],
    baseline: tuple[PrivacyCurve, PrivacyCurve] | None = None,
) -> str:
    """Render curve pairs as CSV, six decimal places per value."""
    level_p, leak_p = proposed
    header = "C,privacy_proposed,leakage_proposed"
    if baseline is not None:
        header += ",privacy_baseline,leakage_baseline"
    lines = [header]
    for idx, (c, level) in enumerate(level_p.points):
        row = f"{c},{level:.6f},{leak_p.points[idx][1]:.6f}"
        if baseline is not None:
            level_b, leak_b = baseline
            if level_b.points[idx][0] != c:
                raise ValueError("baseline sampled at different C values")
            row += f",{level_b.points[idx][1]:.6f},{leak_b.points[idx][1]:.6f}"
        lines.append(row)
    return "\n".join(lines) + "\n"
