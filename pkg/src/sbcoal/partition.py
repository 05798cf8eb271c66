"""Marked partitions of a finite sample.

Individuals are labelled ``1..k``. Each block carries a location flag,
``"p"`` (active lineage, plant) or ``"s"`` (dormant lineage, seed), and
optionally every individual carries a colour, ``"w"`` or ``"b"``.
"""
from __future__ import annotations

from dataclasses import dataclass

PLANT = "p"
SEED = "s"
WHITE = "w"
BLUE = "b"


@dataclass(frozen=True)
class Block:
    members: tuple[int, ...]
    flag: str

    def __post_init__(self):
        if self.flag not in (PLANT, SEED):
            raise ValueError(f"flag must be 'p' or 's', got {self.flag!r}")
        if not self.members:
            raise ValueError("blocks must be nonempty")

    def __str__(self):
        return "{" + ",".join(map(str, self.members)) + "}^" + self.flag


@dataclass(frozen=True)
class MarkedPartition:
    blocks: tuple[Block, ...]
    colours: tuple[str, ...] | None = None

    @property
    def k(self) -> int:
        return sum(len(b.members) for b in self.blocks)

    @property
    def counts(self) -> tuple[int, int]:
        """Number of p-blocks and s-blocks."""
        n = sum(1 for b in self.blocks if b.flag == PLANT)
        return n, len(self.blocks) - n

    def __len__(self):
        return len(self.blocks)

    def __str__(self):
        return "{" + ",".join(str(b) for b in self.blocks) + "}"

    def check(self) -> None:
        """Raise ``ValueError`` unless the blocks partition ``{1..k}``."""
        seen: set[int] = set()
        for b in self.blocks:
            if list(b.members) != sorted(b.members):
                raise ValueError(f"block members not sorted: {b}")
            overlap = seen.intersection(b.members)
            if overlap:
                raise ValueError(f"individuals {sorted(overlap)} appear in two blocks")
            seen.update(b.members)
        if seen != set(range(1, len(seen) + 1)):
            raise ValueError("blocks must cover exactly the labels 1..k")
        if self.colours is not None:
            if len(self.colours) != len(seen):
                raise ValueError("one colour per individual required")
            if any(col not in (WHITE, BLUE) for col in self.colours):
                raise ValueError("colours must be 'w' or 'b'")

    def canonical(self) -> "MarkedPartition":
        """Same partition with blocks ordered by smallest member."""
        return MarkedPartition(
            tuple(sorted(self.blocks, key=lambda b: b.members[0])), self.colours
        )


def init_partition(n_plants: int, m_seeds: int, coloured: bool = False) -> MarkedPartition:
    """Singletons ``{1}..{k}``; the first ``n_plants`` flagged p, the rest s."""
    if n_plants < 0 or m_seeds < 0 or n_plants + m_seeds < 1:
        raise ValueError("sample must contain at least one individual")
    k = n_plants + m_seeds
    blocks = tuple(
        Block((i,), PLANT if i <= n_plants else SEED) for i in range(1, k + 1)
    )
    return MarkedPartition(blocks, (WHITE,) * k if coloured else None)
