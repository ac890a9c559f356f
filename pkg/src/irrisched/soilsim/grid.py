"""Uniform vertical grid for a single soil column.

Depth z increases downward: node 0 sits at the surface (z = 0) and node
Nx-1 at the column bottom (z = Hz). Every node carries an equal control
volume dz in the solver's discrete water balance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ColumnGrid:
    depth: float = 0.5
    node_count: int = 21
    node_depths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.node_count < 3:
            raise ValueError(f"need at least 3 nodes, got {self.node_count}")
        if self.depth <= 0.0:
            raise ValueError(f"depth must be positive, got {self.depth}")
        object.__setattr__(
            self, "node_depths", np.linspace(0.0, self.depth, self.node_count)
        )

    @property
    def dz(self) -> float:
        return self.depth / (self.node_count - 1)

    def root_nodes(self, zr: float) -> np.ndarray:
        """Indices of nodes lying within the rooting depth (depth <= zr)."""
        if zr <= 0.0 or zr > self.depth + 1e-12:
            raise ValueError(f"rooting depth {zr} outside (0, {self.depth}]")
        return np.nonzero(self.node_depths <= zr + 1e-12)[0]

    def quarter_slices(self, zr: float) -> list[np.ndarray]:
        """Node index groups for the four depth quarters of [0, zr].

        A node whose depth falls exactly on a quarter boundary belongs to
        the shallower quarter.
        """
        edges = np.linspace(0.0, zr, 5)
        groups = []
        for q in range(4):
            lo, hi = edges[q], edges[q + 1]
            if q == 0:
                mask = (self.node_depths >= lo - 1e-12) & (self.node_depths <= hi + 1e-12)
            else:
                mask = (self.node_depths > lo + 1e-12) & (self.node_depths <= hi + 1e-12)
            groups.append(np.nonzero(mask)[0])
        return groups
