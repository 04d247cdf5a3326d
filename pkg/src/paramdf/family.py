"""Families of graph matrix representations.

The learnable-representation input set is built from normalized adjacency
matrices ``D~^eps A~ D~^eps`` raised to integer powers, optionally restricted
to a hop-limited sparsity pattern.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import HOP_INF, Graph, adjacency, connected_components, degree_matrix, hop_distances

PRESETS = ("laplacian", "norm_laplacian_selfloop", "sym_norm_adj")


@dataclass(frozen=True)
class FamilySpec:
    """Ordered ``(eps, k)`` entries plus a sparsity mode.

    ``hops=None`` means dense; ``hops=h`` zeroes entries farther than ``h`` hops.
    """

    entries: tuple
    hops: Optional[int] = None

    def __post_init__(self):
        entries = tuple((float(e), int(k)) for e, k in self.entries)
        if not entries:
            raise ValueError("family spec needs at least one (eps, k) entry")
        for eps, k in entries:
            if not -0.5 <= eps <= 0.0:
                raise ValueError(f"eps={eps} outside [-0.5, 0]")
            if k < 0:
                raise ValueError(f"k={k} must be nonnegative")
        if len(set(entries)) != len(entries):
            raise ValueError("duplicate (eps, k) entries")
        if self.hops is not None and int(self.hops) < 1:
            raise ValueError("hop mask radius must be >= 1")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    @property
    def sparsity(self) -> str:
        return "dense" if self.hops is None else f"hop:{self.hops}"

    @classmethod
    def parse(cls, entries: Sequence, sparsity: str = "dense") -> "FamilySpec":
        """Build from config form: ``[[eps, k], ...]`` and ``"dense"`` or ``"hop:<h>"``."""
        return cls(tuple(tuple(e) for e in entries), parse_sparsity(sparsity))

    def to_config(self) -> dict:
        return {"entries": [[e, k] for e, k in self.entries], "sparsity": self.sparsity}


def parse_sparsity(text) -> Optional[int]:
    if text is None or text == "dense":
        return None
    if isinstance(text, int):
        return text
    if isinstance(text, str) and text.startswith("hop:"):
        return int(text[4:])
    raise ValueError(f"sparsity must be 'dense' or 'hop:<h>', got {text!r}")


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """Stacked symmetric operators of one graph.

    ``matrices`` has shape ``(|G|, n, n)`` in FamilySpec order. ``support`` marks the
    positions a mixer may write to: same connected component when dense,
    within the hop radius when masked.
    """

    tags: tuple
    matrices: np.ndarray
    support: np.ndarray

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def __len__(self):
        return self.matrices.shape[0]

    def __iter__(self):
        return iter(zip(self.tags, self.matrices))


def build_base(g: Graph, eps: float) -> np.ndarray:
    if not -0.5 <= eps <= 0.0:
        raise ValueError(f"eps={eps} outside [-0.5, 0]")
    a = adjacency(g)
    a_tilde = a + np.eye(g.n)
    # d~ >= 1 always, so the log is finite
    scale = np.exp(eps * np.log(degree_matrix(a, add_self_loops=True)))
    return scale[:, None] * a_tilde * scale[None, :]


def matrix_power(s: np.ndarray, k: int) -> np.ndarray:
    out = np.eye(s.shape[0])
    for _ in range(k):
        out = out @ s
    return out


def build_family(g: Graph, spec: FamilySpec) -> MatrixFamily:
    bases = {}
    mats = np.empty((len(spec), g.n, g.n))
    for i, (eps, k) in enumerate(spec.entries):
        if eps not in bases:
            bases[eps] = build_base(g, eps)
        m = matrix_power(bases[eps], k)
        mats[i] = 0.5 * (m + m.T)
    if spec.hops is None:
        comp = connected_components(g)
        support = comp[:, None] == comp[None, :]
    else:
        support = hop_distances(g, spec.hops) <= spec.hops
        mats = mats * support[None]
    mats.setflags(write=False)
    support.setflags(write=False)
    return MatrixFamily(spec.entries, mats, support)


def preset_operator(g: Graph, which: str) -> np.ndarray:
    if which == "laplacian":
        a = adjacency(g)
        return np.diag(degree_matrix(a)) - a
    if which == "norm_laplacian_selfloop":
        return np.eye(g.n) - build_base(g, -0.5)
    if which == "sym_norm_adj":
        return build_base(g, -0.5)
    raise ValueError(f"unknown preset {which!r}; expected one of {PRESETS}")


def lap_spec(num: int, hops: Optional[int] = None) -> FamilySpec:
    """Fixed-eigenspace family ``{(D~^-1/2 A~ D~^-1/2)^k | k = 1..num}``."""
    return FamilySpec(tuple((-0.5, k) for k in range(1, num + 1)), hops)


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ b - b @ a))


__all__ = [
    "HOP_INF", "PRESETS", "FamilySpec", "MatrixFamily", "build_base", "build_family",
    "commutator_norm", "hop_distances", "lap_spec", "matrix_power", "parse_sparsity",
    "preset_operator",
]
