"""Small exact-enough linear algebra for labelled finite-dimensional states.

Everything here is immutable.  A :class:`Space` is an ordered basis with one
or more named tensor factors; kets, isometries and measurement families all
carry the space they live on so that mismatches are caught at call time
instead of silently producing wrong numbers.

Tolerances: ``EPS`` (1e-12) for algebraic identities, ``SUM_EPS`` (1e-10) for
accumulated sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Hashable, Iterable, Mapping

import numpy as np

EPS = 1e-12
SUM_EPS = 1e-10

Label = Hashable


class SpaceMismatch(ValueError):
    """Operands live on different (or overlapping, for products) spaces."""


class ImpossibleBranch(ValueError):
    """Projection onto an outcome whose Born weight is zero."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Space:
    """Ordered orthonormal basis.  Product spaces order the left factor outer."""

    factors: tuple[str, ...]
    labels: tuple[Label, ...]

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate basis labels in {self.factors}: {self.labels}")

    @classmethod
    def named(cls, name: str, labels: Iterable[Label]) -> "Space":
        return cls((name,), tuple(labels))

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: Label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"{label!r} is not a basis label of {self.factors}") from None

    def __mul__(self, other: "Space") -> "Space":
        if set(self.factors) & set(other.factors):
            raise SpaceMismatch(f"overlapping factors {self.factors} and {other.factors}")

        def parts(space: Space, label: Label) -> tuple:
            return label if len(space.factors) > 1 else (label,)

        labels = tuple(
            parts(self, a) + parts(other, b) for a in self.labels for b in other.labels
        )
        return Space(self.factors + other.factors, labels)

    def __str__(self) -> str:
        return "⊗".join(self.factors)


@dataclass(frozen=True, eq=False)
class Ket:
    """State vector over ``space``.  ``zero=True`` marks the destroyed state 𝟎."""

    space: Space
    amps: np.ndarray
    zero: bool = False

    def __post_init__(self) -> None:
        amps = _frozen(self.amps)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amps", amps)
        if self.zero:
            if np.any(amps != 0):
                raise ValueError("the zero ket must have all-zero amplitudes")
        elif abs(np.linalg.norm(amps) - 1.0) > EPS * 10:
            raise ValueError(f"ket on {self.space} is not normalized (norm {np.linalg.norm(amps)!r})")

    @classmethod
    def basis(cls, space: Space, label: Label) -> "Ket":
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index(label)] = 1.0
        return cls(space, amps)

    @classmethod
    def from_amplitudes(cls, space: Space, amps: Mapping[Label, complex] | Iterable[complex]) -> "Ket":
        if isinstance(amps, Mapping):
            vec = np.zeros(space.dim, dtype=complex)
            for label, a in amps.items():
                vec[space.index(label)] = a
        else:
            vec = np.asarray(list(amps), dtype=complex)
        return cls(space, vec)

    @classmethod
    def null(cls, space: Space) -> "Ket":
        return cls(space, np.zeros(space.dim, dtype=complex), zero=True)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def amplitude(self, label: Label) -> complex:
        return complex(self.amps[self.space.index(label)])

    def inner(self, other: "Ket") -> complex:
        """⟨self|other⟩."""
        _same_space(self.space, other.space)
        return complex(np.vdot(self.amps, other.amps))

    def allclose(self, other: "Ket", tol: float = EPS, up_to_phase: bool = False) -> bool:
        _same_space(self.space, other.space)
        if self.zero or other.zero:
            return self.zero and other.zero
        b = other.amps
        if up_to_phase:
            ov = np.vdot(other.amps, self.amps)
            if abs(ov) > EPS:
                b = b * (ov / abs(ov))
        return bool(np.max(np.abs(self.amps - b)) <= tol)

    def __repr__(self) -> str:
        if self.zero:
            return f"Ket({self.space}, 𝟎)"
        terms = ", ".join(f"{lab}: {a:.6g}" for lab, a in zip(self.space.labels, self.amps) if abs(a) > EPS)
        return f"Ket({self.space}, {{{terms}}})"


def _same_space(a: Space, b: Space) -> None:
    if a != b:
        raise SpaceMismatch(f"space {a} ({a.labels}) does not match {b} ({b.labels})")


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear map ``source → target`` with orthonormal columns."""

    source: Space
    target: Space
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.shape != (self.target.dim, self.source.dim):
            raise ValueError(f"matrix shape {m.shape} does not map {self.source} → {self.target}")
        object.__setattr__(self, "matrix", m)
        dev = isometry_deviation(m)
        if dev > EPS:
            raise ValueError(f"columns are not orthonormal (max |V†V − I| = {dev:.3g})")

    @classmethod
    def from_images(cls, source: Space, target: Space, images: Mapping[Label, Ket]) -> "Isometry":
        cols = []
        for label in source.labels:
            img = images[label]
            _same_space(img.space, target)
            cols.append(img.amps)
        return cls(source, target, np.column_stack(cols))

    @classmethod
    def identity(cls, space: Space) -> "Isometry":
        return cls(space, space, np.eye(space.dim, dtype=complex))

    @property
    def is_unitary(self) -> bool:
        return self.source.dim == self.target.dim

    def compose(self, first: "Isometry") -> "Isometry":
        """``self ∘ first``."""
        _same_space(first.target, self.source)
        return Isometry(first.source, self.target, self.matrix @ first.matrix)


def isometry_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    """Labelled measurement operators on one space.

    Built from projectors these are orthogonal projectors.  After
    :func:`heisenberg` with a non-surjective isometry the members are positive
    effects that still sum to the identity but are no longer idempotent.
    """

    space: Space
    members: Mapping[Label, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frozen = {}
        for label, m in self.members.items():
            m = _frozen(m)
            if m.shape != (self.space.dim, self.space.dim):
                raise ValueError(f"member {label!r} has shape {m.shape} on a {self.space.dim}-dim space")
            frozen[label] = m
        object.__setattr__(self, "members", dict(frozen))

    @classmethod
    def from_basis(cls, kets: Mapping[Label, Ket]) -> "ProjectorFamily":
        spaces = {k.space for k in kets.values()}
        if len(spaces) != 1:
            raise SpaceMismatch("family kets live on different spaces")
        return cls(spaces.pop(), {label: projector(k) for label, k in kets.items()})

    @property
    def outcomes(self) -> tuple[Label, ...]:
        return tuple(self.members)

    def __getitem__(self, label: Label) -> np.ndarray:
        return self.members[label]

    def without(self, label: Label) -> "ProjectorFamily":
        return ProjectorFamily(self.space, {k: v for k, v in self.members.items() if k != label})

    def weights(self, psi: Ket) -> dict[Label, float]:
        return {label: weight(m, psi) for label, m in self.members.items()}


def projector(k: Ket) -> np.ndarray:
    """|k⟩⟨k|."""
    if k.zero:
        raise ValueError("cannot project onto the zero ket")
    return np.outer(k.amps, k.amps.conj())


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def tensor(a: Ket, b: Ket) -> Ket:
    """a ⊗ b over the product basis (left factor outer)."""
    space = a.space * b.space
    if a.zero or b.zero:
        return Ket.null(space)
    return Ket(space, np.kron(a.amps, b.amps))


def apply(V: Isometry, psi: Ket) -> Ket:
    _same_space(psi.space, V.source)
    if psi.zero:
        return Ket.null(V.target)
    out = V.matrix @ psi.amps
    # renormalize away rounding only; a real norm change means a broken isometry
    n = np.linalg.norm(out)
    if abs(n - 1.0) > 1e-10:
        raise ValueError(f"isometry changed the norm to {n!r}")
    return Ket(V.target, out / n)


def heisenberg(family: ProjectorFamily, V: Isometry) -> ProjectorFamily:
    """Pull ``family`` back through ``V``: members become V† π V."""
    _same_space(family.space, V.target)
    Vm = V.matrix
    return ProjectorFamily(V.source, {label: Vm.conj().T @ m @ Vm for label, m in family.members.items()})


def weight(pi: np.ndarray, psi: Ket) -> float:
    """Born weight ⟨ψ|π|ψ⟩.

    Equal to ‖πψ‖² whenever π is a projector, and still the correct outcome
    probability when π is an effect pulled back through an isometry.
    """
    if psi.zero:
        raise ValueError("Born weight of the zero ket is undefined")
    pi = np.asarray(pi)
    if pi.shape != (psi.space.dim, psi.space.dim):
        raise SpaceMismatch(f"operator of shape {pi.shape} does not act on {psi.space}")
    w = float(np.real(np.vdot(psi.amps, pi @ psi.amps)))
    # clamp rounding noise into [0, 1]
    if -EPS < w < 0.0:
        w = 0.0
    elif 1.0 < w < 1.0 + EPS:
        w = 1.0
    return w


def certain_weight(pi: np.ndarray, psi: Ket) -> float:
    """Like :func:`weight` but the zero ket has weight 0 for every outcome."""
    if psi.zero:
        return 0.0
    return weight(pi, psi)


def collapse(pi: np.ndarray, psi: Ket, eps: float = EPS) -> Ket:
    """πψ/‖πψ‖.  Raises :class:`ImpossibleBranch` when the weight is ≤ eps."""
    w = weight(pi, psi)
    if w <= eps:
        raise ImpossibleBranch(f"outcome has Born weight {w:.3g}")
    out = np.asarray(pi) @ psi.amps
    return Ket(psi.space, out / np.linalg.norm(out))


@dataclass(frozen=True)
class FamilyReport:
    """Maximal deviations of each family invariant."""

    self_adjoint: float
    idempotent: float
    orthogonal: float
    completeness: float
    positivity: float
    tol: float = EPS

    @property
    def violations(self) -> list[str]:
        out = []
        for name in ("self_adjoint", "idempotent", "orthogonal", "completeness", "positivity"):
            if getattr(self, name) > self.tol:
                out.append(name)
        return out

    @property
    def is_projective(self) -> bool:
        return not self.violations

    @property
    def is_effect_family(self) -> bool:
        """Valid as a complete set of effects (POVM)."""
        return all(
            getattr(self, name) <= self.tol for name in ("self_adjoint", "completeness", "positivity")
        )

    @property
    def valid(self) -> bool:
        return self.is_projective

    def as_dict(self) -> dict[str, Any]:
        return {
            "self_adjoint": self.self_adjoint,
            "idempotent": self.idempotent,
            "orthogonal": self.orthogonal,
            "completeness": self.completeness,
            "positivity": self.positivity,
            "violations": self.violations,
        }


def validate_family(family: ProjectorFamily, tol: float = EPS) -> FamilyReport:
    dim = family.space.dim
    ms = list(family.members.values())
    total = sum(ms, np.zeros((dim, dim), dtype=complex))
    sa = max((float(np.max(np.abs(m - m.conj().T))) for m in ms), default=0.0)
    idem = max((float(np.max(np.abs(m @ m - m))) for m in ms), default=0.0)
    orth = max((float(np.max(np.abs(a @ b))) for a, b in combinations(ms, 2)), default=0.0)
    comp = float(np.max(np.abs(total - np.eye(dim))))
    pos = 0.0
    for m in ms:
        herm = (m + m.conj().T) / 2
        pos = max(pos, float(-min(0.0, np.min(np.linalg.eigvalsh(herm)))))
    return FamilyReport(sa, idem, orth, comp, pos, tol)
