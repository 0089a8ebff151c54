"""The Extended Wigner's Friend protocol: states, lab isometries and views.

Round structure (ticks are minutes within round ``n``)::

    n:00  F1 reads the quantum coin C, gets r ∈ {head, tail}
    n:10  F1 prepares S in |↓⟩ (head) or |→⟩ (tail)
    n:20  F2 measures S in {|↓⟩, |↑⟩}, gets z ∈ {-1/2, +1/2}
    n:30  A measures F1's lab in {|ok⟩, |fail⟩}, gets x
    n:40  W measures F2's lab in {|ok⟩, |fail⟩}, gets w
    n:50  halt if x = w = ok

Labs are modelled as two-level systems spanned by their post-measurement
states, so F1's measurement of the coin and F2's measurement of the spin are
the isometries ``V: C → F1⊗S`` and ``U: S → F2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .quantum import (
    EPS,
    SUM_EPS,
    Isometry,
    Ket,
    ProjectorFamily,
    Space,
    apply,
    heisenberg,
    kron,
    projector,
    tensor,
    weight,
)

HEAD, TAIL = "head", "tail"
DOWN, UP, RIGHT, ZERO = "down", "up", "right", "zero"
MINUS, PLUS = "-1/2", "+1/2"
OK, FAIL = "ok", "fail"
PSI0 = "psi0"

VIEWS = ("F1", "F2", "A", "W")
HALT_PAIR = (OK, OK)

SPACE_C = Space.named("C", (HEAD, TAIL))
SPACE_S = Space.named("S", (DOWN, UP))
SPACE_F1 = Space.named("F1", (HEAD, TAIL))
SPACE_F2 = Space.named("F2", (MINUS, PLUS))

R_VALUES = (HEAD, TAIL)
Z_VALUES = (MINUS, PLUS)
X_VALUES = (OK, FAIL)
W_VALUES = (OK, FAIL)

# state F1 prepares for each coin value
SPIN_FOR_R = {HEAD: DOWN, TAIL: RIGHT}
# F2's outcome for each spin basis state
Z_FOR_SPIN = {DOWN: MINUS, UP: PLUS}

_H = math.sqrt(0.5)

RATIONAL_TAGS = tuple(
    Fraction(*p) for p in ((0, 1), (1, 1), (1, 12), (1, 6), (2, 3), (3, 4), (1, 2), (1, 3))
)


class ProtocolError(ValueError):
    """Protocol configuration document is malformed or physically invalid."""


def spin_states() -> dict[str, Ket]:
    return {
        DOWN: Ket.basis(SPACE_S, DOWN),
        UP: Ket.basis(SPACE_S, UP),
        RIGHT: Ket.from_amplitudes(SPACE_S, {DOWN: _H, UP: _H}),
        ZERO: Ket.null(SPACE_S),
    }


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    coin_state: Ket
    V: Isometry
    U: Isometry
    f1_basis: Mapping[str, Ket]
    f2_basis: Mapping[str, Ket]
    spins: Mapping[str, Ket] = field(default_factory=spin_states)
    halt_pair: tuple[str, str] = HALT_PAIR

    @property
    def coin_amplitudes(self) -> tuple[float, float]:
        return tuple(float(np.real(a)) for a in self.coin_state.amps)  # type: ignore[return-value]

    def catalog(self, space: str) -> dict[str, Ket]:
        """Named states an event may carry for the given system."""
        if space == "S":
            return dict(self.spins)
        if space == "C":
            return {
                PSI0: self.coin_state,
                HEAD: Ket.basis(SPACE_C, HEAD),
                TAIL: Ket.basis(SPACE_C, TAIL),
                ZERO: Ket.null(SPACE_C),
            }
        raise KeyError(space)

    def global_state(self) -> Ket:
        """UVψ⁰_C on F1⊗F2."""
        return apply(self.UV, self.coin_state)

    @property
    def UV(self) -> Isometry:
        U_on_product = Isometry(
            SPACE_F1 * SPACE_S, SPACE_F1 * SPACE_F2, kron(np.eye(2), self.U.matrix)
        )
        return U_on_product.compose(self.V)


def _basis_kets(space: Space, vecs: Mapping[str, Any], labels=(OK, FAIL)) -> dict[str, Ket]:
    try:
        kets = {lab: Ket.from_amplitudes(space, [complex(a) for a in vecs[lab]]) for lab in labels}
    except KeyError as e:
        raise ProtocolError(f"basis for {space} is missing vector {e.args[0]!r}") from None
    except ValueError as e:
        raise ProtocolError(f"basis for {space}: {e}") from None
    ov = abs(kets[labels[0]].inner(kets[labels[1]]))
    if ov > 1e-9:
        raise ProtocolError(f"basis for {space} is not orthonormal (overlap {ov:.3g})")
    return kets


def build_protocol(
    coin: tuple[float, float] | None = None,
    f1_basis: Mapping[str, Any] | None = None,
    f2_basis: Mapping[str, Any] | None = None,
    tolerance: float = 1e-9,
) -> ProtocolSpec:
    """Canonical protocol, optionally with the coin state or A/W bases overridden."""
    if coin is None:
        coin = (math.sqrt(1 / 3), math.sqrt(2 / 3))
    if len(coin) != 2:
        raise ProtocolError("coin needs exactly two amplitudes (head, tail)")
    norm = math.hypot(*(abs(complex(a)) for a in coin))
    if abs(norm - 1.0) > tolerance:
        raise ProtocolError(f"coin state is not normalized (norm {norm:.6g})")
    coin_amps = np.asarray([complex(a) for a in coin]) / norm
    coin_state = Ket(SPACE_C, coin_amps)

    f1 = _basis_kets(SPACE_F1, f1_basis or {OK: (_H, -_H), FAIL: (_H, _H)})
    f2 = _basis_kets(SPACE_F2, f2_basis or {OK: (_H, -_H), FAIL: (_H, _H)})

    spins = spin_states()
    V = Isometry.from_images(
        SPACE_C,
        SPACE_F1 * SPACE_S,
        {
            HEAD: tensor(Ket.basis(SPACE_F1, HEAD), spins[DOWN]),
            TAIL: tensor(Ket.basis(SPACE_F1, TAIL), spins[RIGHT]),
        },
    )
    U = Isometry.from_images(
        SPACE_S,
        SPACE_F2,
        {DOWN: Ket.basis(SPACE_F2, MINUS), UP: Ket.basis(SPACE_F2, PLUS)},
    )
    return ProtocolSpec(coin_state, V, U, f1, f2, spins)


# ---------------------------------------------------------------------------
# configuration documents


def protocol_to_document(spec: ProtocolSpec) -> dict[str, Any]:
    def real_pair(k: Ket) -> list[float]:
        return [float(np.real(a)) for a in k.amps]

    return {
        "coin": real_pair(spec.coin_state),
        "f1_basis": {lab: real_pair(spec.f1_basis[lab]) for lab in (OK, FAIL)},
        "f2_basis": {lab: real_pair(spec.f2_basis[lab]) for lab in (OK, FAIL)},
    }


def protocol_from_document(doc: Mapping[str, Any], tolerance: float = 1e-9) -> ProtocolSpec:
    if not isinstance(doc, Mapping):
        raise ProtocolError("protocol document must be a JSON object")
    unknown = set(doc) - {"coin", "f1_basis", "f2_basis"}
    if unknown:
        raise ProtocolError(f"unknown protocol fields: {sorted(unknown)}")

    def pair(v: Any, what: str) -> tuple[float, float]:
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise ProtocolError(f"{what} must be a pair of real numbers")
        try:
            return float(v[0]), float(v[1])
        except (TypeError, ValueError):
            raise ProtocolError(f"{what} must be a pair of real numbers") from None

    coin = pair(doc["coin"], "coin") if "coin" in doc else None
    bases = {}
    for key in ("f1_basis", "f2_basis"):
        if key in doc:
            b = doc[key]
            if not isinstance(b, Mapping):
                raise ProtocolError(f"{key} must map 'ok'/'fail' to amplitude pairs")
            bases[key] = {lab: pair(b.get(lab), f"{key}.{lab}") for lab in (OK, FAIL)}
    return build_protocol(coin, bases.get("f1_basis"), bases.get("f2_basis"), tolerance)


def load_protocol(path: str | Path | None = None, tolerance: float = 1e-9) -> ProtocolSpec:
    """Read a protocol document from ``path``; ``None`` gives the canonical protocol."""
    if path is None:
        return build_protocol()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ProtocolError(f"cannot read protocol file {path}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise ProtocolError(f"protocol file {path} is not valid JSON: {e}") from None
    return protocol_from_document(doc, tolerance)


# ---------------------------------------------------------------------------
# views


@dataclass(frozen=True, eq=False)
class ViewBinding:
    """How one experimenter's plot maps onto a repeated measurement experiment.

    ``time_map`` sends minutes of a protocol round to RME minutes (0 prepare,
    1 measure, 2 halt).  ``kinds`` says what each mapped tick contributes:
    ``direct`` (event carries state and outcome as is), ``prep`` (state only),
    ``full`` (complete outcome pair) or ``partial0``/``partial1`` (one slot of
    the outcome pair, the other existentially quantified).
    """

    view: str
    space: str
    projectors: ProjectorFamily
    time_map: Mapping[int, int]
    kinds: Mapping[int, str]
    states: Mapping[str, Ket]

    def rme_minute(self, minute: int) -> int | None:
        return self.time_map.get(minute)


def _pi_h_w(spec: ProtocolSpec) -> dict[str, np.ndarray]:
    fam = ProjectorFamily.from_basis(spec.f2_basis)
    return dict(heisenberg(fam, spec.U).members)


def _pi_z(spec: ProtocolSpec) -> dict[str, np.ndarray]:
    return {Z_FOR_SPIN[s]: projector(spec.spins[s]) for s in (DOWN, UP)}


def view_binding(spec: ProtocolSpec, view: str) -> ViewBinding:
    if view == "F1":
        fam = ProjectorFamily(SPACE_S, _pi_h_w(spec))
        return ViewBinding("F1", "S", fam, {10: 0, 40: 1, 50: 2}, dict.fromkeys((10, 40, 50), "direct"), spec.catalog("S"))
    if view == "F2":
        fam = ProjectorFamily(SPACE_S, _pi_z(spec))
        return ViewBinding("F2", "S", fam, {10: 0, 20: 1, 40: 2}, dict.fromkeys((10, 20, 40), "direct"), spec.catalog("S"))
    if view == "A":
        members = {}
        for z in Z_VALUES:
            spin = DOWN if z == MINUS else UP
            for x in X_VALUES:
                members[(z, x)] = kron(projector(spec.f1_basis[x]), projector(spec.spins[spin]))
        fam = heisenberg(ProjectorFamily(SPACE_F1 * SPACE_S, members), spec.V)
        return ViewBinding(
            "A", "C", fam,
            {0: 0, 10: 0, 20: 1, 30: 1, 40: 1},
            {0: "prep", 10: "prep", 20: "partial0", 30: "full", 40: "partial1"},
            spec.catalog("C"),
        )
    if view == "W":
        pw = _pi_h_w(spec)
        members = {
            (x, w): kron(projector(spec.f1_basis[x]), pw[w]) for x in X_VALUES for w in W_VALUES
        }
        fam = heisenberg(ProjectorFamily(SPACE_F1 * SPACE_S, members), spec.V)
        return ViewBinding(
            "W", "C", fam,
            {0: 0, 10: 0, 20: 0, 30: 1, 40: 1},
            {0: "prep", 10: "prep", 20: "prep", 30: "partial0", 40: "full"},
            spec.catalog("C"),
        )
    raise ValueError(f"unknown view {view!r}; expected one of {VIEWS}")


def prepared_state(spec: ProtocolSpec, view: str, r: str | None = None) -> Ket:
    if view in ("A", "W"):
        return spec.coin_state
    if r not in R_VALUES:
        raise ValueError(f"view {view} needs r in {R_VALUES}, got {r!r}")
    return spec.spins[SPIN_FOR_R[r]]


def view_distribution(spec: ProtocolSpec, view: str, r: str | None = None) -> dict[Any, float]:
    """Exact outcome probabilities of ``view``.

    A and W are evaluated on ψ⁰_C.  F1 and F2 are evaluated on the spin state
    prepared for coin value ``r``; without ``r`` the result is the joint
    distribution of ``(r, outcome)`` with r drawn from the coin.
    """
    b = view_binding(spec, view)
    if view in ("A", "W"):
        if r is not None:
            raise ValueError(f"view {view} is prepared in ψ⁰_C; r does not apply")
        return b.projectors.weights(spec.coin_state)
    if r is not None:
        return b.projectors.weights(prepared_state(spec, view, r))
    coin = coin_distribution(spec)
    out = {}
    for rv in R_VALUES:
        for o, p in b.projectors.weights(prepared_state(spec, view, rv)).items():
            out[(rv, o)] = coin[rv] * p
    return out


def coin_distribution(spec: ProtocolSpec) -> dict[str, float]:
    return {lab: abs(spec.coin_state.amplitude(lab)) ** 2 for lab in R_VALUES}


def rational_tag(p: float, tol: float = EPS) -> str | None:
    for q in RATIONAL_TAGS:
        if abs(p - float(q)) <= tol:
            return str(q)
    return None


def check_distribution(dist: Mapping[Any, float]) -> float:
    """Deviation of the total from 1; raises if beyond ``SUM_EPS``."""
    dev = abs(sum(dist.values()) - 1.0)
    if dev > SUM_EPS:
        raise ValueError(f"distribution sums to {1 + dev:.15g}")
    return dev


# ---------------------------------------------------------------------------
# certainty lemmas


@dataclass(frozen=True)
class CertaintyFact:
    name: str
    tag: str
    premise: str
    conclusion: str
    weight: float
    requirement: str  # "=1", "=0" or ">0"
    rule: str

    @property
    def holds(self) -> bool:
        if self.requirement == "=1":
            return abs(self.weight - 1.0) <= EPS
        if self.requirement == "=0":
            return abs(self.weight) <= EPS
        return self.weight > EPS

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "justification": self.tag,
            "premise": self.premise,
            "conclusion": self.conclusion,
            "weight": self.weight,
            "requirement": self.requirement,
            "rule": self.rule,
            "holds": self.holds,
        }


def certainty_facts(spec: ProtocolSpec) -> list[CertaintyFact]:
    """The four single-view implications, each with the Born weight behind it.

    Weights are computed directly from the lab isometries (Schrödinger
    picture), independently of :func:`view_binding`.
    """
    spins = spec.spins
    # L1: U|→⟩ lies along |fail⟩_F2
    l1 = abs(spec.f2_basis[FAIL].inner(apply(spec.U, spins[RIGHT]))) ** 2
    # L2: |↓⟩ never gives z = +1/2
    l2 = abs(Ket.basis(SPACE_F2, PLUS).inner(apply(spec.U, spins[DOWN]))) ** 2
    # L3: Vψ⁰ has no component along |ok⟩_F1 ⊗ |↓⟩_S
    v_psi = apply(spec.V, spec.coin_state)
    l3 = abs(tensor(spec.f1_basis[OK], spins[DOWN]).inner(v_psi)) ** 2
    # L4: overlap of UVψ⁰ with |ok⟩_F1 ⊗ |ok⟩_F2
    l4 = abs(tensor(spec.f1_basis[OK], spec.f2_basis[OK]).inner(spec.global_state())) ** 2
    return [
        CertaintyFact(
            "L1", "Eq23", "(n:10, r=tail, *, *) ∈ s^F1", "(n:40, *, *, w=fail) ∈ s^F1", l1, "=1", "qt_b"
        ),
        CertaintyFact(
            "L2", "Eq24", "(n:20, *, *, z=+1/2) ∈ s^F2", "(n:10, r=tail, *, *) ∈ s^F2", l2, "=0", "qt_a"
        ),
        CertaintyFact(
            "L3", "Eq27", "(n:40, *, *, x=ok) ∈ s^A", "(n:20, *, z=+1/2, *) ∈ s^A", l3, "=0", "qt_a"
        ),
        CertaintyFact(
            "L4", "Eq30", "s^W defined", "(n:40, *, x=ok, w=ok) ∈ s^W for some n", l4, ">0", "qt_c"
        ),
    ]
