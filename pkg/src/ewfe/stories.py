"""Stories, plots and the rules a theory uses to forbid them.

A plot is a finite set of events for one experimenter's view.  Events carry a
:class:`TimeStamp` and a payload whose channels depend on the view::

    F1   (r, psi, w)        F2   (r, psi, z)
    A    (psi, z, x)        W    (psi, x, w)
    RME  (psi, outcome)

``None`` is ⊥ (nothing recorded) and :data:`ANY` is the wildcard used in
patterns.  States are catalog labels (``down``, ``up``, ``right``, ``zero`` on
S; ``psi0``, ``head``, ``tail``, ``zero`` on C); state fields hold the prepared
state, Heisenberg style.

The checks here return violation lists rather than raising; a story is
forbidden as soon as any enabled rule reports something.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterable, Mapping, Sequence

from .protocol import (
    FAIL,
    HALT_PAIR,
    HEAD,
    MINUS,
    OK,
    PLUS,
    PSI0,
    R_VALUES,
    SPIN_FOR_R,
    TAIL,
    VIEWS,
    X_VALUES,
    Z_VALUES,
    ProtocolSpec,
    ViewBinding,
    view_binding,
)
from .quantum import EPS, Ket, ProjectorFamily, certain_weight


class _Any:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "*"

    def __reduce__(self):
        return (_Any, ())


ANY = _Any()

PROTOCOL_MINUTES = (0, 10, 20, 30, 40, 50)
RME_MINUTES = (0, 1, 2)
REPEATED_MINUTES = (0, 10, 20, 30, 40)

CHANNELS = {
    "F1": ("r", "psi", "w"),
    "F2": ("r", "psi", "z"),
    "A": ("psi", "z", "x"),
    "W": ("psi", "x", "w"),
    "RME": ("psi", "outcome"),
}

STATE_LABELS = {"S": ("down", "up", "right", "zero"), "C": (PSI0, HEAD, TAIL, "zero")}
_VIEW_SPACE = {"F1": "S", "F2": "S", "A": "C", "W": "C"}
_ALPHABET = {"r": R_VALUES, "z": Z_VALUES, "x": X_VALUES, "w": (OK, FAIL)}


class MalformedPattern(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TimeStamp:
    n: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 0 or not 0 <= self.m <= 59:
            raise ValueError(f"invalid time {self.n}:{self.m}")

    @classmethod
    def parse(cls, s: str | "TimeStamp") -> "TimeStamp":
        if isinstance(s, TimeStamp):
            return s
        try:
            n, m = s.split(":")
            return cls(int(n), int(m))
        except (AttributeError, ValueError):
            raise ValueError(f"cannot parse time {s!r}") from None

    def __str__(self) -> str:
        return f"{self.n}:{self.m:02d}"


def _as_time(t: Any) -> TimeStamp:
    return TimeStamp.parse(t) if isinstance(t, str) else t


@dataclass(frozen=True, order=True)
class Event:
    view: str
    t: TimeStamp
    values: tuple

    def __post_init__(self) -> None:
        if self.view not in CHANNELS:
            raise ValueError(f"unknown view {self.view!r}")
        if len(self.values) != len(CHANNELS[self.view]):
            raise ValueError(f"{self.view} events carry {CHANNELS[self.view]}, got {self.values!r}")

    def __getitem__(self, channel: str) -> Any:
        return self.values[CHANNELS[self.view].index(channel)]

    def __str__(self) -> str:
        vals = ", ".join("⊥" if v is None else str(v) for v in self.values)
        return f"({self.t}, {vals})"


def event(view: str, t: str | TimeStamp, *values: Any) -> Event:
    values = tuple(tuple(v) if isinstance(v, list) else v for v in values)
    return Event(view, _as_time(t), values)


@dataclass(frozen=True)
class Plot:
    view: str
    events: frozenset[Event] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", frozenset(self.events))
        for e in self.events:
            if e.view != self.view:
                raise ValueError(f"{e.view} event in a {self.view} plot")

    @classmethod
    def of(cls, view: str, *events: Event | tuple) -> "Plot":
        evs = [e if isinstance(e, Event) else event(view, *e) for e in events]
        return cls(view, frozenset(evs))

    def __iter__(self):
        return iter(sorted(self.events, key=_event_sort_key))

    def __len__(self) -> int:
        return len(self.events)

    def __contains__(self, e: Event) -> bool:
        return e in self.events

    def __or__(self, other: "Plot") -> "Plot":
        if other.view != self.view:
            raise ValueError("cannot merge plots of different views")
        return Plot(self.view, self.events | other.events)

    def rounds(self) -> list[int]:
        return sorted({e.t.n for e in self.events})

    def at(self, n: int, m: int) -> list[Event]:
        return [e for e in self.events if e.t.n == n and e.t.m == m]


@dataclass(frozen=True)
class Story:
    """One optional plot per view, plus the observation horizon in rounds.

    A story that reaches ``horizon`` rounds without halting is truncated: the
    rounds it would still owe are not demanded of it.
    """

    plots: Mapping[str, Plot | None] = field(default_factory=dict)
    horizon: int | None = None

    def __post_init__(self) -> None:
        plots = {v: self.plots.get(v) for v in VIEWS}
        for v, p in plots.items():
            if p is not None and p.view != v:
                raise ValueError(f"plot for {v} has view {p.view}")
        object.__setattr__(self, "plots", plots)

    def __getitem__(self, view: str) -> Plot | None:
        return self.plots[view]

    @property
    def complete(self) -> bool:
        return all(p is not None for p in self.plots.values())

    def __hash__(self) -> int:
        return hash((tuple(self.plots[v] for v in VIEWS), self.horizon))


@dataclass(frozen=True)
class TheoryRuleSet:
    qt_a: bool = True
    qt_b: bool = True
    qt_c: bool = True
    sw: bool = True
    compat_16: bool = True
    compat_17: bool = True
    compat_18: bool = True
    compat_19: bool = True
    repetition: bool = True

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def without(self, *names: str) -> "TheoryRuleSet":
        for n in names:
            if n not in self.names():
                raise KeyError(f"unknown rule {n!r}")
        return replace(self, **{n: False for n in names})

    def as_dict(self) -> dict[str, bool]:
        return {n: getattr(self, n) for n in self.names()}

    @property
    def disabled(self) -> list[str]:
        return [n for n in self.names() if not getattr(self, n)]


ABLATABLE = ("qt_a", "qt_b", "qt_c", "sw", "compat_16", "compat_17", "compat_18", "compat_19")

COMPAT = {
    "C16": ("compat_16", "F1", "W"),
    "C17": ("compat_17", "F1", "F2"),
    "C18": ("compat_18", "F2", "A"),
    "C19": ("compat_19", "A", "W"),
}


@dataclass(frozen=True)
class Violation:
    rule: str
    view: str | None = None
    round: int | None = None
    outcome: Any = None
    detail: str = ""

    def __str__(self) -> str:
        where = f"{self.view or ''}" + (f" round {self.round}" if self.round is not None else "")
        return f"[{self.rule}] {where}: {self.detail}".strip()


# ---------------------------------------------------------------------------
# pattern matching


def _value_matches(pat: Any, val: Any) -> bool:
    if pat is ANY:
        return True
    if isinstance(pat, tuple):
        return (
            isinstance(val, tuple)
            and len(val) == len(pat)
            and all(_value_matches(p, v) for p, v in zip(pat, val))
        )
    return pat == val


def match(plot: Plot, pattern: Sequence[Any]) -> bool:
    """True iff some event agrees with ``pattern`` outside its wildcards.

    ``pattern`` is ``(t, v1, v2, ...)`` with the view's channel arity; ``t``
    may be a :class:`TimeStamp`, ``"n:mm"`` or :data:`ANY`.
    """
    arity = len(CHANNELS[plot.view])
    if not isinstance(pattern, (tuple, list)) or len(pattern) != arity + 1:
        raise MalformedPattern(f"{plot.view} patterns need a time and {arity} values, got {pattern!r}")
    t = pattern[0]
    if t is not ANY:
        try:
            t = _as_time(t)
        except ValueError as e:
            raise MalformedPattern(str(e)) from None
        if not isinstance(t, TimeStamp):
            raise MalformedPattern(f"bad time in pattern: {pattern[0]!r}")
    vals = tuple(tuple(v) if isinstance(v, list) else v for v in pattern[1:])
    for e in plot.events:
        if t is not ANY and e.t != t:
            continue
        if all(_value_matches(p, v) for p, v in zip(vals, e.values)):
            return True
    return False


# ---------------------------------------------------------------------------
# views → repeated measurement experiments


def unmapped_events(plot: Plot, binding: ViewBinding) -> list[Event]:
    """Events at ticks the binding's time map has no image for."""
    return sorted((e for e in plot.events if e.t.m not in binding.time_map), key=_event_sort_key)


def to_rme(plot: Plot, binding: ViewBinding) -> Plot:
    """Image of a view plot in its repeated measurement experiment.

    Ticks outside the time map have no image (see :func:`unmapped_events`).
    Ticks that only pin one slot of an outcome pair are existential
    constraints, checked by :func:`binding_check`, and produce no event.
    """
    if plot.view != binding.view:
        raise ValueError(f"{plot.view} plot cannot use the {binding.view} binding")
    out = set()
    for e in plot.events:
        m = binding.time_map.get(e.t.m)
        if m is None:
            continue
        kind = binding.kinds[e.t.m]
        t = TimeStamp(e.t.n, m)
        if kind == "direct":
            out.add(Event("RME", t, (e["psi"], e.values[2])))
        elif kind == "prep":
            out.add(Event("RME", t, (e["psi"], None)))
        elif kind == "full":
            a, b = e.values[1], e.values[2]
            if a is not None and b is not None:
                out.add(Event("RME", t, (e["psi"], (a, b))))
    return Plot("RME", frozenset(out))


def binding_check(plot: Plot, binding: ViewBinding) -> list[Violation]:
    """Biconditionals tying a view plot to its RME image, tick by tick."""
    if binding.view in ("F1", "F2"):
        return []
    out = []
    by_round: dict[int, list[Event]] = defaultdict(list)
    for e in plot.events:
        by_round[e.t.n].append(e)
    for n, evs in sorted(by_round.items()):
        kinds = binding.kinds
        prep = [m for m, k in kinds.items() if k == "prep"]
        prep_sets = {m: {e["psi"] for e in evs if e.t.m == m} for m in prep}
        union = set().union(*prep_sets.values())
        for m, s in prep_sets.items():
            if s != union:
                out.append(Violation("binding", binding.view, n, None, f"prepared states at {n}:{m:02d} differ from round {n}"))
        full_m = next(m for m, k in kinds.items() if k == "full")
        full = {
            (e["psi"], (e.values[1], e.values[2]))
            for e in evs
            if e.t.m == full_m and e.values[1] is not None and e.values[2] is not None
        }
        for m, k in kinds.items():
            if not k.startswith("partial"):
                continue
            slot = int(k[-1])
            seen = {(e["psi"], e.values[1 + slot]) for e in evs if e.t.m == m and e.values[1 + slot] is not None}
            implied = {(psi, pair[slot]) for psi, pair in full}
            if seen != implied:
                out.append(
                    Violation("binding", binding.view, n, None, f"outcomes at {n}:{m:02d} disagree with the full record at {n}:{full_m:02d}")
                )
    return out


# ---------------------------------------------------------------------------
# quantum theory, single world, compatibility, repetition


def _rme_rounds(rme: Plot) -> tuple[dict[int, set], dict[int, set], dict[int, bool]]:
    psis: dict[int, set] = defaultdict(set)
    outs: dict[int, set] = defaultdict(set)
    has: dict[int, set] = defaultdict(set)
    for e in rme.events:
        has[e.t.n].add(e.t.m)
        if e.t.m == 0:
            psis[e.t.n].add(e["psi"])
        elif e.t.m == 1 and e["outcome"] is not None:
            outs[e.t.n].add(e["outcome"])
    return psis, outs, has


def repetition_holds(rme: Plot, zhat: Any, horizon: int | None = None) -> bool:
    """Whether the RME was repeated until ``zhat``: every round following one
    that recorded some other outcome has both its ticks.  Rounds at or past
    ``horizon`` are not demanded."""
    _, outs, has = _rme_rounds(rme)
    last = max(has, default=-1)
    for n in range(last + 2):
        premise = n == 0 or any(o != zhat for o in outs.get(n - 1, ()))
        if not premise or (horizon is not None and n >= horizon):
            continue
        if not {0, 1} <= has.get(n, set()):
            return False
    return True


def qt_check(
    rme: Plot,
    projectors: ProjectorFamily,
    zhat: Any = None,
    *,
    states: Mapping[str, Ket],
    horizon: int | None = None,
    eps: float = EPS,
) -> list[Violation]:
    """Quantum-theory rules (a), (b), (c) on an RME plot.

    (a) every prepared state gives ``zhat`` weight 0 yet it is recorded;
    (b) some prepared state gives it weight 1 yet it is missing;
    (c) the experiment is repeated with one fixed state of non-zero weight
    and ``zhat`` never shows up.
    """
    outcomes = projectors.outcomes if zhat is None else (zhat,)
    psis, outs, has = _rme_rounds(rme)
    rounds = sorted(has)
    out = []

    def w(label: str, z: Any) -> float:
        return certain_weight(projectors[z], states[label])

    for z in outcomes:
        for n in rounds:
            present = z in outs.get(n, ())
            ws = [w(p, z) for p in psis.get(n, ())]
            if present and all(x <= eps for x in ws):
                out.append(Violation("a", None, n, z, f"outcome {z} recorded but has weight 0"))
            if not present and any(abs(x - 1.0) <= eps for x in ws):
                out.append(Violation("b", None, n, z, f"outcome {z} certain but not recorded"))
        if not rounds:
            continue
        fixed = {frozenset(psis.get(n, ())) for n in range(rounds[-1] + 1)}
        if len(fixed) != 1:
            continue
        (only,) = fixed
        if len(only) != 1:
            continue
        (psi,) = only
        if w(psi, z) <= eps:
            continue
        if any(z in outs.get(n, ()) for n in rounds):
            continue
        if repetition_holds(rme, z, horizon):
            out.append(Violation("c", None, None, z, f"repeated on fixed {psi} but {z} never occurs"))
    return out


def sw_check(rme: Plot, n: int = 0) -> bool:
    """At most one recorded outcome at ``n:01``."""
    outs = {e["outcome"] for e in rme.events if e.t == TimeStamp(n, 1) and e["outcome"] is not None}
    return len(outs) <= 1


def _compat_keys(plot: Plot, channels: tuple[str, ...]) -> set:
    keys = set()
    for e in plot.events:
        vals = tuple(e[c] for c in channels)
        # the shared outcome channel is the last one; ⊥ is not compared
        if vals[-1] is None:
            continue
        keys.add((e.t,) + vals)
    return keys


_COMPAT_CHANNELS = {
    "C16": (("w",), ("w",)),
    "C17": (("r",), ("r",)),
    "C18": (("z",), ("z",)),
    "C19": (("psi", "x"), ("psi", "x")),
}


def compat_check(story: Story) -> list[str]:
    """Identifiers of violated compatibility constraints (C16..C19).

    A constraint is only evaluated when both of its plots are defined.
    """
    out = []
    for cid, (_, left, right) in COMPAT.items():
        p, q = story[left], story[right]
        if p is None or q is None:
            continue
        lc, rc = _COMPAT_CHANNELS[cid]
        if _compat_keys(p, lc) != _compat_keys(q, rc):
            out.append(cid)
    return out


def _w_outcomes(w_plot: Plot, n: int) -> set:
    return {
        (e["x"], e["w"])
        for e in w_plot.at(n, 40)
        if e["x"] is not None and e["w"] is not None
    }


def halts_in(w_plot: Plot, n: int) -> bool:
    """Round ``n`` recorded only x = w = ok: the experiment stops there."""
    return _w_outcomes(w_plot, n) == {HALT_PAIR}


def repetition_check(w_plot: Plot, horizon: int | None = None) -> bool:
    """W's plot is repeated until it halts, and not beyond.

    Round 0 and every round after one with a non-halting record must have all
    ticks n:00..n:40 (rounds at or past ``horizon`` excepted); conversely a
    round may only follow a round with a non-halting record.
    """
    if w_plot.view != "W":
        raise ValueError("repetition is a property of W's plot")
    present = set(w_plot.rounds())
    last = max(present, default=-1)
    for n in range(last + 2):
        premise = n == 0 or any(o != HALT_PAIR for o in _w_outcomes(w_plot, n - 1))
        if premise and (horizon is None or n < horizon):
            ticks = {e.t.m for e in w_plot.events if e.t.n == n}
            if not set(REPEATED_MINUTES) <= ticks:
                return False
        if n in present and not premise:
            return False
    return True


def event_space_check(plot: Plot) -> list[Violation]:
    """Structural constraints of each view's event space."""
    out = []
    view = plot.view
    for e in plot.events:
        minutes = RME_MINUTES if view == "RME" else PROTOCOL_MINUTES
        if e.t.m not in minutes:
            out.append(Violation("event-space", view, e.t.n, None, f"{e} is not at a protocol tick"))
        if view == "RME":
            continue
        for ch, val in zip(CHANNELS[view], e.values):
            if ch == "psi":
                if val not in STATE_LABELS[_VIEW_SPACE[view]]:
                    out.append(Violation("event-space", view, e.t.n, None, f"{e}: unknown state {val!r}"))
            elif val is not None and val not in _ALPHABET[ch]:
                out.append(Violation("event-space", view, e.t.n, None, f"{e}: {ch}={val!r} outside its alphabet"))
        if view in ("F1", "F2") and e.t.m == 10:
            r, psi = e["r"], e["psi"]
            if (r == HEAD) != (psi == SPIN_FOR_R[HEAD]) or (r == TAIL) != (psi == SPIN_FOR_R[TAIL]):
                out.append(Violation("event-space", view, e.t.n, None, f"{e}: r and ψ_S disagree at n:10"))
        if view in ("A", "W") and e.t.m == 0 and e["psi"] != PSI0:
            out.append(Violation("event-space", view, e.t.n, None, f"{e}: ψ_C at n:00 must be psi0"))
    return out


# ---------------------------------------------------------------------------
# whole-story evaluation


def bindings_for(spec: ProtocolSpec) -> dict[str, ViewBinding]:
    return {v: view_binding(spec, v) for v in VIEWS}


def is_truncated(story: Story) -> bool:
    """Reached its horizon without halting in the last round."""
    w = story["W"]
    if story.horizon is None or w is None:
        return False
    rounds = w.rounds()
    return bool(rounds) and rounds[-1] == story.horizon - 1 and not halts_in(w, rounds[-1])


def story_violations(
    story: Story,
    spec: ProtocolSpec,
    rules: TheoryRuleSet = TheoryRuleSet(),
    bindings: Mapping[str, ViewBinding] | None = None,
) -> list[Violation]:
    """Every enabled-rule violation of ``story``; empty means not forbidden.

    Event-space and binding well-formedness are always enforced.  Undefined
    plots skip every rule that mentions them.
    """
    bindings = bindings or bindings_for(spec)
    out: list[Violation] = []
    qt_horizon = story.horizon if is_truncated(story) else None
    enabled_qt = {k for k, on in (("a", rules.qt_a), ("b", rules.qt_b), ("c", rules.qt_c)) if on}
    for view in VIEWS:
        plot = story[view]
        if plot is None:
            continue
        b = bindings[view]
        out += event_space_check(plot)
        out += binding_check(plot, b)
        rme = to_rme(plot, b)
        for v in qt_check(rme, b.projectors, states=b.states, horizon=qt_horizon):
            if v.rule in enabled_qt:
                out.append(replace(v, rule=f"qt_{v.rule}", view=view))
        if view == "W" and rules.sw:
            for n in rme.rounds():
                if not sw_check(rme, n):
                    out.append(Violation("sw", "W", n, None, "more than one outcome at n:01"))
    for cid in compat_check(story):
        flag = COMPAT[cid][0]
        if getattr(rules, flag):
            out.append(Violation(flag, None, None, None, f"{cid} biconditional fails"))
    if rules.repetition and story["W"] is not None and not repetition_check(story["W"], story.horizon):
        out.append(Violation("repetition", "W", None, None, "not repeated until halting"))
    return out


# ---------------------------------------------------------------------------
# documents


def _jsonable(v: Any) -> Any:
    return list(v) if isinstance(v, tuple) else v


def _event_sort_key(e: Event) -> tuple:
    return (e.t.n, e.t.m, json.dumps([_jsonable(v) for v in e.values]))


def plot_to_document(plot: Plot) -> list[dict[str, Any]]:
    chans = CHANNELS[plot.view]
    return [
        {"t": str(e.t), **{c: _jsonable(v) for c, v in zip(chans, e.values)}}
        for e in sorted(plot.events, key=_event_sort_key)
    ]


def plot_from_document(view: str, doc: Iterable[Mapping[str, Any]]) -> Plot:
    chans = CHANNELS[view]
    evs = []
    for d in doc:
        missing = set(chans) - set(d)
        if missing or "t" not in d:
            raise ValueError(f"{view} event {d!r} lacks {sorted(missing | ({'t'} - set(d)))}")
        evs.append(event(view, d["t"], *(d[c] for c in chans)))
    return Plot(view, frozenset(evs))


def story_to_document(story: Story) -> dict[str, Any]:
    return {
        "horizon": story.horizon,
        "plots": {v: None if story[v] is None else plot_to_document(story[v]) for v in VIEWS},
    }


def story_from_document(doc: Mapping[str, Any]) -> Story:
    plots = doc.get("plots", {})
    unknown = set(plots) - set(VIEWS)
    if unknown:
        raise ValueError(f"unknown views {sorted(unknown)}")
    return Story(
        {v: None if plots.get(v) is None else plot_from_document(v, plots[v]) for v in VIEWS},
        doc.get("horizon"),
    )


# ---------------------------------------------------------------------------
# single spin measurement examples


def spin_z_family() -> ProjectorFamily:
    """{|↓⟩⟨↓|, |↑⟩⟨↑|} on S, labelled by z."""
    from .protocol import DOWN, SPACE_S, UP, spin_states
    from .quantum import projector

    s = spin_states()
    return ProjectorFamily(SPACE_S, {MINUS: projector(s[DOWN]), PLUS: projector(s[UP])})


def spin_example_plots() -> dict[str, Plot]:
    """Three one-shot stories about measuring z on a prepared spin.

    ``s1``: prepared |→⟩, saw -1/2.  ``s2``: prepared |↑⟩, saw -1/2.
    ``s1_branching``: prepared |→⟩, both outcomes recorded.
    """
    prep_right = ("0:00", "right", None)
    return {
        "s1": Plot.of("RME", prep_right, ("0:01", "zero", MINUS)),
        "s2": Plot.of("RME", ("0:00", "up", None), ("0:01", "zero", MINUS)),
        "s1_branching": Plot.of("RME", prep_right, ("0:01", "zero", MINUS), ("0:01", "zero", PLUS)),
    }
