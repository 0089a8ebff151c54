"""The no-go theorem, checked by deduction and by exhaustive search.

:func:`forward_chain` replays the ten-step argument from a halting round of
W back to a contradiction, recomputing every Born weight it leans on.
:func:`enumerate_stories` searches the bounded canonical story space and
:func:`ablate` shows that dropping any one rule lets some story through.

Canonical stories are built from round patterns.  A pattern fixes what each
view records in one round: F1 and F2 see one or both coin values, and the
single-valued channels shared by two views (w, r, z, x) carry one value each,
unless the compatibility rule that ties them is disabled, in which case each
view gets its own copy.
"""
from __future__ import annotations

import builtins
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from . import _kernels
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
    W_VALUES,
    X_VALUES,
    Z_VALUES,
    ProtocolSpec,
    certainty_facts,
    rational_tag,
    view_binding,
)
from .quantum import EPS, certain_weight
from .stories import (
    ABLATABLE,
    Event,
    Plot,
    Story,
    TheoryRuleSet,
    TimeStamp,
    Violation,
    bindings_for,
    story_violations,
)

WITNESS_CAP = 16
MAX_ENUM_ROUNDS = 6

R_SETS = (frozenset({HEAD}), frozenset({TAIL}), frozenset({HEAD, TAIL}))


class InternalInconsistencyError(RuntimeError):
    """Two independent computations of the same Born weight disagree."""


# ---------------------------------------------------------------------------
# forward chain


@dataclass(frozen=True)
class ProofStep:
    kind: str
    premise: str
    conclusion: str
    justification: str
    rule: str | None = None
    weight: float | None = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "premise": self.premise,
            "conclusion": self.conclusion,
            "justification": self.justification,
            "rule": self.rule,
            "weight": self.weight,
            "rational": None if self.weight is None else rational_tag(self.weight),
        }


@dataclass(frozen=True)
class ProofTrace:
    steps: tuple[ProofStep, ...]
    outcome: str
    stopped_at: str | None = None

    @property
    def contradiction(self) -> bool:
        return self.outcome == "contradiction"

    def as_dict(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome,
            "stopped_at": self.stopped_at,
            "steps": [s.as_dict() for s in self.steps],
        }


def lemma_weights(spec: ProtocolSpec) -> dict[str, float]:
    """Born weights behind the four lemmas, read off the view bindings."""
    f1, f2 = view_binding(spec, "F1"), view_binding(spec, "F2")
    a, w = view_binding(spec, "A"), view_binding(spec, "W")
    return {
        "L1": certain_weight(f1.projectors[FAIL], f1.states[SPIN_FOR_R[TAIL]]),
        "L2": certain_weight(f2.projectors[PLUS], f2.states[SPIN_FOR_R[HEAD]]),
        "L3": certain_weight(a.projectors[(MINUS, OK)], a.states[PSI0]),
        "L4": certain_weight(w.projectors[HALT_PAIR], w.states[PSI0]),
    }


_CHAIN = (
    # kind, conclusion, justification, rule, lemma
    ("lemma-L4", "(n:40, *, x=ok, w=ok) ∈ s^W for a smallest n", "Eq30", "qt_c", "L4"),
    ("sw-uniqueness", "(n:40, *, x, w) ∈ s^W ⟺ x = w = ok", "Eq31", "sw", None),
    ("compat-19", "(n:40, *, *, x=ok) ∈ s^A", "C19", "compat_19", None),
    ("lemma-L3", "(n:20, *, z=+1/2, *) ∈ s^A", "Eq27", "qt_a", "L3"),
    ("compat-18", "(n:20, *, *, z=+1/2) ∈ s^F2", "C18", "compat_18", None),
    ("lemma-L2", "(n:10, r=tail, *, *) ∈ s^F2", "Eq24", "qt_a", "L2"),
    ("compat-17", "(n:10, r=tail, *, *) ∈ s^F1", "C17", "compat_17", None),
    ("lemma-L1", "(n:40, *, *, w=fail) ∈ s^F1", "Eq23", "qt_b", "L1"),
    ("compat-16", "(n:40, *, *, w=fail) ∈ s^W", "C16", "compat_16", None),
    ("contradiction", "⊥: w=fail at n:40 contradicts x = w = ok", "Eq32", None, None),
)

_START = "s not forbidden with s^F1, s^F2, s^A, s^W all defined"


def forward_chain(spec: ProtocolSpec, rules: TheoryRuleSet = TheoryRuleSet()) -> ProofTrace:
    """Derive a contradiction from a story passing every rule, or stop early.

    Each lemma step checks its Born weight against the lemma's requirement;
    if the weight (recomputed here from the view bindings) disagrees with the
    independently computed certainty fact, the protocol itself is broken and
    :class:`InternalInconsistencyError` is raised.  A disabled rule or an
    unmet weight requirement ends the chain without a contradiction.
    """
    weights = lemma_weights(spec)
    facts = {f.name: f for f in certainty_facts(spec)}
    for name, wt in weights.items():
        if abs(wt - facts[name].weight) > EPS:
            raise InternalInconsistencyError(
                f"{name}: binding weight {wt!r} vs certainty fact {facts[name].weight!r}"
            )

    steps: list[ProofStep] = []
    premise = _START
    for kind, conclusion, tag, rule, lemma in _CHAIN:
        wt = weights[lemma] if lemma else None
        if rule is not None and rule == "qt_c" and not rules.repetition:
            return ProofTrace(tuple(steps), "no-contradiction", kind)
        if rule is not None and not getattr(rules, rule):
            return ProofTrace(tuple(steps), "no-contradiction", kind)
        if lemma is not None:
            fact = facts[lemma]
            if not fact.holds:
                return ProofTrace(tuple(steps), "no-contradiction", kind)
        steps.append(ProofStep(kind, premise, conclusion, tag, rule, wt))
        premise = conclusion
    return ProofTrace(tuple(steps), "contradiction")


# ---------------------------------------------------------------------------
# round patterns and story construction


@dataclass(frozen=True, order=True)
class RoundPattern:
    """What each view records in one round.

    ``r1``/``r2`` are the coin values seen by F1/F2; ``w1`` is F1's w, ``z2``
    F2's z, ``(z3, x3)`` A's record and ``(x4, w4)`` W's record.
    """

    r1: tuple[str, ...]
    r2: tuple[str, ...]
    z2: str
    z3: str
    x3: str
    x4: str
    w1: str
    w4: str

    @property
    def halts(self) -> bool:
        return (self.x4, self.w4) == HALT_PAIR

    def as_dict(self) -> dict[str, Any]:
        return {
            "r_F1": list(self.r1),
            "r_F2": list(self.r2),
            "z_F2": self.z2,
            "z_A": self.z3,
            "x_A": self.x3,
            "x_W": self.x4,
            "w_F1": self.w1,
            "w_W": self.w4,
        }


def _channel(values: Sequence[Any], shared: bool) -> list[tuple[Any, Any]]:
    if shared:
        return [(v, v) for v in values]
    return list(itertools.product(values, values))


def round_patterns(rules: TheoryRuleSet = TheoryRuleSet()) -> list[RoundPattern]:
    """All round patterns, in a fixed order.

    Where a compatibility rule is enabled its two views share one value;
    patterns giving them different values would fail that rule anyway.
    """
    r_sets = [tuple(sorted(s, key=R_VALUES.index)) for s in R_SETS]
    out = []
    for (r1, r2), (z2, z3), (x3, x4), (w1, w4) in itertools.product(
        _channel(r_sets, rules.compat_17),
        _channel(Z_VALUES, rules.compat_18),
        _channel(X_VALUES, rules.compat_19),
        _channel(W_VALUES, rules.compat_16),
    ):
        out.append(RoundPattern(r1, r2, z2, z3, x3, x4, w1, w4))
    return out


def round_events(p: RoundPattern, n: int) -> dict[str, list[Event]]:
    def ev(view: str, m: int, *vals: Any) -> Event:
        return Event(view, TimeStamp(n, m), vals)

    f1 = [ev("F1", 10, r, SPIN_FOR_R[r], None) for r in p.r1]
    f1 += [ev("F1", 40, None, SPIN_FOR_R[r], p.w1) for r in p.r1]
    f2 = [ev("F2", 10, r, SPIN_FOR_R[r], None) for r in p.r2]
    f2 += [ev("F2", m, None, SPIN_FOR_R[r], p.z2) for r in p.r2 for m in (20, 30)]
    a = [
        ev("A", 0, PSI0, None, None),
        ev("A", 10, PSI0, None, None),
        ev("A", 20, PSI0, p.z3, None),
        ev("A", 30, PSI0, p.z3, p.x3),
        ev("A", 40, PSI0, None, p.x3),
    ]
    w = [
        ev("W", 0, PSI0, None, None),
        ev("W", 10, PSI0, None, None),
        ev("W", 20, PSI0, None, None),
        ev("W", 30, PSI0, p.x4, None),
        ev("W", 40, PSI0, p.x4, p.w4),
    ]
    return {"F1": f1, "F2": f2, "A": a, "W": w}


def _assemble(per_round: Iterable[dict[str, list[Event]]], horizon: int | None) -> Story:
    acc: dict[str, set[Event]] = {v: set() for v in ("F1", "F2", "A", "W")}
    for evs in per_round:
        for v, es in evs.items():
            acc[v].update(es)
    return Story({v: Plot(v, frozenset(es)) for v, es in acc.items()}, horizon)


def canonical_story(patterns: Sequence[RoundPattern], horizon: int | None = None) -> Story:
    """Story whose round ``n`` follows ``patterns[n]``, every tick filled in."""
    return _assemble((round_events(p, n) for n, p in builtins.enumerate(patterns)), horizon)


def assignment_story(
    assignment: Sequence[tuple[str, str, str, str]], horizon: int | None = None
) -> Story:
    """Single-world story from per-round ``(r, z, x, w)`` assignments."""
    pats = [RoundPattern((r,), (r,), z, z, x, x, w, w) for r, z, x, w in assignment]
    return canonical_story(pats, horizon)


def branching_story(spec: ProtocolSpec, rounds: int) -> Story:
    """Every outcome of non-zero weight recorded in every view, each round.

    The story never halts (W always also records non-halting outcomes), so it
    runs to ``rounds`` and is truncated there.
    """
    b = bindings_for(spec)

    def support(view: str, psi: str) -> list[Any]:
        fam = b[view].projectors
        return [o for o in fam.outcomes if certain_weight(fam[o], b[view].states[psi]) > EPS]

    per_round = []
    for n in range(rounds):
        def ev(view: str, m: int, *vals: Any) -> Event:
            return Event(view, TimeStamp(n, m), vals)

        coin = [r for r in R_VALUES if abs(spec.coin_state.amplitude(r)) ** 2 > EPS]
        f1 = [ev("F1", 10, r, SPIN_FOR_R[r], None) for r in coin]
        f1 += [ev("F1", 40, None, SPIN_FOR_R[r], w) for r in coin for w in support("F1", SPIN_FOR_R[r])]
        f2 = [ev("F2", 10, r, SPIN_FOR_R[r], None) for r in coin]
        f2 += [
            ev("F2", m, None, SPIN_FOR_R[r], z)
            for r in coin
            for z in support("F2", SPIN_FOR_R[r])
            for m in (20, 30)
        ]
        a_pairs = support("A", PSI0)
        a = [ev("A", 0, PSI0, None, None), ev("A", 10, PSI0, None, None)]
        a += [ev("A", 20, PSI0, z, None) for z in {z for z, _ in a_pairs}]
        a += [ev("A", 30, PSI0, z, x) for z, x in a_pairs]
        a += [ev("A", 40, PSI0, None, x) for x in {x for _, x in a_pairs}]
        w_pairs = support("W", PSI0)
        w = [ev("W", m, PSI0, None, None) for m in (0, 10, 20)]
        w += [ev("W", 30, PSI0, x, None) for x in {x for x, _ in w_pairs}]
        w += [ev("W", 40, PSI0, x, ww) for x, ww in w_pairs]
        per_round.append({"F1": f1, "F2": f2, "A": a, "W": w})
    return _assemble(per_round, rounds)


# ---------------------------------------------------------------------------
# pattern encoding for the kernels


def _bit(values: Sequence[Any], v: Any) -> int:
    return 1 << values.index(v)


def _rmask(rs: Iterable[str]) -> int:
    return sum(_bit(R_VALUES, r) for r in rs)


@dataclass(frozen=True)
class Encoding:
    patterns: tuple[RoundPattern, ...]
    local_ok: tuple[int, ...]
    halting: tuple[int, ...]
    f1_psi: tuple[int, ...]
    f1_out: tuple[int, ...]
    f2_psi: tuple[int, ...]
    f2_out: tuple[int, ...]
    a_out: tuple[int, ...]
    w_out: tuple[int, ...]
    f1_req: tuple[int, ...]
    f2_req: tuple[int, ...]
    a_req: int
    w_req: int

    def kernel_args(self) -> tuple:
        return (
            self.local_ok, self.halting, self.f1_psi, self.f1_out, self.f2_psi, self.f2_out,
            self.a_out, self.w_out, self.f1_req, self.f2_req, self.a_req, self.w_req,
        )


def _round_ok(weights: list[dict[Any, float]], recorded: set, rules: TheoryRuleSet) -> bool:
    """Rules (a) and (b) for one round: ``weights`` has one entry per
    prepared state, ``recorded`` the outcomes seen."""
    for z in weights[0]:
        ws = [w[z] for w in weights]
        if rules.qt_a and z in recorded and all(x <= EPS for x in ws):
            return False
        if rules.qt_b and z not in recorded and any(abs(x - 1.0) <= EPS for x in ws):
            return False
    return True


def encode(spec: ProtocolSpec, rules: TheoryRuleSet = TheoryRuleSet()) -> Encoding:
    """Per-pattern bit fields the kernels work on.

    Round-local rules are decided here from Born weights; the kernels only
    handle what depends on the whole sequence (repetition, rule (c)).
    """
    b = bindings_for(spec)
    wts = {
        v: {
            psi: {o: certain_weight(b[v].projectors[o], b[v].states[psi]) for o in b[v].projectors.outcomes}
            for psi in b[v].states
        }
        for v in b
    }
    a_outs, w_outs = b["A"].projectors.outcomes, b["W"].projectors.outcomes

    cols: dict[str, list[int]] = {k: [] for k in ("ok", "halt", "p1", "o1", "p2", "o2", "a", "w")}
    pats = tuple(round_patterns(rules))
    for p in pats:
        ok = (
            _round_ok([wts["F1"][SPIN_FOR_R[r]] for r in p.r1], {p.w1}, rules)
            and _round_ok([wts["F2"][SPIN_FOR_R[r]] for r in p.r2], {p.z2}, rules)
            and _round_ok([wts["A"][PSI0]], {(p.z3, p.x3)}, rules)
            and _round_ok([wts["W"][PSI0]], {(p.x4, p.w4)}, rules)
        )
        cols["ok"].append(int(ok))
        cols["halt"].append(int(p.halts))
        cols["p1"].append(_rmask(p.r1))
        cols["o1"].append(_bit(W_VALUES, p.w1))
        cols["p2"].append(_rmask(p.r2))
        cols["o2"].append(_bit(Z_VALUES, p.z2))
        cols["a"].append(_bit(a_outs, (p.z3, p.x3)))
        cols["w"].append(_bit(w_outs, (p.x4, p.w4)))

    def req(view: str, psi: str, outs: Sequence[Any]) -> int:
        return sum(_bit(outs, o) for o, x in wts[view][psi].items() if x > EPS)

    f1_req = [0, 0, 0, 0]
    f2_req = [0, 0, 0, 0]
    for r in R_VALUES:
        m = _rmask([r])
        f1_req[m] = req("F1", SPIN_FOR_R[r], W_VALUES)
        f2_req[m] = req("F2", SPIN_FOR_R[r], Z_VALUES)
    return Encoding(
        pats,
        tuple(cols["ok"]), tuple(cols["halt"]),
        tuple(cols["p1"]), tuple(cols["o1"]), tuple(cols["p2"]), tuple(cols["o2"]),
        tuple(cols["a"]), tuple(cols["w"]),
        tuple(f1_req), tuple(f2_req),
        req("A", PSI0, a_outs), req("W", PSI0, w_outs),
    )


def sequence_passes(enc: Encoding, seq: Sequence[int], rules: TheoryRuleSet, horizon: int) -> bool:
    """The kernels' verdict on one pattern sequence, in plain Python."""
    if not all(enc.local_ok[p] for p in seq):
        return False
    k = len(seq)
    last = seq[-1]
    if rules.repetition:
        if any(enc.halting[p] for p in seq[:-1]):
            return False
        if not enc.halting[last] and k != horizon:
            return False
    truncated = k == horizon and not enc.halting[last]
    if rules.qt_c and truncated:
        ua = wu = u1 = u2 = 0
        c1 = {enc.f1_psi[p] for p in seq}
        c2 = {enc.f2_psi[p] for p in seq}
        for p in seq:
            ua |= enc.a_out[p]
            wu |= enc.w_out[p]
            u1 |= enc.f1_out[p]
            u2 |= enc.f2_out[p]
        if (ua & enc.a_req) != enc.a_req or (wu & enc.w_req) != enc.w_req:
            return False
        for consts, union, reqs in ((c1, u1, enc.f1_req), (c2, u2, enc.f2_req)):
            if len(consts) == 1:
                (m,) = consts
                if m in (1, 2) and (union & reqs[m]) != reqs[m]:
                    return False
    return True


# ---------------------------------------------------------------------------
# exhaustive search


@dataclass
class CheckReport:
    assumptions: TheoryRuleSet
    stories_examined: int
    satisfying: int
    witnesses: list[Story] = field(default_factory=list)
    max_rounds: int = 0
    backend: str = ""
    witness_patterns: list[Any] = field(default_factory=list)
    witnesses_verified: bool = True
    visited: int = 0

    def __post_init__(self) -> None:
        if self.satisfying > self.stories_examined:
            raise ValueError("more satisfying stories than examined")
        if bool(self.witnesses) != (self.satisfying > 0):
            raise ValueError("witnesses must be present exactly when some story satisfies")

    def as_dict(self) -> dict[str, Any]:
        from .stories import story_to_document

        return {
            "assumptions": self.assumptions.as_dict(),
            "dropped": self.assumptions.disabled,
            "max_rounds": self.max_rounds,
            "backend": self.backend,
            "stories_examined": self.stories_examined,
            "satisfying": self.satisfying,
            "witnesses_verified": self.witnesses_verified,
            "witnesses": [
                {"rounds": pats, "story": story_to_document(s)}
                for pats, s in zip(self.witness_patterns, self.witnesses)
            ],
        }


def _check_bounds(max_rounds: int) -> None:
    if not isinstance(max_rounds, int) or not 1 <= max_rounds <= MAX_ENUM_ROUNDS:
        raise ValueError(f"max_rounds must be an integer in [1, {MAX_ENUM_ROUNDS}], got {max_rounds!r}")


def verify_witness(story: Story, rules: TheoryRuleSet, spec: ProtocolSpec | None = None) -> bool:
    """Independent re-check: every enabled rule, straight from the story."""
    from .protocol import build_protocol

    if not story.complete:
        raise ValueError("witness stories need all four plots defined")
    return not story_violations(story, spec or build_protocol(), rules)


def enumerate_stories(
    spec: ProtocolSpec,
    rules: TheoryRuleSet = TheoryRuleSet(),
    max_rounds: int = 3,
    backend: str | None = None,
    witness_cap: int = WITNESS_CAP,
) -> CheckReport:
    """Count canonical stories of up to ``max_rounds`` rounds passing ``rules``.

    The space is every sequence of round patterns of length 1..max_rounds,
    plus the branching story.  Every witness is re-checked with
    :func:`verify_witness` before it is reported.
    """
    _check_bounds(max_rounds)
    enc = encode(spec, rules)
    kernel = _kernels.get_kernel(backend)
    sat, visited, seqs = kernel(
        *enc.kernel_args(), max_rounds, rules.repetition, rules.qt_c, witness_cap
    )
    n_pat = len(enc.patterns)
    examined = sum(n_pat**k for k in range(1, max_rounds + 1)) + 1

    bindings = bindings_for(spec)
    witnesses: list[Story] = []
    labels: list[Any] = []
    for seq in seqs:
        pats = [enc.patterns[i] for i in seq]
        witnesses.append(canonical_story(pats, max_rounds))
        labels.append([p.as_dict() for p in pats])
    branching = branching_story(spec, max_rounds)
    if not story_violations(branching, spec, rules, bindings):
        sat += 1
        if len(witnesses) < witness_cap:
            witnesses.append(branching)
            labels.append("branching")
    verified = all(not story_violations(s, spec, rules, bindings) for s in witnesses)
    return CheckReport(
        rules, examined, sat, witnesses, max_rounds,
        backend or _kernels.DEFAULT_BACKEND, labels, verified, visited,
    )


def ablate(
    spec: ProtocolSpec,
    dropped: str,
    max_rounds: int = 2,
    backend: str | None = None,
) -> CheckReport:
    """Enumerate with one assumption switched off."""
    if dropped not in ABLATABLE:
        raise ValueError(f"cannot drop {dropped!r}; choose from {ABLATABLE}")
    return enumerate_stories(spec, TheoryRuleSet().without(dropped), max_rounds, backend)


@dataclass(frozen=True)
class AuditResult:
    sampled: int
    agreed: int
    disagreements: tuple[tuple[int, ...], ...]

    @property
    def ok(self) -> bool:
        return not self.disagreements


def audit(
    spec: ProtocolSpec,
    rules: TheoryRuleSet = TheoryRuleSet(),
    max_rounds: int = 3,
    samples: int = 100,
    seed: int = 0,
    want: bool | None = False,
) -> AuditResult:
    """Compare the search's verdict with the story-level rules on random stories.

    ``want=False`` keeps drawing until ``samples`` stories the search counts
    as failing have been checked (``True`` likewise for passing ones, ``None``
    takes whatever comes).
    """
    _check_bounds(max_rounds)
    enc = encode(spec, rules)
    bindings = bindings_for(spec)
    rng = random.Random(seed)
    n_pat = len(enc.patterns)
    checked = agreed = 0
    bad = []
    attempts = 0
    while checked < samples:
        attempts += 1
        if attempts > 1000 * samples:
            break
        k = rng.randint(1, max_rounds)
        seq = tuple(rng.randrange(n_pat) for _ in range(k))
        verdict = sequence_passes(enc, seq, rules, max_rounds)
        if want is not None and verdict != want:
            continue
        story = canonical_story([enc.patterns[i] for i in seq], max_rounds)
        oracle = not story_violations(story, spec, rules, bindings)
        checked += 1
        if oracle == verdict:
            agreed += 1
        else:
            bad.append(seq)
    return AuditResult(checked, agreed, tuple(bad))


def contradiction_story() -> Story:
    """The single-world round (tail, +1/2, ok, ok) the deduction rules out."""
    return assignment_story([(TAIL, PLUS, OK, OK)], horizon=1)


def violations_of(story: Story, spec: ProtocolSpec, rules: TheoryRuleSet = TheoryRuleSet()) -> list[Violation]:
    return story_violations(story, spec, rules)


enumerate = enumerate_stories  # noqa: A001
