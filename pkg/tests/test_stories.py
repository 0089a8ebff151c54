from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewfe.checker import assignment_story, branching_story, canonical_story, round_patterns
from ewfe.protocol import FAIL, MINUS, OK, PLUS, PSI0, spin_states, view_binding
from ewfe.stories import (
    ANY,
    Event,
    MalformedPattern,
    Plot,
    Story,
    TheoryRuleSet,
    TimeStamp,
    binding_check,
    compat_check,
    event,
    event_space_check,
    is_truncated,
    match,
    qt_check,
    repetition_check,
    spin_example_plots,
    spin_z_family,
    story_from_document,
    story_to_document,
    story_violations,
    sw_check,
    to_rme,
    unmapped_events,
)



def w_round(n, x, w):
    evs = [event("W", f"{n}:{m:02d}", PSI0, None, None) for m in (0, 10, 20)]
    evs.append(event("W", f"{n}:30", PSI0, x, None))
    evs.append(event("W", f"{n}:40", PSI0, x, w))
    return evs


rme_events = st.builds(
    lambda n, m, psi, z: Event("RME", TimeStamp(n, m), (psi, z)),
    st.integers(0, 3),
    st.sampled_from((0, 1)),
    st.sampled_from(("down", "up", "right", "zero")),
    st.sampled_from((MINUS, PLUS, None)),
)
rme_plots = st.frozensets(rme_events, max_size=8).map(lambda s: Plot("RME", s))


# --------------------------------------------------------------------------
# time stamps and events
# --------------------------------------------------------------------------
class TestTimeAndEvents:
    def test_render_and_parse(self):
        t = TimeStamp.parse("3:05")
        assert (t.n, t.m) == (3, 5) and str(t) == "3:05"

    def test_order(self):
        assert TimeStamp(0, 59) < TimeStamp(1, 0) < TimeStamp(1, 1)

    @pytest.mark.parametrize("bad", ["1:60", "-1:00", "x", "1:2:3"])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            TimeStamp.parse(bad)

    def test_payload_arity_checked(self):
        with pytest.raises(ValueError):
            event("F1", "0:10", "head", "down")

    def test_plot_view_checked(self):
        with pytest.raises(ValueError):
            Plot("W", frozenset({event("A", "0:00", PSI0, None, None)}))

    def test_channel_access(self):
        e = event("A", "0:30", PSI0, PLUS, OK)
        assert (e["psi"], e["z"], e["x"]) == (PSI0, PLUS, OK)


# --------------------------------------------------------------------------
# pattern matching
# --------------------------------------------------------------------------
class TestMatch:
    def test_examples(self):
        s1 = spin_example_plots()["s1"]
        assert match(s1, ("0:01", ANY, MINUS))
        assert not match(s1, ("0:01", ANY, PLUS))
        assert not match(Plot("RME"), (ANY, ANY, ANY))

    def test_pair_outcome_with_wildcard(self):
        p = Plot.of("RME", ("0:01", PSI0, (OK, FAIL)))
        assert match(p, (ANY, PSI0, (OK, ANY)))
        assert not match(p, (ANY, PSI0, (FAIL, ANY)))

    @pytest.mark.parametrize("pat", [("0:01", ANY), ("0:01", ANY, MINUS, 1), "0:01", ("zz", ANY, MINUS)])
    def test_malformed(self, pat):
        with pytest.raises(MalformedPattern):
            match(spin_example_plots()["s1"], pat)

    @settings(max_examples=100, deadline=None)
    @given(rme_plots, rme_events)
    def test_literal_pattern_is_membership(self, plot, e):
        assert match(plot, (e.t,) + e.values) == (e in plot)


# --------------------------------------------------------------------------
# relabelling onto repeated measurement experiments
# --------------------------------------------------------------------------
class TestToRme:
    def test_f1_preparation_tick(self, spec):
        p = Plot.of("F1", ("2:10", "tail", "right", None))
        assert to_rme(p, view_binding(spec, "F1")) == Plot.of("RME", ("2:00", "right", None))

    def test_w_full_tick(self, spec):
        p = Plot.of("W", ("1:40", PSI0, OK, OK))
        assert to_rme(p, view_binding(spec, "W")) == Plot.of("RME", ("1:01", PSI0, (OK, OK)))

    def test_empty(self, spec):
        assert len(to_rme(Plot("A"), view_binding(spec, "A"))) == 0

    def test_merging_ticks(self, spec):
        # W's n:00, n:10 and n:20 all land on n:00
        p = Plot.of("W", *[(f"0:{m:02d}", PSI0, None, None) for m in (0, 10, 20)])
        assert len(to_rme(p, view_binding(spec, "W"))) == 1

    def test_view_mismatch(self, spec):
        with pytest.raises(ValueError):
            to_rme(Plot("F1"), view_binding(spec, "W"))

    def test_unmapped(self, spec):
        p = Plot.of("F2", ("0:30", None, "down", MINUS), ("0:20", None, "down", MINUS))
        un = unmapped_events(p, view_binding(spec, "F2"))
        assert [str(e.t) for e in un] == ["0:30"]

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_monotone(self, spec, data):
        b = view_binding(spec, "W")
        story = canonical_story(data.draw(st.lists(st.sampled_from(round_patterns()), min_size=1, max_size=3)))
        evs = sorted(story["W"].events)
        sub = data.draw(st.sets(st.sampled_from(evs)))
        small = Plot("W", frozenset(sub))
        assert to_rme(small, b).events <= to_rme(story["W"], b).events


# --------------------------------------------------------------------------
# quantum theory and single-world rules on one-shot stories
# --------------------------------------------------------------------------
class TestSpinExamples:
    def setup_method(self):
        self.plots = spin_example_plots()
        self.fam = spin_z_family()
        self.states = spin_states()

    def test_s2_forbidden(self):
        v = qt_check(self.plots["s2"], self.fam, states=self.states)
        assert {x.rule for x in v} >= {"a"}
        assert all(x.round == 0 for x in v if x.rule == "a")

    def test_s1_and_branching_permitted(self):
        assert qt_check(self.plots["s1"], self.fam, states=self.states) == []
        assert qt_check(self.plots["s1_branching"], self.fam, states=self.states) == []

    def test_single_outcome_query(self):
        assert qt_check(self.plots["s2"], self.fam, PLUS, states=self.states)[0].rule == "b"

    def test_sw(self):
        assert sw_check(self.plots["s1"], 0)
        assert not sw_check(self.plots["s1_branching"], 0)
        assert sw_check(Plot("RME"), 0)

    @settings(max_examples=50, deadline=None)
    @given(rme_plots)
    def test_checks_are_pure(self, plot):
        a = qt_check(plot, self.fam, states=self.states)
        assert a == qt_check(plot, self.fam, states=self.states)
        assert sw_check(plot, 1) == sw_check(plot, 1)


class TestRuleC:
    def test_repeated_without_target_is_forbidden(self, spec):
        b = view_binding(spec, "W")
        plot = Plot("W", frozenset(w_round(0, FAIL, FAIL) + w_round(1, FAIL, FAIL)))
        rme = to_rme(plot, b)
        assert not [v for v in qt_check(rme, b.projectors, (OK, OK), states=b.states) if v.rule == "c"]
        hits = qt_check(rme, b.projectors, (OK, OK), states=b.states, horizon=2)
        assert [v.rule for v in hits] == ["c"]

    def test_zero_weight_target_exempt(self, spec):
        b = view_binding(spec, "A")
        story = assignment_story([("tail", PLUS, FAIL, FAIL)] * 2, horizon=2)
        rme = to_rme(story["A"], b)
        assert qt_check(rme, b.projectors, (MINUS, OK), states=b.states, horizon=2) == []

    def test_truncation_flag(self):
        assert is_truncated(assignment_story([("head", MINUS, FAIL, FAIL)] * 2, horizon=2))
        assert not is_truncated(assignment_story([("head", MINUS, FAIL, FAIL)] * 2, horizon=3))
        assert not is_truncated(assignment_story([("head", MINUS, OK, OK)], horizon=1))


# --------------------------------------------------------------------------
# compatibility
# --------------------------------------------------------------------------
class TestCompat:
    def test_w_mismatch_violates_16(self):
        s = assignment_story([("tail", PLUS, OK, OK)])
        f1 = Plot("F1", frozenset(e if e.t.m != 40 else Event("F1", e.t, (None, e["psi"], FAIL)) for e in s["F1"].events))
        bad = Story({**s.plots, "F1": f1})
        assert "C16" in compat_check(bad)

    def test_only_w_is_vacuous(self):
        s = assignment_story([("tail", PLUS, OK, OK)])
        assert compat_check(Story({"W": s["W"]})) == []

    def test_branching_story_consistent(self, spec):
        assert compat_check(branching_story(spec, 3)) == []

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sampled_from(round_patterns(TheoryRuleSet().without("compat_16", "compat_18"))), min_size=1, max_size=2))
    def test_compat_is_symmetric_difference(self, pats):
        s = canonical_story(pats)
        # C16 fails iff some (t, w) is recorded by exactly one of F1, W
        left = {(e.t, e["w"]) for e in s["F1"].events if e["w"] is not None}
        right = {(e.t, e["w"]) for e in s["W"].events if e["w"] is not None}
        assert ("C16" in compat_check(s)) == bool(left ^ right)
        left = {(e.t, e["z"]) for e in s["F2"].events if e["z"] is not None}
        right = {(e.t, e["z"]) for e in s["A"].events if e["z"] is not None}
        assert ("C18" in compat_check(s)) == bool(right ^ left)


# --------------------------------------------------------------------------
# repetition
# --------------------------------------------------------------------------
class TestRepetition:
    def test_halting_at_zero(self):
        assert repetition_check(Plot("W", frozenset(w_round(0, OK, OK))))

    def test_missing_next_round(self):
        assert not repetition_check(Plot("W", frozenset(w_round(0, FAIL, FAIL))))

    def test_halting_at_two(self):
        evs = w_round(0, FAIL, FAIL) + w_round(1, OK, FAIL) + w_round(2, OK, OK)
        assert repetition_check(Plot("W", frozenset(evs)))

    def test_no_round_after_halting(self):
        evs = w_round(0, OK, OK) + w_round(1, FAIL, FAIL)
        assert not repetition_check(Plot("W", frozenset(evs)), horizon=2)

    def test_missing_tick(self):
        evs = [e for e in w_round(0, OK, OK) if e.t.m != 20]
        assert not repetition_check(Plot("W", frozenset(evs)))

    def test_horizon_waives_later_rounds(self):
        assert repetition_check(Plot("W", frozenset(w_round(0, FAIL, FAIL))), horizon=1)

    def test_w_plot_required(self):
        with pytest.raises(ValueError):
            repetition_check(Plot("A"))


# --------------------------------------------------------------------------
# event spaces and bindings
# --------------------------------------------------------------------------
class TestEventSpace:
    def test_head_with_right_rejected(self):
        assert event_space_check(Plot.of("F1", ("0:10", "head", "right", None)))

    def test_a_preparation(self):
        assert event_space_check(Plot.of("A", ("0:00", PSI0, None, None))) == []
        assert event_space_check(Plot.of("A", ("0:00", "head", None, None)))

    def test_off_tick_and_alphabet(self):
        assert event_space_check(Plot.of("W", ("0:15", PSI0, None, None)))
        assert event_space_check(Plot.of("W", ("0:40", PSI0, "maybe", OK)))

    def test_binding_partial_tick(self, spec):
        story = assignment_story([("tail", PLUS, OK, OK)])
        a = story["A"]
        assert binding_check(a, view_binding(spec, "A")) == []
        extra = a | Plot.of("A", ("0:20", PSI0, MINUS, None))
        assert binding_check(extra, view_binding(spec, "A"))


# --------------------------------------------------------------------------
# whole stories and documents
# --------------------------------------------------------------------------
class TestStories:
    def test_contradiction_assignment_forbidden(self, spec):
        assert story_violations(assignment_story([("tail", PLUS, OK, OK)], 1), spec)

    def test_branching_only_fails_sw(self, spec):
        rules = {v.rule for v in story_violations(branching_story(spec, 2), spec)}
        assert rules == {"sw"}

    def test_rule_set(self):
        r = TheoryRuleSet().without("sw", "qt_a")
        assert r.disabled == ["qt_a", "sw"]
        with pytest.raises(KeyError):
            r.without("nope")

    def test_document_round_trip_byte_stable(self, spec):
        s = branching_story(spec, 2)
        text = json.dumps(story_to_document(s), sort_keys=True)
        again = story_from_document(json.loads(text))
        assert again == s
        assert json.dumps(story_to_document(again), sort_keys=True) == text

    def test_partial_story_document(self):
        s = Story({"W": Plot.of("W", ("0:00", PSI0, None, None))}, None)
        doc = story_to_document(s)
        assert doc["plots"]["F1"] is None
        assert doc["plots"]["W"] == [{"t": "0:00", "psi": PSI0, "x": None, "w": None}]
        assert story_from_document(doc) == s

    def test_bad_document(self):
        with pytest.raises(ValueError):
            story_from_document({"plots": {"B": []}})
        with pytest.raises(ValueError):
            story_from_document({"plots": {"W": [{"t": "0:00"}]}})
