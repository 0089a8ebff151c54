from __future__ import annotations

import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ewfe.protocol import (
    FAIL,
    HEAD,
    MINUS,
    OK,
    PLUS,
    TAIL,
    ProtocolError,
    build_protocol,
    certainty_facts,
    check_distribution,
    coin_distribution,
    load_protocol,
    protocol_from_document,
    protocol_to_document,
    rational_tag,
    view_binding,
    view_distribution,
)
from ewfe.quantum import projector, kron

TOL = 1e-12


# exact oracle: the protocol written out with sympy rationals and radicals
def _oracle(a=sp.sqrt(sp.Rational(1, 3)), b=sp.sqrt(sp.Rational(2, 3))):
    h = 1 / sp.sqrt(2)
    e = lambda i, n: sp.Matrix([1 if j == i else 0 for j in range(n)])  # noqa: E731
    head, tail = e(0, 2), e(1, 2)
    down, up = e(0, 2), e(1, 2)
    right = h * (down + up)
    ok, fail = h * (head - tail), h * (head + tail)
    # F1⊗S, then F1⊗F2 with U sending down→-1/2, up→+1/2 (identical coordinates)
    v_psi = a * sp.kronecker_product(head, down) + b * sp.kronecker_product(tail, right)
    uv_psi = v_psi
    bases = {OK: ok, FAIL: fail}
    spins = {MINUS: down, PLUS: up}
    w = {(x, y): sp.simplify((sp.kronecker_product(bases[x], bases[y]).T * uv_psi)[0] ** 2) for x in bases for y in bases}
    A = {(z, x): sp.simplify((sp.kronecker_product(bases[x], spins[z]).T * v_psi)[0] ** 2) for z in spins for x in bases}
    return uv_psi, w, A


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------
class TestBuild:
    def test_coin_amplitudes(self, spec):
        np.testing.assert_allclose(spec.coin_amplitudes, (math.sqrt(1 / 3), math.sqrt(2 / 3)), atol=TOL)
        assert coin_distribution(spec)[HEAD] == pytest.approx(1 / 3, abs=TOL)

    def test_ok_vector_components(self, spec):
        np.testing.assert_allclose(spec.f1_basis[OK].amps, (math.sqrt(0.5), -math.sqrt(0.5)), atol=TOL)

    def test_global_state_matches_exact_oracle(self, spec):
        uv, _, _ = _oracle()
        exact = np.array([complex(sp.N(c, 30)) for c in uv])
        np.testing.assert_allclose(spec.global_state().amps, exact, atol=TOL)

    def test_global_state_in_fail_tail_form(self, spec):
        from ewfe.quantum import Ket, tensor
        from ewfe.protocol import SPACE_F1, SPACE_F2

        target = math.sqrt(2 / 3) * tensor(spec.f1_basis[FAIL], Ket.basis(SPACE_F2, MINUS)).amps
        target += math.sqrt(1 / 3) * tensor(Ket.basis(SPACE_F1, TAIL), Ket.basis(SPACE_F2, PLUS)).amps
        np.testing.assert_allclose(spec.global_state().amps, target, atol=TOL)

    def test_halt_pair(self, spec):
        assert spec.halt_pair == (OK, OK)

    def test_catalogs(self, spec):
        assert set(spec.catalog("S")) == {"down", "up", "right", "zero"}
        assert spec.catalog("C")["zero"].zero
        with pytest.raises(KeyError):
            spec.catalog("X")


# --------------------------------------------------------------------------
# bindings
# --------------------------------------------------------------------------
class TestBindings:
    def test_time_maps(self, spec):
        assert dict(view_binding(spec, "F1").time_map) == {10: 0, 40: 1, 50: 2}
        assert dict(view_binding(spec, "F2").time_map) == {10: 0, 20: 1, 40: 2}
        assert view_binding(spec, "A").kinds[30] == "full"
        assert view_binding(spec, "W").kinds[40] == "full"

    def test_spaces(self, spec):
        assert [view_binding(spec, v).space for v in ("F1", "F2", "A", "W")] == ["S", "S", "C", "C"]

    def test_f2_projectors_are_z_basis(self, spec):
        fam = view_binding(spec, "F2").projectors
        np.testing.assert_allclose(fam[MINUS], np.diag([1, 0]), atol=TOL)
        np.testing.assert_allclose(fam[PLUS], np.diag([0, 1]), atol=TOL)

    def test_w_projector_formula(self, spec):
        V, U = spec.V.matrix, spec.U.matrix
        fam = view_binding(spec, "W").projectors
        for x in (OK, FAIL):
            for w in (OK, FAIL):
                inner = U.conj().T @ projector(spec.f2_basis[w]) @ U
                expect = V.conj().T @ kron(projector(spec.f1_basis[x]), inner) @ V
                np.testing.assert_allclose(fam[(x, w)], expect, atol=TOL)

    def test_unknown_view(self, spec):
        with pytest.raises(ValueError):
            view_binding(spec, "B")


# --------------------------------------------------------------------------
# distributions
# --------------------------------------------------------------------------
class TestDistributions:
    def test_w_matches_oracle(self, spec):
        _, w, _ = _oracle()
        assert w[(OK, OK)] == sp.Rational(1, 12)
        dist = view_distribution(spec, "W")
        for k, v in w.items():
            assert abs(dist[k] - float(v)) <= TOL

    def test_a_matches_oracle(self, spec):
        _, _, a = _oracle()
        assert a[(MINUS, OK)] == 0
        dist = view_distribution(spec, "A")
        for k, v in a.items():
            assert abs(dist[k] - float(v)) <= TOL

    def test_f1_given_tail(self, spec):
        d = view_distribution(spec, "F1", TAIL)
        assert abs(d[FAIL] - 1) <= TOL and abs(d[OK]) <= TOL

    def test_joint_f1_sums_to_one(self, spec):
        d = view_distribution(spec, "F1")
        assert set(d) == {(r, o) for r in (HEAD, TAIL) for o in (OK, FAIL)}
        check_distribution(d)

    def test_r_not_allowed_for_a(self, spec):
        with pytest.raises(ValueError):
            view_distribution(spec, "A", HEAD)

    @pytest.mark.parametrize("view", ["F1", "F2", "A", "W"])
    def test_every_view_sums_to_one(self, spec, view):
        assert check_distribution(view_distribution(spec, view)) <= 1e-10

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, math.pi / 2))
    def test_halting_weight_is_quarter_head_probability(self, theta):
        # amplitude of ok⊗ok in UVψ is a/2 for coin a|head⟩ + b|tail⟩
        s = build_protocol((math.cos(theta), math.sin(theta)))
        assert abs(view_distribution(s, "W")[(OK, OK)] - math.cos(theta) ** 2 / 4) <= TOL
        for v in ("F1", "F2", "A", "W"):
            check_distribution(view_distribution(s, v))

    def test_tail_coin_never_halts(self):
        s = build_protocol((0.0, 1.0))
        assert view_distribution(s, "W")[(OK, OK)] <= TOL

    def test_rational_tags(self):
        assert rational_tag(1 / 12) == "1/12"
        assert rational_tag(0.75 + 1e-13) == "3/4"
        assert rational_tag(0.3) is None


# --------------------------------------------------------------------------
# certainty facts
# --------------------------------------------------------------------------
class TestCertaintyFacts:
    def test_weights(self, spec):
        f = {x.name: x for x in certainty_facts(spec)}
        assert abs(f["L1"].weight - 1) <= TOL
        assert abs(f["L2"].weight) <= TOL
        assert abs(f["L3"].weight) <= TOL
        assert abs(f["L4"].weight - 1 / 12) <= TOL
        assert all(x.holds for x in f.values())

    def test_rules_and_tags(self, spec):
        f = {x.name: (x.rule, x.tag) for x in certainty_facts(spec)}
        assert f == {"L1": ("qt_b", "Eq23"), "L2": ("qt_a", "Eq24"), "L3": ("qt_a", "Eq27"), "L4": ("qt_c", "Eq30")}

    def test_head_coin_breaks_l3(self):
        f = {x.name: x for x in certainty_facts(build_protocol((1.0, 0.0)))}
        assert not f["L3"].holds
        assert f["L3"].weight == pytest.approx(0.5, abs=TOL)


# --------------------------------------------------------------------------
# configuration documents
# --------------------------------------------------------------------------
class TestDocuments:
    def test_round_trip(self, spec):
        again = protocol_from_document(protocol_to_document(spec))
        np.testing.assert_allclose(again.global_state().amps, spec.global_state().amps, atol=TOL)

    def test_default_path(self):
        assert load_protocol(None).coin_amplitudes == build_protocol().coin_amplitudes

    def test_degenerate_coin_accepted(self):
        s = protocol_from_document({"coin": [1, 0]})
        assert s.coin_amplitudes == (1.0, 0.0)

    @pytest.mark.parametrize(
        "doc",
        [
            {"coin": [1, 1]},
            {"coin": [1]},
            {"coin": "x"},
            {"f1_basis": {"ok": [1, 0], "fail": [1, 0]}},
            {"f2_basis": {"ok": [1, 0]}},
            {"colour": 1},
            [],
        ],
    )
    def test_bad_documents(self, doc):
        with pytest.raises(ProtocolError):
            protocol_from_document(doc)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ProtocolError):
            load_protocol(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ProtocolError):
            load_protocol(bad)
        good = tmp_path / "good.json"
        good.write_text(json.dumps({"coin": [0.6, 0.8]}))
        assert load_protocol(good).coin_amplitudes == pytest.approx((0.6, 0.8))
