import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vchatmod.fusion import (BeliefPair, MassFunction, TotalConflictError,
                             Verdict, belief, combine, dark_verdict, decide_user,
                             fuse_frame, mass_from_binary, mass_from_probability)


def random_mass(rng) -> MassFunction:
    parts = rng.dirichlet((1.0, 1.0, 1.0))
    return MassFunction(m_n=float(parts[0]), m_f=float(parts[1]), m_theta=float(parts[2]))


def combine_oracle(mi: MassFunction, mj: MassFunction) -> MassFunction:
    """Brute-force enumeration over all focal-element intersections."""
    n, f = frozenset("N"), frozenset("F")
    theta = frozenset("NF")
    as_dict = lambda m: {n: m.m_n, f: m.m_f, theta: m.m_theta}
    out = {n: 0.0, f: 0.0, theta: 0.0}
    conflict = 0.0
    for a, ma in as_dict(mi).items():
        for b, mb in as_dict(mj).items():
            h = a & b
            if h:
                out[h] += ma * mb
            else:
                conflict += ma * mb
    denom = 1.0 - conflict
    return MassFunction(m_n=out[n] / denom, m_f=out[f] / denom,
                        m_theta=out[theta] / denom)


mass_strategy = st.builds(
    lambda a, b: MassFunction(*np.array([a, b, max(1e-12, 1 - a - b)])
                              / (a + b + max(1e-12, 1 - a - b))),
    st.floats(0.001, 0.95), st.floats(0.001, 0.95),
)


class TestMassFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            MassFunction(0.5, 0.2, 0.2)
        with pytest.raises(ValueError):
            MassFunction(1.2, -0.2, 0.0)

    def test_vacuous(self):
        v = MassFunction.vacuous()
        assert (v.m_n, v.m_f, v.m_theta) == (0.0, 0.0, 1.0)


class TestMassConstruction:
    def test_binary_present(self):
        m = mass_from_binary(True, 0.95, 0.32)
        assert (m.m_n, m.m_f) == (0.95, 0.0)
        assert m.m_theta == pytest.approx(0.05)

    def test_binary_absent(self):
        m = mass_from_binary(False, 0.95, 0.32)
        assert (m.m_n, m.m_f) == (0.32, 0.0)
        assert m.m_theta == pytest.approx(0.68)

    def test_binary_clamps_certainty(self):
        m = mass_from_binary(True, 1.0, 0.0)
        assert m.m_n == pytest.approx(1.0 - 1e-6)
        assert m.m_theta == pytest.approx(1e-6)

    def test_probability_masses(self):
        m = mass_from_probability(0.13)
        assert m.m_n == pytest.approx(0.87)
        assert m.m_f == pytest.approx(0.13)
        assert m.m_theta == 0.0

    def test_probability_half(self):
        m = mass_from_probability(0.5)
        assert (m.m_n, m.m_f, m.m_theta) == (0.5, 0.5, 0.0)

    def test_probability_clamps(self):
        m = mass_from_probability(0.0)
        assert m.m_f == pytest.approx(1e-6)
        assert m.m_n == pytest.approx(1.0 - 1e-6)


class TestCombine:
    def test_reference_example(self):
        skin = MassFunction(0.87, 0.13, 0.0)
        face = MassFunction(0.95, 0.0, 0.05)
        fused = combine(skin, face)
        assert fused.m_n == pytest.approx(0.9926, abs=1e-4)
        assert fused.m_f == pytest.approx(0.0074, abs=1e-4)
        assert fused.m_theta == pytest.approx(0.0, abs=1e-12)

    def test_vacuous_is_neutral(self, rng):
        for _ in range(50):
            m = random_mass(rng)
            fused = combine(MassFunction.vacuous(), m)
            assert fused.m_n == pytest.approx(m.m_n, abs=1e-12)
            assert fused.m_f == pytest.approx(m.m_f, abs=1e-12)
            assert fused.m_theta == pytest.approx(m.m_theta, abs=1e-12)

    def test_total_conflict_raises(self):
        certain_n = MassFunction(1.0, 0.0, 0.0)
        certain_f = MassFunction(0.0, 1.0, 0.0)
        with pytest.raises(TotalConflictError):
            combine(certain_n, certain_f)

    def test_matches_powerset_oracle(self, rng):
        for _ in range(200):
            mi, mj = random_mass(rng), random_mass(rng)
            got = combine(mi, mj)
            want = combine_oracle(mi, mj)
            assert got.m_n == pytest.approx(want.m_n, abs=1e-12)
            assert got.m_f == pytest.approx(want.m_f, abs=1e-12)
            assert got.m_theta == pytest.approx(want.m_theta, abs=1e-12)

    @settings(max_examples=200)
    @given(mass_strategy, mass_strategy)
    def test_commutative(self, a, b):
        ab, ba = combine(a, b), combine(b, a)
        assert abs(ab.m_n - ba.m_n) < 1e-12
        assert abs(ab.m_f - ba.m_f) < 1e-12

    @settings(max_examples=200)
    @given(mass_strategy, mass_strategy, mass_strategy)
    def test_associative(self, a, b, c):
        left = combine(combine(a, b), c)
        right = combine(a, combine(b, c))
        assert abs(left.m_n - right.m_n) < 1e-12
        assert abs(left.m_f - right.m_f) < 1e-12
        assert abs(left.m_theta - right.m_theta) < 1e-12

    def test_normalized_output(self, rng):
        for _ in range(100):
            fused = combine(random_mass(rng), random_mass(rng))
            assert fused.m_n + fused.m_f + fused.m_theta == pytest.approx(1.0, abs=1e-9)

    def test_binary_masses_never_conflict(self, rng):
        for _ in range(50):
            a = mass_from_binary(bool(rng.integers(2)), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9))
            b = mass_from_binary(bool(rng.integers(2)), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9))
            conflict = a.m_n * b.m_f + a.m_f * b.m_n
            assert conflict == 0.0
            combine(a, b)

    def test_face_present_evidence_never_lowers_bel_n(self, rng):
        for _ in range(200):
            m = random_mass(rng)
            rel = rng.uniform(0.5, 1.0 - 1e-6)
            boosted = combine(m, mass_from_binary(True, rel, 0.32))
            assert boosted.m_n >= m.m_n - 1e-12


class TestBelief:
    def test_uncommitted_mass_supports_neither(self):
        pair = belief(MassFunction(0.0, 0.7, 0.3))
        assert pair.bel_f == 0.7
        assert pair.bel_n == 0.0

    def test_vacuous_beliefs(self):
        pair = belief(MassFunction.vacuous())
        assert (pair.bel_n, pair.bel_f) == (0.0, 0.0)

    def test_additive_case(self):
        pair = belief(MassFunction(0.87, 0.13, 0.0))
        assert (pair.bel_n, pair.bel_f) == (0.87, 0.13)

    def test_non_additive_allowed_super_additive_not(self):
        BeliefPair(0.3, 0.3)
        with pytest.raises(ValueError):
            BeliefPair(0.7, 0.5)


class TestFuseFrame:
    def test_face_plus_skin_reference_values(self):
        pair = fuse_frame([(True, (0.95, 0.32))], mass_from_probability(0.13))
        assert pair.bel_n == pytest.approx(0.9926, abs=1e-4)
        assert pair.bel_f == pytest.approx(0.0074, abs=1e-4)

    def test_skin_only(self):
        pair = fuse_frame([], mass_from_probability(0.13))
        assert (pair.bel_n, pair.bel_f) == (0.87, 0.13)

    def test_two_vacuous_binaries_plus_even_skin(self):
        evidences = [(False, (0.9, 0.0)), (False, (0.9, 0.0))]  # rel_absent clamps to 1e-6
        pair = fuse_frame(evidences, mass_from_probability(0.5))
        assert pair.bel_n == pytest.approx(0.5, abs=1e-5)
        assert pair.bel_f == pytest.approx(0.5, abs=1e-5)

    def test_requires_at_least_one_mass(self):
        with pytest.raises(ValueError):
            fuse_frame([], None)

    def test_order_invariance(self, rng):
        evidences = [(bool(rng.integers(2)), (rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)))
                     for _ in range(4)]
        skin = mass_from_probability(rng.uniform(0.05, 0.95))
        base = fuse_frame(evidences, skin)
        for _ in range(5):
            rng.shuffle(evidences)
            again = fuse_frame(evidences, skin)
            assert again.bel_n == pytest.approx(base.bel_n, abs=1e-12)
            assert again.bel_f == pytest.approx(base.bel_f, abs=1e-12)


class TestDecideUser:
    def test_max_belief_rule(self):
        frames = [BeliefPair(0.5, 0.3), BeliefPair(0.8, 0.1), BeliefPair(0.95, 0.02)]
        verdict = decide_user(frames, skin_probability=0.3)
        assert verdict.fused.bel_n == 0.95
        assert verdict.fused is frames[2]
        assert verdict.decision == "normal"

    def test_single_frame(self):
        frames = [BeliefPair(0.2, 0.7)]
        verdict = decide_user(frames, skin_probability=0.7)
        assert verdict.fused is frames[0]
        assert verdict.decision == "misbehaving"

    def test_identical_frames_tie_earliest(self):
        frames = [BeliefPair(0.5, 0.5), BeliefPair(0.5, 0.5)]
        verdict = decide_user(frames, skin_probability=0.5)
        assert verdict.fused is frames[0]
        assert verdict.decision == "misbehaving"  # bel_f >= theta

    def test_theta_threshold(self):
        frames = [BeliefPair(0.4, 0.6)]
        assert decide_user(frames, 0.6, theta=0.7).decision == "normal"
        assert decide_user(frames, 0.6, theta=0.6).decision == "misbehaving"

    def test_empty_frames_raises(self):
        with pytest.raises(ValueError):
            decide_user([], 0.5)

    def test_fused_equals_max_exactly(self, rng):
        for _ in range(100):
            frames = [BeliefPair(rng.random() * 0.6, rng.random() * 0.4)
                      for _ in range(3)]
            verdict = decide_user(frames, 0.5)
            assert verdict.fused.bel_n == max(b.bel_n for b in frames)


class TestVerdict:
    def test_dark_verdict_shape(self):
        v = dark_verdict("u1")
        assert v.decision == "dark_webcam"
        assert v.fused is None and v.per_frame_beliefs == ()

    def test_fused_must_be_max(self):
        with pytest.raises(ValueError):
            Verdict(user_id="u", per_frame_beliefs=(BeliefPair(0.9, 0.05),),
                    fused=BeliefPair(0.5, 0.05), decision="normal",
                    skin_probability=0.1)

    def test_json_round_trip(self):
        frames = [BeliefPair(0.7, 0.2), BeliefPair(0.9, 0.05)]
        v = decide_user(frames, 0.2, user_id="u42",
                        evidence_log=[{"face": {"present": True, "box": [1, 2, 3, 4]}}],
                        sp=(0.1, 0.2, 0.3), skc_value=-0.5)
        again = Verdict.from_json(v.to_json())
        assert again == v

    def test_dark_json_round_trip(self):
        v = dark_verdict("u9")
        assert Verdict.from_json(v.to_json()) == v
