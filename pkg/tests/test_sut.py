import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsmt.errors import InputDomainError
from pcsmt.geometry import FRAME_SIZE, Marker, MarkerSample, centroid, rotate_about, round_point
from pcsmt.sut import (
    CORRECT,
    PcsOutput,
    ReferenceSut,
    SutConfig,
    candidate_score,
    find_batch,
    find_true_markers,
    score_candidates,
    triples,
)

from .conftest import exact_triplet


def oracle_find(points, config):
    """Brute-force restatement of the decision rules, one candidate at a time."""
    cands = []
    for t in combinations(range(len(points)), 3):
        pts = [points[i] for i in t]
        cands.append((candidate_score(pts, config), min(p[0] for p in pts), min(p[1] for p in pts), t))
    ok = [c for c in cands if c[0] <= config.geometry.tolerance]
    if not ok:
        return PcsOutput.miss()
    best = min(ok)
    for c in ok:
        if c is not best and set(c[3]) & set(best[3]) and c[0] - best[0] < config.ambiguity_margin:
            return PcsOutput.miss()
    return PcsOutput.hit(*best[3])


def shifted(pts, dx, dy):
    return [Marker(p[0] + dx, p[1] + dy) for p in pts]


def test_single_exact_triplet():
    assert find_true_markers(exact_triplet()) == PcsOutput.hit(0, 1, 2)


def test_exact_replica_further_left_wins_tie():
    # Both triplets score exactly 0; the replica's minimum x (36000) beats the
    # true triplet's (56000), so rule (d) picks indexes 3..5.
    t = exact_triplet((60000, 60000))
    replica = shifted(t, -20000, 0)
    assert congruence_exact(replica)
    assert find_true_markers(t + replica) == PcsOutput.hit(3, 4, 5)


def test_exact_replica_further_right_loses_tie():
    t = exact_triplet((60000, 60000))
    assert find_true_markers(t + shifted(t, 20000, 0)) == CORRECT


def test_same_min_x_falls_back_to_min_y():
    t = exact_triplet((60000, 60000))
    assert find_true_markers(t + shifted(t, 0, -20000)) == PcsOutput.hit(3, 4, 5)
    assert find_true_markers(t + shifted(t, 0, 20000)) == CORRECT


def congruence_exact(pts):
    return candidate_score(pts, SutConfig()) == 0.0


def test_mirrored_side_pair_is_ambiguous():
    # Side pair copied 2 * top_offset across the top marker: (3, 4, 2) is a
    # second zero-score candidate sharing marker 2 with the true triplet.
    t = exact_triplet((60000, 60000))
    side = shifted(t[:2], 0, 6000)
    assert candidate_score([side[0], side[1], t[2]], SutConfig()) == 0.0
    assert find_true_markers(t + side) == PcsOutput.miss()


def test_near_side_pair_outside_margin_is_not_ambiguous():
    # 40 px shift: second candidate scores 40, gap 40 >= margin 1, true wins.
    t = exact_triplet((60000, 60000))
    side = shifted(t[:2], 0, 6040)
    assert candidate_score([side[0], side[1], t[2]], SutConfig()) == pytest.approx(40)
    assert find_true_markers(t + side) == CORRECT
    wide = SutConfig(ambiguity_margin=50)
    assert find_true_markers(t + side, wide) == PcsOutput.miss()


def test_nothing_in_tolerance():
    pts = [(0, 0), (100, 0), (0, 100), (5000, 5000)]
    assert find_true_markers(pts) == PcsOutput.miss()


def test_degenerate_triplet_not_found():
    t = exact_triplet()
    assert find_true_markers([t[0], t[0], t[2]]) == PcsOutput.miss()


def test_input_domain():
    with pytest.raises(InputDomainError):
        find_true_markers([(1, 1), (2, 2)])
    with pytest.raises(InputDomainError):
        find_true_markers([(i, i) for i in range(27)])


def test_pcs_output_invariants():
    with pytest.raises(ValueError):
        PcsOutput(True, (0, 0, 1))
    with pytest.raises(ValueError):
        PcsOutput(False, (0, 1, 2))
    with pytest.raises(ValueError):
        PcsOutput(True)
    assert PcsOutput.from_json({"found": True, "indexes": [3, 4, 5]}) == PcsOutput.hit(3, 4, 5)
    assert PcsOutput.from_json({"found": False}).to_json() == {"found": False}


def test_triples_are_lexicographic():
    t = triples(5)
    assert len(t) == 10
    assert [tuple(r) for r in t] == sorted(tuple(r) for r in t)


def test_vectorised_scores_match_scalar():
    rng = np.random.default_rng(11)
    cfg = SutConfig()
    pts = rng.integers(0, 20000, size=(3, 8, 2)).astype(float)
    pts[0, :3] = exact_triplet((9000, 9000))
    vec = score_candidates(pts, cfg)
    for b in range(3):
        for c, t in enumerate(triples(8)):
            s = candidate_score(pts[b, t], cfg)
            if math.isinf(s):
                assert math.isinf(vec[b, c])
            else:
                assert vec[b, c] == pytest.approx(s, abs=1e-9)


def _constructed_samples(rng, n):
    """Samples with exact replicas, mirrored side pairs, near misses and noise."""
    out = []
    for _ in range(n):
        c = (int(rng.integers(20000, 110000)), int(rng.integers(20000, 110000)))
        t = exact_triplet(c)
        kind = rng.integers(0, 4)
        if kind == 0:
            extra = shifted(t, int(rng.integers(-15000, 15000)), int(rng.integers(-15000, 15000)))
        elif kind == 1:
            extra = shifted(t[:2], int(rng.integers(-3, 4)), 6000 + int(rng.integers(-3, 4)))
        elif kind == 2:
            extra = shifted(t[:2], int(rng.integers(-150, 150)), int(rng.integers(-150, 150)))
        else:
            extra = []
        noise = [tuple(p) for p in rng.integers(0, FRAME_SIZE + 1, size=(int(rng.integers(0, 5)), 2))]
        out.append(t + list(extra) + noise)
    return out


def test_batch_agrees_with_brute_force_oracle():
    rng = np.random.default_rng(2024)
    cfg = SutConfig()
    samples = _constructed_samples(rng, 150)
    outs = ReferenceSut(cfg).find_many(samples)
    kinds = set()
    for s, out in zip(samples, outs):
        assert out == oracle_find(s, cfg)
        kinds.add("TP" if out == CORRECT else "FN" if not out.found else "FP")
    assert kinds == {"TP", "FP", "FN"}


def test_find_many_matches_single_calls():
    rng = np.random.default_rng(5)
    samples = _constructed_samples(rng, 40)
    sut = ReferenceSut()
    assert sut.find_many(samples) == [sut.find(s) for s in samples]


def test_determinism():
    rng = np.random.default_rng(9)
    samples = _constructed_samples(rng, 30)
    assert ReferenceSut().find_many(samples) == ReferenceSut().find_many(samples)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, FRAME_SIZE), st.integers(0, FRAME_SIZE)), min_size=2, max_size=10),
    st.randoms(use_true_random=False),
    st.booleans(),
)
def test_noise_permutation_contract(noise, rnd, with_replica):
    t = exact_triplet((60000, 60000))
    markers = list(t) + ([tuple(m) for m in shifted(t, -30000, 0)] if with_replica else []) + noise
    perm = list(range(3, len(markers)))
    rnd.shuffle(perm)
    order = [0, 1, 2] + perm
    permuted = [markers[i] for i in order]
    a = find_true_markers(markers)
    b = find_true_markers(permuted)
    assert a.found == b.found
    if a.found:
        assert sorted(markers[i] for i in a.indexes) == sorted(permuted[i] for i in b.indexes)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, FRAME_SIZE), st.integers(0, FRAME_SIZE)), max_size=8))
def test_unique_candidate_found_regardless_of_noise(noise):
    t = exact_triplet((60000, 60000))
    markers = t + noise
    cfg = SutConfig()
    n_ok = sum(
        candidate_score([markers[i] for i in c], cfg) <= cfg.geometry.tolerance
        for c in combinations(range(len(markers)), 3)
    )
    if n_ok == 1:
        assert find_true_markers(markers) == CORRECT


@pytest.mark.parametrize("angle", [45, 90, 135])
def test_rotated_replicas_exceed_tolerance(angle):
    rng = np.random.default_rng(angle)
    cfg = SutConfig()
    for _ in range(200):
        c = (int(rng.integers(10000, 120000)), int(rng.integers(10000, 120000)))
        t = exact_triplet(c)
        rep = [round_point(p) for p in rotate_about(t, centroid(t), angle)]
        assert candidate_score(rep, cfg) > cfg.geometry.tolerance
        # shape alone is still congruent; only the tilt gate rejects it
        assert candidate_score(rep, SutConfig(max_tilt_deg=90)) < 2.0


def test_config_validation():
    with pytest.raises(ValueError):
        SutConfig(ambiguity_margin=-1)
    with pytest.raises(ValueError):
        SutConfig(max_tilt_deg=91)


def test_find_batch_shape_checks():
    with pytest.raises(InputDomainError):
        find_batch(np.zeros((2, 3)), SutConfig())
    assert find_batch(np.array([exact_triplet()] * 3, dtype=float), SutConfig()) == [CORRECT] * 3
