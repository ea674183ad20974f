import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmcollide.detect import (
    CalibratedThreshold,
    calibrate,
    empirical_fpr,
    score,
    tpr_at_fpr,
    write_scores_csv,
    z_filter,
    z_statistic,
)
from wmcollide.errors import BadConfigError, CalibrationError, TooShortError
from wmcollide.toylm import Role, TextSample
from wmcollide.watermark import make_scheme

# ---------------------------------------------------------------------------
# Independent naive re-implementation of the detection side, built from the
# documented formulas only (SplitMix64 finalizer, hash-rank green lists,
# Box-Muller direction vectors).  Deliberately plain Python so that a bug in
# the vectorized code cannot hide in its own oracle.
# ---------------------------------------------------------------------------

MASK64 = (1 << 64) - 1


def naive_splitmix(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def naive_mix(*values):
    acc = 0
    for v in values:
        acc = naive_splitmix(acc ^ (v & MASK64))
    return acc


SENTINEL = 0xFFFFFFFF


def naive_kgw_green(cfg, prev, token, vocab_size):
    if cfg.seeding.value == "prev_token":
        seed = naive_mix(cfg.key, prev)
        scores = [naive_mix(seed, t) for t in range(vocab_size)]
    else:
        inner = naive_mix(cfg.key, prev)
        scores = [naive_splitmix(inner ^ t) for t in range(vocab_size)]
    assert len(set(scores)) == vocab_size, "hash tie would make ranking ambiguous"
    g = round(cfg.gamma * vocab_size)
    cutoff = sorted(scores)[g - 1] if g > 0 else -1
    return scores[token] <= cutoff


def naive_prw_green(cfg, token, vocab_size):
    scores = [naive_mix(cfg.key, t) for t in range(vocab_size)]
    g = round(cfg.gamma * vocab_size)
    cutoff = sorted(scores)[g - 1]
    return scores[token] <= cutoff


def naive_normal(seed, index):
    u1 = (naive_mix(naive_mix(seed, 1), index) >> 11) * 2.0**-53
    u2 = (naive_mix(naive_mix(seed, 2), index) >> 11) * 2.0**-53
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)


def naive_sir_aligned(cfg, context, token, vocab_size):
    d = 64
    token_salt = 0x51527C0DE5A1B3F7
    r = [naive_normal(token_salt, token * d + j) for j in range(d)]
    norm = math.sqrt(sum(x * x for x in r))
    r = [x / norm for x in r]
    chunk = list(context)[-cfg.chunk_length:] or [vocab_size]
    phi_seed = naive_mix(cfg.key, 3)
    e = [0.0] * d
    for t in chunk:
        for j in range(d):
            e[j] += naive_normal(phi_seed, t * d + j)
    return sum(a * b for a, b in zip(e, r)) >= 0.0


def naive_green_count(tokens, cfg, vocab_size):
    count = 0
    for i, tok in enumerate(tokens):
        if cfg.kind.value == "kgw":
            prev = tokens[i - 1] if i > 0 else SENTINEL
            count += naive_kgw_green(cfg, prev, tok, vocab_size)
        elif cfg.kind.value == "prw":
            count += naive_prw_green(cfg, tok, vocab_size)
        else:
            count += naive_sir_aligned(cfg, tokens[:i], tok, vocab_size)
    return count


class TestScore:
    def test_null_expectation_gives_zero(self):
        assert z_statistic(4, 16, 0.25) == 0.0

    def test_all_red_sixteen_tokens(self):
        # hand evaluation: (0 - 4) / sqrt(16 * 0.25 * 0.75) = -4 / sqrt(3)
        assert z_statistic(0, 16, 0.25) == pytest.approx(-4 / math.sqrt(3), abs=1e-9)

    def test_all_green_hundred_tokens(self):
        # hand evaluation: 75 / sqrt(18.75)
        assert z_statistic(100, 100, 0.25) == pytest.approx(75 / math.sqrt(18.75), abs=1e-9)

    def test_too_short_rejected(self):
        with pytest.raises(TooShortError):
            score([7], make_scheme("prw", "weak", 1), 16)

    def test_statistic_matches_formula(self):
        cfg = make_scheme("prw", "weak", 5)
        res = score([3, 7, 2, 9, 11, 4], cfg, 16)
        expect = z_statistic(res.green_count, res.token_count, cfg.gamma)
        assert res.statistic == pytest.approx(expect, abs=1e-9)
        assert 0 <= res.green_count <= res.token_count

    def test_adding_green_token_never_decreases_z(self):
        # direct formula evaluation with count and length both +1
        for n in range(2, 60):
            for g in range(n + 1):
                assert z_statistic(g + 1, n + 1, 0.25) >= z_statistic(g, n, 0.25) - 1e-12

    @pytest.mark.parametrize("kind,strength", [
        ("kgw", "weak"), ("kgw", "strong"), ("prw", "weak"), ("sir", "weak"),
    ])
    def test_brute_force_oracle_equivalence(self, kind, strength):
        # 100 random texts, |V| = 16, integer-equal green counts, z within 1e-9
        start = time.monotonic()
        cfg = make_scheme(kind, strength, 2024)
        rng = np.random.default_rng(12)
        for _ in range(100 // 4):
            tokens = rng.integers(0, 16, size=rng.integers(2, 21)).tolist()
            res = score(tokens, cfg, 16)
            expect_green = naive_green_count(tokens, cfg, 16)
            assert res.green_count == expect_green
            assert res.token_count == len(tokens)
            rate = 0.5 if kind == "sir" else cfg.gamma
            assert res.statistic == pytest.approx(
                z_statistic(expect_green, len(tokens), rate), abs=1e-9
            )
        assert time.monotonic() - start < 1.0

    def test_self_hash_oracle_equivalence(self):
        cfg = make_scheme("kgw", "weak", 2023, seeding="self_hash")
        rng = np.random.default_rng(13)
        for _ in range(25):
            tokens = rng.integers(0, 16, size=12).tolist()
            assert score(tokens, cfg, 16).green_count == naive_green_count(tokens, cfg, 16)


class TestCalibrate:
    def test_integer_scores_ten_percent(self):
        # sort-and-count oracle: exactly 10 of 1..100 exceed 90
        thr = calibrate(list(range(1, 101)), 0.10)
        assert thr.value == 90
        assert thr.n_calibration == 100

    def test_all_equal_scores(self):
        thr = calibrate([1.5] * 200, 0.05)
        assert thr.value == 1.5
        assert empirical_fpr([1.5] * 200, thr) == 0.0

    def test_thresholds_decrease_with_target(self):
        rng = np.random.default_rng(0)
        nulls = rng.normal(size=2000).tolist()
        t1 = calibrate(nulls, 0.01)
        t5 = calibrate(nulls, 0.05)
        t10 = calibrate(nulls, 0.10)
        assert t1.value >= t5.value >= t10.value

    def test_ties_resolve_toward_lower_fpr(self):
        scores = [1.0] * 50 + [2.0] * 49 + [3.0]
        thr = calibrate(scores, 0.02)
        # taking 2.0 would leave 1/100 above (ok), taking 1.0 would leave 50/100
        assert thr.value == 2.0
        assert empirical_fpr(scores, thr) <= 0.02

    def test_next_lower_candidate_would_exceed_target(self):
        rng = np.random.default_rng(1)
        nulls = np.round(rng.normal(size=500), 2).tolist()
        for target in (0.01, 0.05, 0.10):
            thr = calibrate(nulls, target)
            assert empirical_fpr(nulls, thr) <= target
            lower = [x for x in nulls if x < thr.value]
            if lower:
                assert empirical_fpr(nulls, CalibratedThreshold(max(lower), target, 500)) > target

    def test_too_few_scores(self):
        with pytest.raises(CalibrationError):
            calibrate([1.0] * 99, 0.1)
        with pytest.raises(BadConfigError):
            calibrate([1.0] * 200, 1.5)

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=100, max_size=400),
           st.sampled_from([0.01, 0.05, 0.10, 0.25]))
    def test_quantile_property(self, scores, target):
        thr = calibrate(scores, target)
        n = len(scores)
        assert sum(s > thr.value for s in scores) <= target * n + 1e-9
        assert thr.value in scores


class TestTprAtFpr:
    def test_full_separation(self):
        thr = CalibratedThreshold(2.0, 0.01, 100)
        assert tpr_at_fpr([5.0, 6.0, 9.0], thr) == 1.0

    def test_no_overlap(self):
        thr = CalibratedThreshold(2.0, 0.01, 100)
        assert tpr_at_fpr([0.0, 1.0, 2.0], thr) == 0.0  # ties count as negative

    def test_null_positives_track_target(self):
        # binomial CI oracle: p ~ fpr, n draws from the null itself
        rng = np.random.default_rng(2)
        nulls = rng.normal(size=4000).tolist()
        thr = calibrate(nulls, 0.10)
        fresh = rng.normal(size=4000).tolist()
        tpr = tpr_at_fpr(fresh, thr)
        assert abs(tpr - 0.10) < 3 * math.sqrt(0.1 * 0.9 / 4000) + 0.01

    def test_empty_rejected(self):
        with pytest.raises(BadConfigError):
            tpr_at_fpr([], CalibratedThreshold(0.0, 0.01, 100))


class TestZFilter:
    @staticmethod
    def _null_samples(n, rng, length=48):
        return [
            TextSample(tokens=rng.integers(0, 64, size=length).tolist(), role=Role.RAW)
            for _ in range(n)
        ]

    def test_minus_infinity_is_identity(self):
        rng = np.random.default_rng(3)
        samples = self._null_samples(20, rng)
        cfg = make_scheme("prw", "weak", 2024)
        assert z_filter(samples, cfg, float("-inf"), 64) == samples

    def test_threshold_four_on_null_text(self):
        # normal-tail oracle: P(Z > 4) ~ 3.2e-5, sampling slack allows ~0.5%
        rng = np.random.default_rng(4)
        samples = self._null_samples(1000, rng)
        cfg = make_scheme("prw", "weak", 2024)
        kept = z_filter(samples, cfg, 4.0, 64)
        assert len(kept) <= 5

    def test_filtered_set_rescores_above_threshold(self):
        rng = np.random.default_rng(5)
        samples = self._null_samples(400, rng)
        cfg = make_scheme("kgw", "weak", 2024)
        kept = z_filter(samples, cfg, 1.0, 64)
        assert kept
        assert all(score(s, cfg, 64).statistic >= 1.0 for s in kept)
        assert z_filter(kept, cfg, 1.0, 64) == kept


class TestScoresCsv:
    def test_round_trip_columns(self, tmp_path):
        cfg = make_scheme("prw", "weak", 9)
        res = score([1, 2, 3, 4, 5, 6, 7, 8], cfg, 16)
        path = tmp_path / "scores.csv"
        write_scores_csv(path, [("s0", res)])
        header, row = path.read_text().strip().split("\n")
        assert header == "sample_id,scheme_id,statistic,green_count,token_count"
        fields = row.split(",")
        assert fields[0] == "s0"
        assert float(fields[2]) == res.statistic
        assert int(fields[3]) == res.green_count
