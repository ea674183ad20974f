import math

import numpy as np
import pytest

from wmcollide.config import ExperimentConfig
from wmcollide.dataset import (
    Dataset,
    build_dataset,
    generate_slice,
    load_dataset,
    paraphrase_slice,
    save_dataset,
)
from wmcollide.detect import calibrate, score, tpr_at_fpr
from wmcollide.errors import BadConfigError, TooShortError
from wmcollide.pipeline import (
    GenerationJob,
    ParaphraseJob,
    generate,
    paraphrase,
    prompt_pool,
    retained_positions,
)
from wmcollide.toylm import BOS_ID, EOS_ID, UNK_ID, Role, TextSample
from wmcollide.watermark import make_scheme, null_scheme, token_is_green


def small_config(corpus, **overrides) -> ExperimentConfig:
    base = dict(
        corpus=str(corpus), order=3, alpha=1e-6, max_vocab=600,
        n_samples=10, max_new_tokens=48, min_sample_tokens=8,
        n_calibration=150, n_holdout=150, master_seed=99,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def strong_kgw():
    return make_scheme("kgw", "strong", 2024)


class TestGenerate:
    def test_deterministic(self, small_lm, small_pool, strong_kgw):
        job = dict(lm=small_lm, scheme=strong_kgw, prompt=small_pool[0], seed=42,
                   max_new_tokens=40)
        a = generate(GenerationJob(**job))
        b = generate(GenerationJob(**job))
        assert a.tokens == b.tokens
        assert a.audit_green == b.audit_green

    def test_zero_delta_equals_unwatermarked(self, small_lm, small_pool, strong_kgw):
        base = dict(lm=small_lm, prompt=small_pool[3], seed=7, max_new_tokens=40)
        plain = generate(GenerationJob(scheme=None, **base))
        zeroed = generate(GenerationJob(scheme=null_scheme(strong_kgw), **base))
        assert plain.tokens == zeroed.tokens
        assert plain.role is Role.UNWATERMARKED_GEN
        assert zeroed.role is Role.WATERMARKED

    def test_audit_flags_match_recomputation(self, small_lm, small_pool, strong_kgw):
        sample = generate(GenerationJob(lm=small_lm, scheme=strong_kgw,
                                        prompt=small_pool[5], seed=3, max_new_tokens=30))
        v = small_lm.vocab.size
        recomputed = [
            token_is_green(strong_kgw, sample.tokens[:i], t, v)
            for i, t in enumerate(sample.tokens)
        ]
        assert sample.audit_green == recomputed

    def test_strong_watermark_shifts_statistic(self, small_lm, small_pool, strong_kgw):
        # small-scale self-consistency check; the exact 128-token, n=200,
        # z > 4 for >= 90% version runs in test_acceptance on the full model
        v = small_lm.vocab.size
        z_wm, z_plain = [], []
        for i in range(60):
            prompt = small_pool[i % len(small_pool)]
            wm = generate(GenerationJob(lm=small_lm, scheme=strong_kgw,
                                        prompt=prompt, seed=1000 + i, max_new_tokens=64))
            plain = generate(GenerationJob(lm=small_lm, scheme=None,
                                           prompt=prompt, seed=1000 + i, max_new_tokens=64))
            if len(wm.tokens) >= 2 and len(plain.tokens) >= 2:
                z_wm.append(score(wm, strong_kgw, v).statistic)
                z_plain.append(score(plain, strong_kgw, v).statistic)
        assert np.mean(z_wm) - np.mean(z_plain) > 2.0

    def test_halts_at_eos_or_cap(self, small_lm, small_pool):
        sample = generate(GenerationJob(lm=small_lm, scheme=None,
                                        prompt=small_pool[1], seed=5, max_new_tokens=25))
        assert len(sample.tokens) <= 25
        if len(sample.tokens) < 25:
            assert sample.tokens[-1] == EOS_ID

    def test_empty_prompt_rejected(self, small_lm):
        with pytest.raises(BadConfigError):
            generate(GenerationJob(lm=small_lm, scheme=None, prompt=[], seed=1))
        with pytest.raises(BadConfigError):
            GenerationJob(lm=small_lm, scheme=None, prompt=[1], seed=1, max_new_tokens=0)


class TestRetainedPositions:
    def test_exact_cardinality(self):
        tokens = [5] * 37 + [UNK_ID] * 3  # 37 eligible
        kept = retained_positions(tokens, 0.5, seed=9)
        assert len(kept) == math.ceil(0.5 * 37)

    def test_deterministic_in_seed_only(self):
        tokens = list(range(3, 60))
        assert retained_positions(tokens, 0.3, 7) == retained_positions(tokens, 0.3, 7)
        assert retained_positions(tokens, 0.3, 7) != retained_positions(tokens, 0.3, 8)

    def test_reserved_positions_never_retained(self):
        tokens = [5, BOS_ID, 6, EOS_ID, 7, UNK_ID, 8, 9]
        kept = retained_positions(tokens, 1.0, 3)
        assert set(kept) == {0, 2, 4, 6, 7}

    def test_zero_rate_keeps_nothing(self):
        assert retained_positions([5] * 20, 0.0, 1) == []


class TestParaphrase:
    def test_full_retention_is_identity(self, small_lm, small_pool):
        src = generate(GenerationJob(lm=small_lm, scheme=None,
                                     prompt=small_pool[2], seed=11, max_new_tokens=40))
        out = paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=None,
                                       seed=4, retention_rate=1.0))
        assert out.tokens == src.tokens
        assert out.role is Role.PARAPHRASED_SINGLE

    def test_zero_retention_strong_scheme_detected(self, small_lm, small_pool):
        # small-scale version of the generate-and-score oracle; the exact
        # n=200 >= 90% version runs in test_acceptance on the full model
        v = small_lm.vocab.size
        p_cfg = make_scheme("kgw", "strong", 2023)
        nulls = [
            generate(GenerationJob(lm=small_lm, scheme=None,
                                   prompt=small_pool[i % len(small_pool)],
                                   seed=5000 + i, max_new_tokens=64))
            for i in range(150)
        ]
        null_scores = [score(s, p_cfg, v).statistic for s in nulls if len(s.tokens) >= 2]
        thr = calibrate(null_scores, 0.01)
        hits, total = 0, 0
        for src in nulls[:80]:
            if len(src.tokens) < 8:
                continue
            out = paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=p_cfg,
                                           seed=100 + total, retention_rate=0.0,
                                           copy_fidelity=0.0))
            total += 1
            hits += score(out, p_cfg, v).statistic > thr.value
        assert total > 60
        assert hits / total >= 0.70

    def test_half_retention_exact_positions(self, small_lm, small_pool):
        src = generate(GenerationJob(lm=small_lm, scheme=None,
                                     prompt=small_pool[4], seed=13, max_new_tokens=48))
        job = ParaphraseJob(lm=small_lm, source=src, scheme=None, seed=21,
                            retention_rate=0.5, copy_fidelity=0.0, fresh_rate=1.0)
        out = paraphrase(job)
        eligible = [i for i, t in enumerate(src.tokens)
                    if t not in (BOS_ID, EOS_ID, UNK_ID)]
        kept = retained_positions(src.tokens, 0.5, 21, job.retention_block)
        assert len(kept) == math.ceil(0.5 * len(eligible))
        for i in kept:
            assert out.tokens[i] == src.tokens[i]
        assert len(out.tokens) == len(src.tokens)

    def test_roles_and_provenance(self, small_lm, small_pool, strong_kgw):
        src = generate(GenerationJob(lm=small_lm, scheme=strong_kgw,
                                     prompt=small_pool[6], seed=17, max_new_tokens=40))
        p_cfg = make_scheme("prw", "weak", 2023)
        dual = paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=p_cfg, seed=1))
        assert dual.role is Role.PARAPHRASED_DUAL
        assert dual.watermarker_id == strong_kgw.scheme_id
        assert dual.paraphraser_id == p_cfg.scheme_id
        plain = paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=None, seed=1))
        assert plain.role is Role.PARAPHRASED_SINGLE
        assert plain.paraphraser_id is None

    def test_paired_retention_across_schemes(self, small_lm, small_pool, strong_kgw):
        src = generate(GenerationJob(lm=small_lm, scheme=strong_kgw,
                                     prompt=small_pool[7], seed=19, max_new_tokens=40))
        kept = set(retained_positions(src.tokens, 0.4, 33, 10))
        out_a = paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=None,
                                         seed=33, retention_rate=0.4, retention_block=10))
        out_b = paraphrase(ParaphraseJob(
            lm=small_lm, source=src, scheme=make_scheme("sir", "strong", 2023),
            seed=33, retention_rate=0.4, retention_block=10,
        ))
        for i in kept:
            assert out_a.tokens[i] == src.tokens[i]
            assert out_b.tokens[i] == src.tokens[i]

    def test_short_source_rejected(self, small_lm):
        src = TextSample(tokens=[5, 6, 7], role=Role.RAW)
        with pytest.raises(TooShortError):
            paraphrase(ParaphraseJob(lm=small_lm, source=src, scheme=None, seed=1))


class TestPromptPool:
    def test_prompts_are_long_enough(self, small_corpus, small_lm):
        pool = prompt_pool(small_corpus, small_lm, min_tokens=10)
        assert len(pool) >= 10
        assert all(len(p) >= 10 for p in pool)


class TestBuildDataset:
    def test_slice_counts(self, small_corpus, small_lm, small_pool):
        # combinatorial count oracle: 2 watermarkers x 2 paraphrasers
        config = small_config(small_corpus, kinds=["kgw", "prw"], strengths=["weak"],
                              z_min_kgw=float("-inf"), z_min_prw=float("-inf"))
        ds = build_dataset(config, small_lm, small_lm, small_pool)
        n, w_count, p_count = 10, 2, 2
        by_prefix = {}
        for s in ds.samples:
            by_prefix.setdefault(s.sample_id.split("/")[0], []).append(s)
        assert len(by_prefix["tw"]) == n * w_count
        assert len(by_prefix["twprime"]) == n * w_count
        assert len(by_prefix["tp"]) == n * w_count * p_count
        assert len(by_prefix["tpprime"]) == n * w_count

    def test_dual_provenance_distinct_ids(self, small_corpus, small_lm, small_pool):
        config = small_config(small_corpus, kinds=["kgw"], strengths=["weak"],
                              z_min_kgw=float("-inf"))
        ds = build_dataset(config, small_lm, small_lm, small_pool)
        for s in ds.in_slice("tp"):
            assert s.role is Role.PARAPHRASED_DUAL
            assert s.watermarker_id != s.paraphraser_id
            assert s.watermarker_id in ds.schemes
            assert s.paraphraser_id in ds.schemes

    def test_identical_config_identical_dataset(self, small_corpus, small_lm, small_pool, tmp_path):
        config = small_config(small_corpus, kinds=["prw"], strengths=["weak"],
                              z_min_prw=float("-inf"))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(build_dataset(config, small_lm, small_lm, small_pool), a)
        save_dataset(build_dataset(config, small_lm, small_lm, small_pool), b)
        assert a.read_bytes() == b.read_bytes()

    def test_round_trip(self, small_corpus, small_lm, small_pool, tmp_path):
        config = small_config(small_corpus, kinds=["sir"], strengths=["strong"])
        ds = build_dataset(config, small_lm, small_lm, small_pool)
        path = tmp_path / "ds.jsonl"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.vocab_size == ds.vocab_size
        assert loaded.schemes == ds.schemes
        assert [s.tokens for s in loaded.samples] == [s.tokens for s in ds.samples]
        assert [s.role for s in loaded.samples] == [s.role for s in ds.samples]

    def test_samples_rescoreable_from_stored_ids(self, small_corpus, small_lm, small_pool, tmp_path):
        # provenance completeness: scores derive from config ids alone
        config = small_config(small_corpus, kinds=["kgw"], strengths=["strong"])
        ds = build_dataset(config, small_lm, small_lm, small_pool)
        path = tmp_path / "ds.jsonl"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        for s in loaded.in_slice("tp")[:5]:
            for sid in (s.watermarker_id, s.paraphraser_id):
                res = score(s, loaded.schemes[sid], loaded.vocab_size)
                assert np.isfinite(res.statistic)


class TestSingleWatermarkSanity:
    def test_mismatched_key_detector_much_weaker(self, small_lm, small_pool):
        v = small_lm.vocab.size
        right = make_scheme("prw", "strong", 2024)
        wrong = make_scheme("prw", "strong", 2023)
        nulls = [
            generate(GenerationJob(lm=small_lm, scheme=None,
                                   prompt=small_pool[i % len(small_pool)],
                                   seed=9000 + i, max_new_tokens=64))
            for i in range(200)
        ]
        tw = generate_slice(small_lm, right, small_pool, 200, master_seed=1,
                            salt="x", id_prefix="x", max_new_tokens=64,
                            temperature=1.0, min_tokens=8, z_min=None)
        thr_right = calibrate([score(s, right, v).statistic for s in nulls if len(s.tokens) > 1], 0.01)
        thr_wrong = calibrate([score(s, wrong, v).statistic for s in nulls if len(s.tokens) > 1], 0.01)
        tpr_right = tpr_at_fpr([score(s, right, v).statistic for s in tw], thr_right)
        tpr_wrong = tpr_at_fpr([score(s, wrong, v).statistic for s in tw], thr_wrong)
        assert tpr_right - tpr_wrong >= 0.50

    def test_paraphrase_degrades_upstream_mean(self, small_lm, small_pool):
        v = small_lm.vocab.size
        w = make_scheme("kgw", "strong", 2024)
        tw = generate_slice(small_lm, w, small_pool, 60, master_seed=2,
                            salt="y", id_prefix="y", max_new_tokens=64,
                            temperature=1.0, min_tokens=16, z_min=None)
        tpp = paraphrase_slice(small_lm, tw, None, retention_rate=0.12,
                               temperature=1.0, id_prefix="z", retention_block=10,
                               copy_fidelity=3.5, fresh_rate=0.36)
        mean_tw = np.mean([score(s, w, v).statistic for s in tw])
        mean_tpp = np.mean([score(s, w, v).statistic for s in tpp])
        assert mean_tpp < mean_tw
