import math

import numpy as np
import pytest

from conftest import unit
from lago.aggregation import (
    AggregationConfig,
    ViewSet,
    aggregate,
    assign_channels,
    channel_weights,
    classify,
    complete_views,
    fuse_channels,
    mix_weights,
)
from lago.config import RunConfig
from lago.geometry import FULL_IMAGE, BoundingBox, iou
from lago.search import CropOrigin, ScoredCrop
from lago.synth import SceneSpec, make_scene
from lago.two_stage import run_two_stage
from lago.vecmath import softmax


def crop(box, origin, sv=0.5, st=0.5, emb=None):
    emb = unit(1, 0) if emb is None else emb
    return ScoredCrop(box, emb, sv, st, sv, origin)


def search_crop(x=0.1, sv=0.5, st=0.5):
    return crop(BoundingBox(x, 0.1, 0.2, 0.2), CropOrigin.PROPOSAL_SEARCH, sv, st)


def random_crop(x=0.1, sv=0.5, st=0.5):
    return crop(BoundingBox(x, 0.6, 0.2, 0.2), CropOrigin.RANDOM_COMPLETION, sv, st)


class TestCompleteViews:
    def _config(self, **kw):
        return AggregationConfig(**{"views": 8, **kw})

    def test_no_vacancy_when_ranked_fills_views(self, scene_bundle):
        ranked, s1 = run_two_stage(scene_bundle, RunConfig().pipeline())
        cfg = self._config(views=len(ranked) + 1)
        vs = complete_views(ranked, scene_bundle, cfg, 0, w_text=s1.w_text, gamma=s1.gamma)
        assert all(vs.valid)
        assert sum(c.origin is CropOrigin.RANDOM_COMPLETION for c in vs.valid_crops()) == 0

    def test_slot_zero_is_full_image(self, scene_bundle):
        ranked, s1 = run_two_stage(scene_bundle, RunConfig().pipeline())
        vs = complete_views(ranked, scene_bundle, self._config(), 0, w_text=s1.w_text, gamma=s1.gamma)
        assert vs.crops[0].origin is CropOrigin.FULL_IMAGE
        assert vs.crops[0].box == FULL_IMAGE

    def test_tiny_tau_rand_pads_invalid(self, scene_bundle):
        full_cover = [crop(BoundingBox(0.0, 0.0, 1.0, 1.0), CropOrigin.PROPOSAL_SEARCH)]
        cfg = self._config(tau_rand=1e-6)
        vs = complete_views(full_cover, scene_bundle, cfg, 0)
        assert not all(vs.valid)
        assert sum(vs.valid) >= 1
        for c, ok in zip(vs.crops, vs.valid):
            assert ok == (c is not None)

    def test_same_seed_identical(self, scene_bundle):
        ranked, s1 = run_two_stage(scene_bundle, RunConfig().pipeline())
        a = complete_views(ranked, scene_bundle, self._config(), 7, w_text=s1.w_text, gamma=s1.gamma)
        b = complete_views(ranked, scene_bundle, self._config(), 7, w_text=s1.w_text, gamma=s1.gamma)
        assert [c.box if c else None for c in a.crops] == [c.box if c else None for c in b.crops]
        assert np.array_equal(a.full_logits, b.full_logits)
        c = complete_views(ranked, scene_bundle, self._config(), 8, w_text=s1.w_text, gamma=s1.gamma)
        assert [x.box if x else None for x in a.crops] != [x.box if x else None for x in c.crops]

    def test_accepted_randoms_satisfy_filter(self, scene_bundle):
        ranked = [search_crop(0.05), search_crop(0.45)]
        for include_full in (False, True):
            cfg = self._config(views=12, tau_rand=0.3, filter_full_image=include_full)
            vs = complete_views(ranked, scene_bundle, cfg, 3)
            accepted = [c.box for c in ranked]
            if include_full:
                accepted.append(FULL_IMAGE)
            for c in vs.valid_crops():
                if c.origin is not CropOrigin.RANDOM_COMPLETION:
                    continue
                assert all(iou(c.box, a) < cfg.tau_rand for a in accepted)
                accepted.append(c.box)


class TestAssignChannels:
    def test_origin_routing(self):
        vs = ViewSet(
            crops=[crop(FULL_IMAGE, CropOrigin.FULL_IMAGE)]
            + [search_crop(x) for x in (0.0, 0.3, 0.6)]
            + [random_crop(x) for x in (0.0, 0.2, 0.4, 0.6)],
            valid=[True] * 8,
            full_logits=np.zeros(2),
        )
        objects, contexts = assign_channels(vs)
        assert len(objects) == 3 and len(contexts) == 4
        assert all(c.origin is CropOrigin.PROPOSAL_SEARCH for c in objects)

    def test_all_search_views_empty_context(self):
        vs = ViewSet(
            crops=[crop(FULL_IMAGE, CropOrigin.FULL_IMAGE), search_crop()],
            valid=[True, True],
            full_logits=np.zeros(2),
        )
        objects, contexts = assign_channels(vs)
        assert contexts == []

    def test_padded_slots_excluded(self):
        vs = ViewSet(
            crops=[crop(FULL_IMAGE, CropOrigin.FULL_IMAGE), search_crop(), None, None],
            valid=[True, True, False, False],
            full_logits=np.zeros(2),
        )
        objects, contexts = assign_channels(vs)
        assert len(objects) == 1 and contexts == []


class TestChannelWeights:
    def test_uniform_visual_beta_zero(self):
        crops = [search_crop(sv=0.4) for _ in range(4)]
        w = channel_weights(crops, None, 0.05, 0.05, beta=0.0)
        assert np.allclose(w, 0.25, atol=1e-12)

    def test_text_only_matches_independent_softmax(self):
        crops = [search_crop(st=0.2), search_crop(x=0.5, st=0.4)]
        w = channel_weights(crops, None, 0.05, 0.1, beta=1.0)
        exps = [math.exp(2.0), math.exp(4.0)]
        expected = [e / sum(exps) for e in exps]
        assert np.allclose(w, expected, atol=1e-9)
        assert w[0] == pytest.approx(0.1192, abs=1e-4)
        assert w[1] == pytest.approx(0.8808, abs=1e-4)

    def test_even_mix_of_uniform_p_and_sharp_q(self):
        crops = [search_crop(sv=0.7, st=0.2), search_crop(x=0.5, sv=0.7, st=0.4)]
        w = channel_weights(crops, None, 0.05, 0.1, beta=0.5)
        exps = [math.exp(2.0), math.exp(4.0)]
        q = [e / sum(exps) for e in exps]
        expected = [0.5 * 0.5 + 0.5 * qq for qq in q]
        assert np.allclose(w, expected, atol=1e-9)
        assert w[0] == pytest.approx(0.3096, abs=1e-4)
        assert w[1] == pytest.approx(0.6904, abs=1e-4)

    def test_missing_text_scores_recomputed_against_prototype(self):
        c = ScoredCrop(BoundingBox(0, 0, 0.5, 0.5), unit(1, 1), 0.5, None, 0.5, CropOrigin.PROPOSAL_SEARCH)
        w = channel_weights([c, search_crop(st=0.0)], unit(1, 0), 0.05, 0.05, beta=1.0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 8))
            crops = [search_crop(x=0.05 * i, sv=rng.uniform(-1, 1), st=rng.uniform(-1, 1)) for i in range(n)]
            w = channel_weights(crops, None, 0.05, 0.05, beta=float(rng.uniform(0, 1)))
            assert w.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(w > 0) and np.all(w < 1 + 1e-12)


class TestAggregate:
    CFG = AggregationConfig(alpha_dc=0.6, lam=0.8)

    def test_single_crop_channels_analytic(self):
        objects = [search_crop(sv=0.5, st=0.5)]
        contexts = [random_crop(sv=0.5, st=0.5)]
        z_full = np.array([0.2, 0.2])
        z, detail = aggregate(
            objects, contexts, z_full,
            [np.array([0.4, 0.2])], [np.array([0.1, 0.3])],
            self.CFG,
        )
        assert np.allclose(detail.z_dc, [0.28, 0.24], atol=1e-12)
        assert np.allclose(z, [0.264, 0.232], atol=1e-12)

    def test_object_only_endpoint(self):
        cfg = AggregationConfig(alpha_dc=1.0, lam=1.0)
        z, detail = aggregate(
            [search_crop()], [random_crop()], np.array([9.0, 9.0]),
            [np.array([0.4, 0.2])], [np.array([0.1, 0.3])],
            cfg,
        )
        assert np.array_equal(z, detail.z_o)

    def test_lambda_zero_returns_full(self):
        cfg = AggregationConfig(lam=0.0)
        z_full = np.array([0.3, -0.1])
        z, _ = aggregate(
            [search_crop()], [random_crop()], z_full,
            [np.array([0.4, 0.2])], [np.array([0.1, 0.3])],
            cfg,
        )
        assert np.array_equal(z, z_full)

    def test_empty_object_channel_passes_context_through(self):
        z, detail = aggregate([], [random_crop()], np.zeros(2), [], [np.array([0.1, 0.3])], self.CFG)
        assert np.array_equal(detail.z_dc, detail.z_c)

    def test_both_channels_empty_gives_full(self):
        z_full = np.array([0.5, 0.1])
        z, _ = aggregate([], [], z_full, [], [], self.CFG)
        assert np.array_equal(z, z_full)

    def test_argmax_invariant_under_common_rescale(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            n_o, n_c = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            objects = [search_crop(x=0.05 * i, sv=rng.uniform(0, 1), st=rng.uniform(0, 1)) for i in range(n_o)]
            contexts = [random_crop(x=0.05 * i, sv=rng.uniform(0, 1), st=rng.uniform(0, 1)) for i in range(n_c)]
            so = [rng.uniform(-1, 1, 3) for _ in range(n_o)]
            sc = [rng.uniform(-1, 1, 3) for _ in range(n_c)]
            zf = rng.uniform(-1, 1, 3)
            scale = float(rng.uniform(0.1, 10))
            z1, _ = aggregate(objects, contexts, zf, so, sc, self.CFG)
            z2, _ = aggregate(objects, contexts, scale * zf, [scale * s for s in so], [scale * s for s in sc], self.CFG)
            assert int(np.argmax(z1)) == int(np.argmax(z2))

    def test_mix_weights_matches_softmax_helper(self):
        sv, st = np.array([0.1, 0.5]), np.array([0.9, 0.2])
        w = mix_weights(sv, st, 0.05, 0.1, 0.25)
        expected = 0.75 * softmax(sv / 0.05) + 0.25 * softmax(st / 0.1)
        assert np.allclose(w, expected, atol=1e-12)

    def test_fuse_channels_interpolation(self):
        z = fuse_channels(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5]), 0.6, 0.8)
        assert np.allclose(z, 0.8 * np.array([0.6, 0.4]) + 0.2 * np.array([0.5, 0.5]), atol=1e-12)


class TestClassify:
    def test_uniform_class_grid_is_always_right(self):
        spec = SceneSpec(
            grid_h=4, grid_w=4, dim=8, num_classes=3, descriptions_per_class=2,
            objects=((2, BoundingBox(0.0, 0.0, 1.0, 1.0)),), noise_sigma=0.0, seed=5,
        )
        bundle = make_scene(spec)
        cfg = RunConfig()
        for lam in (0.0, 0.5, 1.0):
            c = RunConfig(lam=lam)
            res = classify(bundle, c.pipeline(), c.aggregation(), 0)
            assert res.predicted == 2

    def test_lambda_zero_matches_full_image_baseline(self, scene_bundle):
        cfg = RunConfig(lam=0.0)
        res = classify(scene_bundle, cfg.pipeline(), cfg.aggregation(), 0)
        from lago.textbank import class_similarities

        baseline = class_similarities(scene_bundle.full_embedding, scene_bundle.text_bank)
        assert np.array_equal(res.z_final, baseline)
        assert res.predicted == int(np.argmax(baseline))

    def test_padding_neutrality_bit_identical(self, scene_bundle):
        cfg = RunConfig()
        pipe, agg = cfg.pipeline(), cfg.aggregation()
        ranked, s1 = run_two_stage(scene_bundle, pipe)
        from lago.textbank import class_similarities

        vs = complete_views(ranked, scene_bundle, agg, 0, w_text=s1.w_text, gamma=s1.gamma)
        objects, contexts = assign_channels(vs)
        so = [class_similarities(c.embedding, scene_bundle.text_bank) for c in objects]
        sc = [class_similarities(c.embedding, scene_bundle.text_bank) for c in contexts]
        z1, _ = aggregate(objects, contexts, vs.full_logits, so, sc, agg, s1.w_text)

        padded = ViewSet(
            crops=vs.crops + [None] * 5, valid=vs.valid + [False] * 5, full_logits=vs.full_logits
        )
        objects2, contexts2 = assign_channels(padded)
        so2 = [class_similarities(c.embedding, scene_bundle.text_bank) for c in objects2]
        sc2 = [class_similarities(c.embedding, scene_bundle.text_bank) for c in contexts2]
        z2, _ = aggregate(objects2, contexts2, padded.full_logits, so2, sc2, agg, s1.w_text)
        assert np.array_equal(z1, z2)

    def test_strategies_deterministic_and_distinct(self, scene_bundle):
        cfg = RunConfig()
        a = classify(scene_bundle, cfg.pipeline(), cfg.aggregation(), 0, "lago")
        b = classify(scene_bundle, cfg.pipeline(), cfg.aggregation(), 0, "lago")
        assert np.array_equal(a.z_final, b.z_final)
        r = classify(scene_bundle, cfg.pipeline(), cfg.aggregation(), 0, "random")
        assert [c.box for c in r.ranked] != [c.box for c in a.ranked]
        with pytest.raises(ValueError):
            classify(scene_bundle, cfg.pipeline(), cfg.aggregation(), 0, "other")
