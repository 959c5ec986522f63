"""Decoder structure contracts: identities, equivariance, attention maps."""
import numpy as np
import pytest

from cql.decoder import (
    AttentionMaps,
    CategoryQueryBank,
    DecoderConfig,
    DecoderLayerParams,
    FeatureGrid,
    FfnParams,
    MhaParams,
    attention_heatmap,
    decode,
    decoder_layer,
    image_classify,
    mha,
)
from cql.errors import IndexOutOfRange, ShapeMismatch
from cql.numcore import Tensor, grad_check

SIGMOID_1 = 0.7310585786300049


def make_mha(rng, d, heads, zero_out=False, identity=False):
    def w():
        if identity:
            return Tensor(np.eye(d))
        return Tensor(rng.standard_normal((d, d)) * 0.2, requires_grad=True)

    wo = Tensor(np.zeros((d, d)) if zero_out else
                (np.eye(d) if identity else rng.standard_normal((d, d)) * 0.2),
                requires_grad=not (zero_out or identity))
    zeros = lambda: Tensor(np.zeros(d))
    return MhaParams(heads, w(), zeros(), w(), zeros(), w(), zeros(), wo, zeros())


def make_layer(rng, d, cfg, hidden=None, zero_out=False):
    hidden = hidden or cfg.ffn_hidden
    params = DecoderLayerParams()
    for letter in cfg.order:
        params.norms[letter] = (Tensor(np.ones(d)), Tensor(np.zeros(d)))
    if "C" in cfg.order:
        params.cross = make_mha(rng, d, cfg.heads, zero_out=zero_out)
    if "S" in cfg.order:
        params.self_attn = make_mha(rng, d, cfg.heads, zero_out=zero_out)
    if "F" in cfg.order:
        params.ffn = FfnParams(
            Tensor(rng.standard_normal((d, hidden)) * 0.2),
            Tensor(np.zeros(hidden)),
            Tensor(np.zeros((hidden, d)) if zero_out
                   else rng.standard_normal((hidden, d)) * 0.2),
            Tensor(np.zeros(d)))
    return params


def make_grid(rng, h, w, d):
    return FeatureGrid(Tensor(rng.standard_normal((h * w, d))), h, w)


class TestMha:
    def test_identical_keys_give_uniform_attention(self):
        rng = np.random.default_rng(0)
        d, n_kv = 8, 5
        p = make_mha(rng, d, 2)
        kv = Tensor(np.tile(rng.standard_normal(d), (n_kv, 1)))
        out, attn = mha(Tensor(rng.standard_normal((3, d))), kv, p)
        np.testing.assert_allclose(attn, np.full((2, 3, n_kv), 1 / n_kv), atol=1e-12)
        # every value row equal -> every output row equals the same projection
        np.testing.assert_allclose(out.data, np.tile(out.data[0], (3, 1)), atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        _, attn = mha(Tensor(rng.standard_normal((4, 8)) * 3),
                      Tensor(rng.standard_normal((6, 8)) * 3),
                      make_mha(rng, 8, 4))
        np.testing.assert_allclose(attn.sum(axis=2), np.ones((4, 4)), atol=1e-9)
        assert (attn >= 0).all() and (attn <= 1).all()

    def test_aligned_key_saturates(self):
        # identity projections, one key parallel to the scaled-up query
        rng = np.random.default_rng(2)
        d = 4
        p = make_mha(rng, d, 1, identity=True)
        u = np.zeros(d)
        u[0] = 1.0
        keys = np.vstack([u, np.eye(d)[1:]])  # aligned first, then orthogonal
        out, attn = mha(Tensor(100.0 * u.reshape(1, d)), Tensor(keys), p)
        assert attn[0, 0, 0] > 1 - 1e-6
        np.testing.assert_allclose(out.data[0], u, atol=1e-3)

    def test_width_mismatch(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ShapeMismatch):
            mha(Tensor(np.ones((2, 8))), Tensor(np.ones((3, 4))),
                make_mha(rng, 8, 2))


class TestDecoderLayer:
    def test_zero_projection_residual_identity(self):
        rng = np.random.default_rng(4)
        cfg = DecoderConfig(order="CSF", heads=2, ffn_hidden=16)
        q = Tensor(rng.standard_normal((5, 8)))
        grid = make_grid(rng, 2, 3, 8)
        out, _ = decoder_layer(q, grid, cfg, make_layer(rng, 8, cfg, zero_out=True))
        np.testing.assert_array_equal(out.data, q.data)

    def test_query_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        cfg = DecoderConfig(order="CSF", heads=2, ffn_hidden=16)
        params = make_layer(rng, 8, cfg)
        grid = make_grid(rng, 2, 2, 8)
        q = rng.standard_normal((6, 8))
        perm = rng.permutation(6)
        out, _ = decoder_layer(Tensor(q), grid, cfg, params)
        out_p, _ = decoder_layer(Tensor(q[perm]), grid, cfg, params)
        np.testing.assert_allclose(out_p.data, out.data[perm], atol=1e-12)

    @pytest.mark.parametrize("order", ["SCF", "CSF", "CF", "C", "F"])
    def test_orders_run(self, order):
        rng = np.random.default_rng(6)
        cfg = DecoderConfig(order=order, heads=2, ffn_hidden=16)
        q = Tensor(rng.standard_normal((3, 8)))
        out, cross = decoder_layer(q, make_grid(rng, 2, 2, 8), cfg,
                                   make_layer(rng, 8, cfg))
        assert out.shape == (3, 8)
        assert (cross is None) == ("C" not in order)

    @pytest.mark.parametrize("order", ["", "CC", "CSX"])
    def test_bad_orders_rejected(self, order):
        with pytest.raises(ValueError):
            DecoderConfig(order=order, heads=2).validate(8)


class TestDecode:
    def test_depth_zero_identity(self):
        rng = np.random.default_rng(7)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((4, 8))))
        cfg = DecoderConfig(depth=0, order="CSF", heads=2, ffn_hidden=16)
        refined, maps = decode(bank, make_grid(rng, 2, 2, 8), cfg, [])
        np.testing.assert_array_equal(refined.data, bank.queries.data)
        assert len(maps) == 0

    def test_output_shape_ignores_grid_size(self):
        rng = np.random.default_rng(8)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((5, 8))))
        cfg = DecoderConfig(depth=2, order="CSF", heads=2, ffn_hidden=16)
        for h, w in [(1, 1), (2, 5), (4, 4)]:
            layers = [make_layer(rng, 8, cfg) for _ in range(2)]
            refined, maps = decode(bank, make_grid(rng, h, w, 8), cfg, layers)
            assert refined.shape == (5, 8)
            assert len(maps) == 2 and maps.maps[0].shape == (2, 5, h * w)

    def test_zero_projection_stack_identity_any_depth(self):
        rng = np.random.default_rng(9)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((3, 8))))
        for depth in (1, 2, 3):
            cfg = DecoderConfig(depth=depth, order="CSF", heads=2, ffn_hidden=16)
            layers = [make_layer(rng, 8, cfg, zero_out=True) for _ in range(depth)]
            refined, _ = decode(bank, make_grid(rng, 2, 2, 8), cfg, layers)
            np.testing.assert_array_equal(refined.data, bank.queries.data)

    def test_positional_flag_changes_tokens_not_shape(self):
        rng = np.random.default_rng(10)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((3, 8))))
        grid = make_grid(rng, 2, 2, 8)
        base = DecoderConfig(depth=1, order="C", heads=2)
        layers = [make_layer(rng, 8, base)]
        plain, _ = decode(bank, grid, base, layers)
        pos = DecoderConfig(depth=1, order="C", heads=2, positional=True)
        shifted, _ = decode(bank, grid, pos, layers)
        assert shifted.shape == plain.shape
        assert not np.array_equal(shifted.data, plain.data)

    def test_gradients_reach_queries(self):
        rng = np.random.default_rng(11)
        cfg = DecoderConfig(depth=1, order="CSF", heads=2, ffn_hidden=8)
        grid = make_grid(rng, 2, 2, 4)
        layers = [make_layer(rng, 4, cfg)]

        def f(q):
            refined, _ = decode(CategoryQueryBank(q), grid, cfg, layers)
            return (refined * refined).mean()

        assert grad_check(f, Tensor(rng.standard_normal((3, 4)))) < 1e-5


class TestImageClassify:
    def test_zero_head_gives_half(self):
        refined = Tensor(np.random.default_rng(12).standard_normal((4, 8)))
        p = image_classify(refined, Tensor(np.zeros((4, 8))), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(p.data, np.full(4, 0.5))

    def test_constructed_unit_logit(self):
        rng = np.random.default_rng(13)
        refined = rng.standard_normal((3, 8))
        head = refined / (refined ** 2).sum(axis=1, keepdims=True)
        p = image_classify(Tensor(refined), Tensor(head), Tensor(np.zeros(3)))
        np.testing.assert_allclose(p.data, np.full(3, SIGMOID_1), atol=1e-12)

    def test_range_and_shape_guard(self):
        rng = np.random.default_rng(14)
        p = image_classify(Tensor(rng.standard_normal((4, 8)) * 50),
                           Tensor(rng.standard_normal((4, 8)) * 50),
                           Tensor(rng.standard_normal(4)))
        assert ((p.data > 0) & (p.data < 1)).all()
        with pytest.raises(ShapeMismatch):
            image_classify(Tensor(np.ones((4, 8))), Tensor(np.ones((3, 8))),
                           Tensor(np.zeros(3)))

    def test_head_permutation_tracks_queries(self):
        # category binding: permuting rows of bank and head permutes p
        rng = np.random.default_rng(15)
        refined = rng.standard_normal((5, 8))
        head = rng.standard_normal((5, 8))
        bias = rng.standard_normal(5)
        perm = rng.permutation(5)
        p = image_classify(Tensor(refined), Tensor(head), Tensor(bias)).data
        p_perm = image_classify(Tensor(refined[perm]), Tensor(head[perm]),
                                Tensor(bias[perm])).data
        np.testing.assert_allclose(p_perm, p[perm], atol=1e-12)


class TestAttentionHeatmap:
    def build(self, rng, h, w):
        cfg = DecoderConfig(depth=2, order="CSF", heads=2, ffn_hidden=16)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((3, 8))))
        layers = [make_layer(rng, 8, cfg) for _ in range(2)]
        return decode(bank, make_grid(rng, h, w, 8), cfg, layers)

    def test_shape_and_mass(self):
        _, maps = self.build(np.random.default_rng(16), 2, 3)
        hm = attention_heatmap(maps, 0, 1)
        assert hm.shape == (2, 3)
        assert abs(hm.data.sum() - 1.0) < 1e-9

    def test_uniform_tokens_give_uniform_map(self):
        rng = np.random.default_rng(17)
        cfg = DecoderConfig(depth=1, order="C", heads=2)
        bank = CategoryQueryBank(Tensor(rng.standard_normal((3, 8))))
        tokens = Tensor(np.tile(rng.standard_normal(8), (6, 1)))
        _, maps = decode(bank, FeatureGrid(tokens, 2, 3), cfg,
                         [make_layer(rng, 8, cfg)])
        hm = attention_heatmap(maps, 0, 0)
        np.testing.assert_allclose(hm.data, np.full((2, 3), 1 / 6), atol=1e-12)

    def test_index_guards(self):
        _, maps = self.build(np.random.default_rng(18), 2, 2)
        with pytest.raises(IndexOutOfRange):
            attention_heatmap(maps, 2, 0)
        with pytest.raises(IndexOutOfRange):
            attention_heatmap(maps, 0, 3)


class TestTypes:
    def test_grid_token_count_guard(self):
        with pytest.raises(ShapeMismatch):
            FeatureGrid(Tensor(np.ones((5, 8))), 2, 3)

    def test_bank_needs_matrix(self):
        with pytest.raises(ShapeMismatch):
            CategoryQueryBank(Tensor(np.ones(8)))

    def test_attention_maps_len(self):
        maps = AttentionMaps([np.ones((1, 2, 4)) / 4] * 2, 2, 2)
        assert len(maps) == 2
