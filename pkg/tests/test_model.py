import numpy as np
import pytest

from arena.attention import AttentionSpec
from arena.errors import ConfigError, LengthError, TrainingError
from arena.model import (
    FULL_PRESETS, EncoderConfig, ForwardContext, TrainConfig, build_encoder, encode, forward_classify,
    forward_match, load_checkpoint, match_features, save_checkpoint, train,
)
from arena.model.train import loss_and_grads
from arena.substrate import Tensor
from arena.tokens import TokenBatch, TokenSequence
from helpers import gradcheck

ALL_SPECS = [
    AttentionSpec.full(), AttentionSpec.pattern("local", 3), AttentionSpec.pattern("strided", 3),
    AttentionSpec.pattern("fixed", 3), AttentionSpec.pattern("longformer", 2), AttentionSpec.pattern("bigbird", 2),
    AttentionSpec.linformer(8), AttentionSpec.kernel(), AttentionSpec.kernel("favor_plus", num_features=32),
    AttentionSpec.lsh(2, 4), AttentionSpec.sinkhorn(4), AttentionSpec.synthesizer("dense"),
    AttentionSpec.synthesizer("random"),
]


def small(spec=None, **kw):
    base = dict(layers=2, heads=2, model_dim=8, ffn_dim=16, max_len=17, vocab_size=12, num_classes=10,
                attention=spec or AttentionSpec.full())
    base.update(kw)
    return EncoderConfig(**base)


def seqs(seed, lengths, vocab=12):
    r = np.random.default_rng(seed)
    return [TokenSequence.of(r.integers(0, vocab, size=n)) for n in lengths]


def test_build_is_deterministic_and_validates():
    a, b = build_encoder(small(), 3), build_encoder(small(), 3)
    for n in a.names:
        np.testing.assert_array_equal(a[n].data, b[n].data)
    with pytest.raises(ConfigError):
        small(layers=0)
    with pytest.raises(ConfigError):
        small(model_dim=9)


def test_image_preset_parameter_count():
    cfg = FULL_PRESETS["image"]["encoder"]
    d, f, layers, vocab, length, classes = 64, 128, 3, 256 + 2, 1025, 10
    per_layer = 4 * (d * d + d) + 2 * (2 * d) + (d * f + f) + (f * d + d)
    expected = vocab * d + length * d + layers * per_layer + 2 * d + (d * d + d) + (d * classes + classes)
    assert build_encoder(cfg, 0).count() == expected


def test_non_attention_shapes_identical_across_mechanisms():
    def outside(cfg):
        shapes = {n: t.shape for n, t in build_encoder(cfg, 0).tensors.items()}
        return {n: s for n, s in shapes.items() if any(k in n for k in ("embed", "pos", "ln", "ff_", "head_"))}

    ref = outside(small())
    for s in ALL_SPECS:
        assert outside(small(s)) == ref


def test_non_attention_values_shared_for_same_seed():
    a, b = build_encoder(small(), 5), build_encoder(small(AttentionSpec.linformer(4)), 5)
    np.testing.assert_array_equal(a["layer1.ff_w1"].data, b["layer1.ff_w1"].data)


def test_listops_head_has_ten_logits_and_zero_head():
    p = build_encoder(small(), 0)
    lg = forward_classify(p, seqs(0, [9]))
    assert lg.shape == (1, 10)
    t = dict(p.tensors)
    t["head_w2"], t["head_b2"] = Tensor(np.zeros((8, 10))), Tensor(np.zeros(10))
    np.testing.assert_array_equal(forward_classify(p.replace(t), seqs(1, [4, 11])).data, 0.0)


def test_logits_sensitive_to_every_token():
    cfg = small(max_len=33, layers=1)
    p = build_encoder(cfg, 1)
    base = seqs(2, [32])[0]
    ref = forward_classify(p, [base]).data
    for pos in range(32):
        ids = base.ids.copy()
        ids[pos] = (ids[pos] + 1) % 12
        assert np.abs(forward_classify(p, [TokenSequence.of(ids)]).data - ref).max() > 0


def test_over_length_input_rejected():
    p = build_encoder(small(), 0)
    with pytest.raises(LengthError):
        forward_classify(p, seqs(0, [17]))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
def test_padding_never_changes_logits(spec):
    p = build_encoder(small(spec), 0)
    batch = seqs(3, [5, 16, 9])
    together = forward_classify(p, batch).data
    for i, s in enumerate(batch):
        alone = forward_classify(p, [s]).data[0]
        assert np.abs(together[i] - alone).max() < 1e-5
    # explicit trailing pads in the id array are ignored too
    padded = TokenSequence(np.concatenate([batch[0].ids, np.full(6, 7)]), batch[0].length)
    assert np.abs(forward_classify(p, [padded]).data[0] - together[0]).max() < 1e-5


def test_match_head_construction():
    cfg = small(head_kind="match", num_classes=2)
    p = build_encoder(cfg, 0)
    assert p["head_w1"].shape[0] == 4 * cfg.model_dim
    d1, d2 = seqs(4, [6, 10])
    x1, x2 = encode(p, [d1]), encode(p, [d2])
    same = match_features(x1, x1).data
    np.testing.assert_array_equal(same[:, 24:], 0.0)
    f12, f21 = match_features(x1, x2).data, match_features(x2, x1).data
    np.testing.assert_array_equal(f12[:, :8], f21[:, 8:16])
    np.testing.assert_array_equal(f12[:, 16:24], f21[:, 16:24])
    np.testing.assert_array_equal(f12[:, 24:], -f21[:, 24:])
    assert forward_match(p, [d1], [d2]).shape == (1, 2)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
def test_end_to_end_gradient_wrt_embeddings(spec):
    cfg = small(spec)
    p = build_encoder(cfg, 1)
    batch = TokenBatch.stack(seqs(5, [15, 11]))

    def fn(embed):
        t = dict(p.tensors)
        t["embed"] = embed
        return forward_classify(p.replace(t), batch)

    # finite differences are only valid away from ReLU kinks (FFN, head); at h=1e-3 some
    # instances straddle one, so the float64 oracle uses h=1e-4 on an instance that does not
    assert gradcheck(fn, [p["embed"].data], h=1e-4) < 1e-3


def _toy(n, seed=0):
    r = np.random.default_rng(seed)
    xs = seqs(seed, r.integers(4, 12, size=n))
    return [(x, int(x.tokens[0]) % 3) for x in xs]


def test_overfit_probe():
    data = _toy(16)
    cfg = small(num_classes=3)
    p = build_encoder(cfg, 0)
    tc = TrainConfig(steps=200, batch_size=16, learning_rate=3e-3, warmup_steps=10)
    _, hist = train(p, tc, data)
    assert hist.loss[-1] < 0.1 * hist.loss[0]


def test_zero_lr_leaves_params_and_same_seed_same_curve():
    data = _toy(12)
    p = build_encoder(small(num_classes=3), 0)
    q, _ = train(p, TrainConfig(steps=5, batch_size=4, learning_rate=0.0, warmup_steps=0, weight_decay=0.1), data)
    for n in p.names:
        np.testing.assert_array_equal(p[n].data, q[n].data)
    tc = TrainConfig(steps=6, batch_size=4, learning_rate=1e-3, warmup_steps=2)
    spec = small(AttentionSpec.kernel("favor_plus", num_features=16), num_classes=3, dropout=0.1)
    h1 = train(build_encoder(spec, 1), tc, data)[1].loss
    h2 = train(build_encoder(spec, 1), tc, data)[1].loss
    assert h1 == h2


def test_warmup_is_linear():
    data = _toy(8)
    _, hist = train(build_encoder(small(num_classes=3), 0), TrainConfig(steps=6, batch_size=2,
                                                                          learning_rate=1.0e-3, warmup_steps=4), data)
    np.testing.assert_allclose(hist.lr, [2.5e-4, 5e-4, 7.5e-4, 1e-3, 1e-3, 1e-3])


def test_nan_loss_names_step():
    p = build_encoder(small(num_classes=3), 0)
    t = dict(p.tensors)
    t["head_b2"] = Tensor(np.array([np.nan, 0, 0]))
    with pytest.raises(TrainingError, match="step 1"):
        train(p.replace(t), TrainConfig(steps=2, batch_size=2, warmup_steps=0), _toy(4))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(steps=5, warmup_steps=6)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    for spec in (AttentionSpec.linformer(4, shared_kv=False), AttentionSpec.synthesizer("dense")):
        p = build_encoder(small(spec), 9)
        path = save_checkpoint(p, tmp_path / "m.ckpt", extra={"step": 3})
        q, extra = load_checkpoint(path)
        assert extra == {"step": 3} and q.config == p.config and q.meta == p.meta
        for n in p.names:
            assert q[n].data.tobytes() == p[n].data.tobytes()
        assert save_checkpoint(q, tmp_path / "m2.ckpt", extra={"step": 3}).read_bytes() == path.read_bytes()


def test_matching_gradients_flow_through_both_towers():
    cfg = small(head_kind="match", num_classes=2)
    p = build_encoder(cfg, 0)
    d1, d2 = TokenBatch.stack(seqs(6, [7])), TokenBatch.stack(seqs(7, [9]))
    loss, grads = loss_and_grads(p, (d1, d2), np.array([1]))
    assert np.abs(grads["embed"].data).sum() > 0 and np.isfinite(loss.item())
