import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from arena.attention import AttentionSpec
from arena.bench.tasks import synthetic_task_data
from arena.errors import ContractError, DimensionError, UnsupportedMechanismError
from arena.metrics import accuracy, approx_error, attention_span, favor_error_sweep, required_span, uniform_span
from arena.model import DESK_PRESETS, EncoderConfig, TrainConfig, build_encoder, train
from arena.substrate import Tensor
from arena.tokens import TokenSequence


def span64(w):
    """Plain double loop in Python floats."""
    n = len(w)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += float(w[i][j]) * abs(i - j)
    return total / n


def stochastic(rng, n, sparsity=0.0):
    w = rng.random((n, n))
    w[rng.random((n, n)) < sparsity] = 0.0
    w[np.arange(n), rng.integers(0, n, n)] += 1e-3
    return w / w.sum(axis=1, keepdims=True)


def test_identity_span_is_zero():
    assert attention_span(np.eye(7)) == 0.0


def test_uniform_row_from_position_zero():
    w = np.eye(4)
    w[0] = 0.25
    # row 0 contributes 1.5, every other row 0
    assert attention_span(w) == pytest.approx(1.5 / 4, abs=1e-12)
    assert attention_span(w) * 4 == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 64, 257])
def test_uniform_closed_form(n):
    assert attention_span(np.full((n, n), 1.0 / n)) == pytest.approx(uniform_span(n), abs=1e-9)


def test_random_8x8_against_double_loop():
    rng = np.random.default_rng(3)
    for _ in range(20):
        w = stochastic(rng, 8)
        assert abs(attention_span(w) - span64(w)) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 24), st.integers(0, 2**31 - 1), st.floats(0.0, 0.9))
def test_span_bounds(n, seed, sparsity):
    w = stochastic(np.random.default_rng(seed), n, sparsity)
    s = attention_span(w)
    assert 0.0 <= s <= n - 1 + 1e-9
    assert attention_span(w, normalize=True) == pytest.approx(s / n)


def test_block_diagonal_span_below_block_width():
    rng = np.random.default_rng(0)
    n, b = 32, 4
    w = np.zeros((n, n))
    for s in range(0, n, b):
        w[s:s + b, s:s + b] = rng.random((b, b))
    w /= w.sum(axis=1, keepdims=True)
    assert attention_span(w) < b


def test_span_is_linear_in_mixtures():
    rng = np.random.default_rng(1)
    a, b = stochastic(rng, 10), stochastic(rng, 10)
    assert attention_span(0.3 * a + 0.7 * b) == pytest.approx(0.3 * attention_span(a) + 0.7 * attention_span(b))


def test_exclude_cls_drops_first_position():
    n = 6
    w = np.full((n, n), 1.0 / n)
    assert attention_span(w, exclude_cls=True) == pytest.approx(uniform_span(n - 1))


@pytest.mark.parametrize("bad", [np.ones((3, 3)), np.array([[1.5, -0.5], [0.5, 0.5]])])
def test_non_stochastic_rows_rejected(bad):
    with pytest.raises(ContractError):
        attention_span(bad)


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        attention_span(np.full((2, 3), 1 / 3))


def _zero_logit_model(spec=None, max_len=33):
    cfg = EncoderConfig(layers=2, heads=2, model_dim=16, ffn_dim=32, max_len=max_len, vocab_size=15,
                        num_classes=10, attention=spec or AttentionSpec.full())
    p = build_encoder(cfg, 0)
    zero = {n: Tensor(np.zeros_like(p[n].data)) for n in p.names if n.split(".")[-1] in ("wq", "bq", "wk", "bk")}
    return p.replace(zero)


def _examples(n, length, seed=0):
    rng = np.random.default_rng(seed)
    return [(TokenSequence.of(rng.integers(0, 15, size=length)), 0) for _ in range(n)]


def test_required_span_uniform_closed_form():
    rep = required_span(_zero_logit_model(), _examples(12, 20), samples=1000)
    assert rep.samples == 12
    assert rep.per_head.shape == (2, 2)
    assert rep.aggregate == pytest.approx(uniform_span(21), abs=1e-5)  # 20 tokens + CLS
    assert rep.aggregate == pytest.approx(rep.per_head.mean())


def test_required_span_local_window_bound():
    spec = AttentionSpec.pattern("local", window=3)
    rep = required_span(_zero_logit_model(spec), _examples(6, 30), samples=10)
    assert (rep.per_head <= 3 + 1e-9).all()


def test_required_span_subsamples():
    rep = required_span(_zero_logit_model(), _examples(30, 8), samples=5)
    assert rep.samples == 5


@pytest.mark.parametrize("spec", [AttentionSpec.kernel("elu1"), AttentionSpec.linformer(8, True),
                                  AttentionSpec.lsh(1, 4, True)])
def test_required_span_rejects_weight_free(spec):
    cfg = EncoderConfig(layers=1, heads=1, model_dim=8, ffn_dim=8, max_len=17, vocab_size=15, attention=spec)
    with pytest.raises(UnsupportedMechanismError):
        required_span(build_encoder(cfg, 0), _examples(2, 8))


def test_span_report_dict_names_conventions():
    d = required_span(_zero_logit_model(), _examples(2, 8)).to_dict()
    assert d["includes_cls"] is True and d["normalized"] is False


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="desk-scale training moves the all-row span by < 1 token; the ordering "
                                        "is seed-dependent (see decisions ledger)")
def test_listops_span_exceeds_local_task_span():
    enc = replace(DESK_PRESETS["listops"]["encoder"], max_len=65)
    lo = synthetic_task_data("listops", 300, 64, 0, min_len=48)
    rng = np.random.default_rng(5)
    local = []
    for seq, _ in lo:
        ids = rng.integers(0, 4, size=int(seq.length))
        local.append((TokenSequence.of(ids), int((ids[1:] == ids[:-1]).mean() > 0.25)))
    tc = TrainConfig(steps=300, batch_size=32, learning_rate=1e-3, warmup_steps=30, seed=2)
    spans = []
    for data in (lo, local):
        p, _ = train(build_encoder(enc, 2), tc, data[:250])
        spans.append(required_span(p, data[250:]).aggregate)
    assert spans[0] > spans[1]


def test_accuracy_all_correct():
    assert accuracy(np.eye(4), [0, 1, 2, 3]) == 1.0


def test_accuracy_ties_go_to_lowest_index():
    labels = np.array([0, 1, 0, 2, 0])
    assert accuracy(np.zeros((5, 3)), labels) == pytest.approx((labels == 0).mean())


def test_accuracy_hand_count():
    logits = np.array([
        [0.1, 0.9], [0.8, 0.2], [0.5, 0.5], [0.3, 0.7], [0.6, 0.4],
        [0.2, 0.8], [0.9, 0.1], [0.4, 0.6], [0.45, 0.55], [0.7, 0.3],
    ])
    labels = [1, 0, 1, 1, 1, 0, 0, 1, 0, 0]
    # predictions 1 0 0 1 0 1 0 1 1 0, correct at indices 0 1 3 6 7 9
    assert accuracy(logits, labels) == 0.6


def test_accuracy_errors():
    with pytest.raises(ContractError):
        accuracy(np.zeros((0, 2)), [])
    with pytest.raises(DimensionError):
        accuracy(np.zeros((3, 2)), [0, 1])


def test_approx_error():
    a = np.arange(6.0).reshape(2, 3)
    assert approx_error(a, a) == (0.0, 0.0)
    b = a.copy()
    b[0, 0] += 0.6
    assert approx_error(b, a) == pytest.approx((0.6, 0.1))
    with pytest.raises(DimensionError):
        approx_error(a, a.T)


def test_favor_error_at_512_features():
    assert favor_error_sweep(ms=(512,), seeds=5)[512] < 0.05
