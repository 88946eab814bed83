import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arena.errors import FormatError, GenerationError, ParameterError, ParseError
from arena.substrate import Rng
from arena.tasks import (
    Node, PathfinderParams, PixelSequence, eval_listops, gen_listops, gen_pathfinder, image_to_sequence,
    label_histogram, parse, read_listops_tsv, read_pixel_records, serialize, sidecar_for, to_sequences,
    tokenize, write_listops_tsv, write_pixel_records,
)
from arena.tasks.listops import depth


def oracle_eval(expr):
    """Independent recursive evaluator over the parse tree."""
    if isinstance(expr, int):
        return expr
    vals = [oracle_eval(a) for a in expr.args]
    if expr.op == "MAX":
        return max(vals)
    if expr.op == "MIN":
        return min(vals)
    if expr.op == "SUM_MOD":
        return sum(vals) % 10
    vals = sorted(vals)
    n = len(vals)
    return vals[n // 2] if n % 2 == 1 else int(np.floor((vals[n // 2 - 1] + vals[n // 2]) / 2))


def test_listops_examples():
    assert eval_listops("[MAX 4 3 [MIN 2 3] 1 0 [MEDIAN 1 5 8 9 2]]") == 5
    assert eval_listops("[MIN 2 3]") == 2
    assert eval_listops("[SUM_MOD 5 6 9]") == 0
    assert eval_listops("[MEDIAN 1 4]") == 2
    assert eval_listops("[MAX, 1, 2]") == 2


@pytest.mark.parametrize("src,pos", [("[MAX 1 2", None), ("[MAX 1 2 ]]", None), ("[FOO 1]", 0),
                                     ("[MAX 12]", 5), ("[MAX 1 x]", 7), ("[MIN ]", None)])
def test_parse_errors_report_position(src, pos):
    with pytest.raises(ParseError, match="position" if pos is None else f"position {pos}"):
        eval_listops(src)


def test_generated_labels_match_oracle():
    samples = gen_listops(Rng(1), 128, 4, 1000)
    for sym, lbl in samples:
        assert lbl == oracle_eval(parse(sym)) and len(sym) <= 128
    hist = label_histogram(samples)
    assert sum(hist.values()) == 1000


def test_depth_one_has_no_nesting():
    for sym, _ in gen_listops(Rng(2), 64, 1, 200):
        assert sum(s.startswith("[") for s in sym) == 1


def test_generation_errors():
    with pytest.raises(ParameterError):
        gen_listops(Rng(0), 4, 2, 1)
    with pytest.raises(GenerationError):
        gen_listops(Rng(0), 6, 1, 1, min_len=6, max_args=2)
    with pytest.raises(ParameterError):
        gen_listops(Rng(0), 32, 2, 1, ops=("MEAN",))


def test_operator_set_is_configurable():
    for sym, _ in gen_listops(Rng(3), 64, 3, 50, ops=("MAX", "SUM_MOD")):
        assert {s for s in sym if s.startswith("[")} <= {"[MAX", "[SUM_MOD"}


def test_listops_file_determinism(tmp_path):
    a = write_listops_tsv(tmp_path / "a.tsv", gen_listops(Rng(7), 64, 3, 100))
    b = write_listops_tsv(tmp_path / "b.tsv", gen_listops(Rng(7), 64, 3, 100))
    assert a.read_bytes() == b.read_bytes()
    back = read_listops_tsv(a)
    assert back == gen_listops(Rng(7), 64, 3, 100)
    seqs = to_sequences(back)
    assert all(s.ids.max() < 15 for s, _ in seqs)


trees = st.recursive(
    st.integers(0, 9),
    lambda kids: st.builds(lambda op, args: Node(op, tuple(args)),
                           st.sampled_from(["MAX", "MIN", "MEDIAN", "SUM_MOD"]), st.lists(kids, min_size=1, max_size=5)),
    max_leaves=40,
).filter(lambda t: isinstance(t, Node))


@settings(max_examples=300, deadline=None)
@given(trees)
def test_roundtrip_and_closure(tree):
    assert parse(serialize(tree)) == tree
    assert parse(" ".join(serialize(tree))) == tree
    v = eval_listops(tree)
    assert 0 <= v <= 9 and v == oracle_eval(tree)


def test_evaluator_fuzz_closure():
    r = Rng(11)
    from arena.tasks.listops import _sample_tree
    for _ in range(100_000 // 50):
        t = _sample_tree(r, 1, 3, ("MAX", "MIN", "MEDIAN", "SUM_MOD"), 4, 0.3)
        assert 0 <= eval_listops(t) <= 9


def test_deep_tree_does_not_recurse():
    tree = 3
    for _ in range(5000):
        tree = Node("MAX", (tree, 1))
    assert eval_listops(tree) == 3 and depth(Node("MIN", (1,))) == 1


def test_tokenize_ignores_commas():
    assert tokenize("[MAX 1,2]") == ["[MAX", "1", "2", "]"]


# ---------------------------------------------------------------- pathfinder

def test_pathfinder_labels_match_construction():
    scenes = gen_pathfinder(Rng(0), 32, 1000, return_scenes=True)
    for s in scenes:
        same = s.markers[0][0] == s.markers[1][0]
        assert same == bool(s.label) == s.markers_connected(2)
        assert s.grid.shape == (32, 32) and set(np.unique(s.grid)) <= {0, 255}
        c = s.marker_centers()
        assert np.linalg.norm(c[0] - c[1]) >= 2.0


def test_pathfinder_sizes_and_scaling():
    (seq, _), = gen_pathfinder(Rng(1), 32, 1)
    assert len(seq) == 1024
    (big, _), = gen_pathfinder(Rng(1), 128, 1)
    assert len(big) == 16384
    a, b = PathfinderParams(size=32), PathfinderParams(size=128)
    assert b.length == 4 * a.length and b.radius == 4 * a.radius
    assert (a.dash, a.gap, a.distractors) == (b.dash, b.gap, b.distractors)
    with pytest.raises(ParameterError):
        PathfinderParams(size=64)
    with pytest.raises(ParameterError):
        PathfinderParams(distractors=0)


def test_pathfinder_determinism_and_records(tmp_path):
    a = gen_pathfinder(Rng(5), 32, 20)
    b = gen_pathfinder(Rng(5), 32, 20)
    side = sidecar_for(PathfinderParams(), 5, 20)
    pa = write_pixel_records(tmp_path / "a.bin", a, side)
    pb = write_pixel_records(tmp_path / "b.bin", b, side)
    assert pa.read_bytes() == pb.read_bytes()
    assert pa.stat().st_size == 20 * (4 + 1024 + 1)
    back = read_pixel_records(pa)
    for (s1, l1), (s2, l2) in zip(a, back):
        assert l1 == l2 and np.array_equal(s1.tokens, s2.tokens) and (s2.height, s2.width) == (32, 32)
    (tmp_path / "bad.bin").write_bytes(pa.read_bytes()[:-3])
    with pytest.raises(FormatError):
        read_pixel_records(tmp_path / "bad.bin")


def test_image_to_sequence_examples():
    np.testing.assert_array_equal(image_to_sequence([[1, 2], [3, 4]]).tokens, [1, 2, 3, 4])
    seq = image_to_sequence(np.full((32, 32), 255))
    assert len(seq) == 1024 and (seq.tokens == 255).all()
    g = np.random.default_rng(0).integers(0, 256, size=(7, 5))
    np.testing.assert_array_equal(image_to_sequence(g).to_grid(), g)
    with pytest.raises(Exception):
        PixelSequence(np.zeros(5), 2, 2)
