"""Long ListOps: nested MAX/MIN/MEDIAN/SUM_MOD expressions with an exact evaluator."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import GenerationError, ParameterError, ParseError
from ..substrate import Rng
from ..tokens import TokenSequence

OPERATORS = ("MAX", "MIN", "MEDIAN", "SUM_MOD")
VOCAB = tuple(str(i) for i in range(10)) + tuple(f"[{op}" for op in OPERATORS) + ("]",)
TOKEN_ID = {t: i for i, t in enumerate(VOCAB)}
VOCAB_SIZE = len(VOCAB)  # 15 content symbols; the model appends PAD and CLS

_TOKEN_RE = re.compile(r"\s+|,|\[\s*([A-Z_]+)|\]|\d+|.", re.S)


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple  # of Node | int

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ParseError(f"unknown operator {self.op!r}")
        if len(self.args) < 1:
            raise ParseError(f"operator {self.op} has no operands")


def apply_op(op: str, values: list[int]) -> int:
    if op == "MAX":
        return max(values)
    if op == "MIN":
        return min(values)
    if op == "SUM_MOD":
        return sum(values) % 10
    s = sorted(values)
    mid = len(s) // 2
    # even count: floor of the mean of the two central values
    return s[mid] if len(s) % 2 else (s[mid - 1] + s[mid]) // 2


def eval_listops(expr) -> int:
    """Evaluate a tree, a token list, or a source string."""
    if isinstance(expr, (str, list, tuple)) and not isinstance(expr, Node):
        expr = parse(expr)
    if isinstance(expr, (int, np.integer)):
        return int(expr)
    # explicit stack so deep trees cannot hit the recursion limit
    stack = [(expr, [])]
    while True:
        node, done = stack[-1]
        if len(done) < len(node.args):
            child = node.args[len(done)]
            if isinstance(child, Node):
                stack.append((child, []))
            else:
                done.append(int(child))
            continue
        value = apply_op(node.op, done)
        stack.pop()
        if not stack:
            return value
        stack[-1][1].append(value)


def tokenize(text: str) -> list[str]:
    """Split source into vocabulary symbols; commas and whitespace are ignored."""
    out = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        if tok.isspace() or tok == ",":
            continue
        if tok.startswith("["):
            op = m.group(1)
            if op is None or op not in OPERATORS:
                raise ParseError(f"unknown operator at position {m.start()}: {tok!r}")
            out.append(f"[{op}")
        elif tok == "]":
            out.append(tok)
        elif tok.isdigit():
            if len(tok) != 1:
                raise ParseError(f"operand {tok!r} at position {m.start()} is not a single digit")
            out.append(tok)
        else:
            raise ParseError(f"unexpected character {tok!r} at position {m.start()}")
    return out


def parse(src) -> Node | int:
    """Parse a string or symbol list. Errors report the symbol index (or character offset)."""
    toks = tokenize(src) if isinstance(src, str) else [str(t) for t in src]
    if not toks:
        raise ParseError("empty expression at position 0")
    stack: list[tuple[str, list]] = []
    result = None
    for pos, tok in enumerate(toks):
        if result is not None:
            raise ParseError(f"trailing symbol {tok!r} at position {pos}")
        if tok.startswith("["):
            if tok[1:] not in OPERATORS:
                raise ParseError(f"unknown operator {tok!r} at position {pos}")
            stack.append((tok[1:], []))
        elif tok == "]":
            if not stack:
                raise ParseError(f"unbalanced ']' at position {pos}")
            op, args = stack.pop()
            if not args:
                raise ParseError(f"operator {op} closed without operands at position {pos}")
            node = Node(op, tuple(args))
            if stack:
                stack[-1][1].append(node)
            else:
                result = node
        elif tok in TOKEN_ID and tok.isdigit():
            if not stack:
                if len(toks) == 1:
                    return int(tok)
                raise ParseError(f"operand {tok!r} outside any operator at position {pos}")
            stack[-1][1].append(int(tok))
        else:
            raise ParseError(f"unknown symbol {tok!r} at position {pos}")
    if stack:
        raise ParseError(f"unclosed operator {stack[-1][0]} at position {len(toks)}")
    return result


def serialize(expr) -> list[str]:
    if isinstance(expr, (int, np.integer)):
        return [str(int(expr))]
    out: list[str] = []
    stack = [(expr, 0)]
    while stack:
        node, i = stack.pop()
        if i == 0:
            out.append(f"[{node.op}")
        if i < len(node.args):
            stack.append((node, i + 1))
            child = node.args[i]
            if isinstance(child, Node):
                stack.append((child, 0))
            else:
                out.append(str(child))
        else:
            out.append("]")
    return out


def to_text(expr) -> str:
    return " ".join(serialize(expr))


def encode_tokens(symbols) -> np.ndarray:
    try:
        return np.array([TOKEN_ID[s] for s in symbols], dtype=np.int32)
    except KeyError as exc:
        raise ParseError(f"unknown symbol {exc.args[0]!r}") from None


def depth(expr) -> int:
    if not isinstance(expr, Node):
        return 0
    return 1 + max(depth(a) for a in expr.args)


def _sample_tree(rng: Rng, level: int, max_depth: int, ops, max_args: int, p_nest: float) -> Node:
    op = ops[int(rng.integers(0, len(ops)))]
    n_args = int(rng.integers(2, max_args + 1))
    args = []
    for _ in range(n_args):
        if level < max_depth and rng.random() < p_nest:
            args.append(_sample_tree(rng, level + 1, max_depth, ops, max_args, p_nest))
        else:
            args.append(int(rng.integers(0, 10)))
    return Node(op, tuple(args))


def gen_listops(rng: Rng | int, max_len: int, max_depth: int, n: int, min_len: int = 0,
                ops=OPERATORS, max_args: int = 5, p_nest: float = 0.25, max_tries: int = 10000):
    """Sample ``n`` (symbols, label) pairs by rejection on serialized length.

    The root is always an operator; each operand nests with probability
    ``p_nest`` while the depth allows it. Returns a list of (list[str], int).
    """
    if max_len < 5:
        raise ParameterError(f"max_len must be >= 5, got {max_len}")
    if max_depth < 1 or max_args < 2 or n < 0:
        raise ParameterError("need max_depth >= 1, max_args >= 2, n >= 0")
    ops = tuple(ops)
    bad = [o for o in ops if o not in OPERATORS]
    if bad or not ops:
        raise ParameterError(f"operator set must be a non-empty subset of {OPERATORS}, got {ops}")
    if min_len > max_len:
        raise GenerationError(f"min_len {min_len} exceeds max_len {max_len}")
    rng = rng if isinstance(rng, Rng) else Rng(int(rng))
    out = []
    for _ in range(n):
        for _ in range(max_tries):
            tree = _sample_tree(rng, 1, max_depth, ops, max_args, p_nest)
            sym = serialize(tree)
            if min_len <= len(sym) <= max_len:
                out.append((sym, eval_listops(tree)))
                break
        else:
            raise GenerationError(f"no expression with length in [{min_len}, {max_len}] after {max_tries} tries "
                                  f"(max_depth={max_depth}, max_args={max_args})")
    return out


def label_histogram(samples) -> dict[int, int]:
    c = Counter(int(lbl) for _, lbl in samples)
    return {k: c.get(k, 0) for k in range(10)}


def to_sequences(samples) -> list[tuple[TokenSequence, int]]:
    return [(TokenSequence.of(encode_tokens(sym)), int(lbl)) for sym, lbl in samples]


def write_listops_tsv(path, samples) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sym, lbl in samples:
            fh.write(f"{' '.join(sym)}\t{int(lbl)}\n")
    return path


def read_listops_tsv(path) -> list[tuple[list[str], int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected tokens<TAB>label")
            try:
                lbl = int(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: label {parts[1]!r} is not an integer") from None
            if not 0 <= lbl <= 9:
                raise ParseError(f"{path}:{lineno}: label {lbl} outside 0-9")
            out.append((parts[0].split(" "), lbl))
    return out
