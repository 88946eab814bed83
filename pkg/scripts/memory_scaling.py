"""Peak tensor bytes versus sequence length, per attention op and per full train step."""
import argparse

from arena.attention import AttentionSpec
from arena.bench import attention_op_peak, measure_memory
from arena.model import EncoderConfig, build_encoder

SPECS = {
    "full": AttentionSpec.full(),
    "linformer": AttentionSpec.linformer(256, True),
    "elu1": AttentionSpec.kernel("elu1"),
    "favor+": AttentionSpec.kernel("favor_plus", 256),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lengths", type=int, nargs="+", default=[512, 1024, 2048, 4096])
    ap.add_argument("--batch", type=int, default=2)
    ap.add_argument("--model", action="store_true", help="also measure a 1-layer encoder train step")
    args = ap.parse_args()
    cfg = EncoderConfig(layers=1, heads=1, model_dim=16, ffn_dim=32, max_len=max(args.lengths) + 1, vocab_size=256)
    print(f"{'mechanism':<10}" + "".join(f"{n:>14}" for n in args.lengths) + "   growth per doubling")
    for name, spec in SPECS.items():
        peaks = [attention_op_peak(spec, n) for n in args.lengths]
        growth = [b / a for a, b in zip(peaks, peaks[1:])]
        print(f"{name:<10}" + "".join(f"{p:>14,}" for p in peaks) + "   " + " ".join(f"{g:.2f}" for g in growth))
        if args.model:
            p = build_encoder(cfg.with_attention(spec), 0)
            steps = [measure_memory(p, n, args.batch) for n in args.lengths]
            print(f"{'  step':<10}" + "".join(f"{s:>14,}" for s in steps))


if __name__ == "__main__":
    main()
