"""Measure how forward cost grows with the number of entities.

The latent-attention model keeps a fixed-size attention target, so its
map grows linearly in N; full pairwise attention grows quadratically and
trips the memory guard first. The guard compares the predicted map
footprint against the budget before any allocation happens.
"""

from eiformer.analysis import attention_map_bytes, bench_forward

report = bench_forward(["eiformer", "ivariate"],
                       [256, 512, 1024, 2048, 4096],
                       t=12, c=1, d=32, m=8, l=2, repeats=3,
                       memory_budget=2 ** 24)

print(f"{'arch':<10} {'N':>6} {'median s':>10} {'peak MiB':>9}  status")
for rec in report.records:
    med = f"{rec.median_seconds:.4f}" if rec.status == "ok" else "-"
    print(f"{rec.arch:<10} {rec.n:>6} {med:>10} "
          f"{rec.peak_bytes / 2**20:>9.1f}  {rec.status}")

print()
for arch in ("eiformer", "ivariate"):
    print(f"{arch}: log-log slope {report.slopes[arch]:.2f}")

# attention-map growth is exact arithmetic, not a measurement
for arch, expect in (("eiformer", 2), ("ivariate", 4)):
    ratio = attention_map_bytes(arch, 2048, 8) / attention_map_bytes(arch, 1024, 8)
    print(f"{arch}: map bytes double N -> x{ratio:.0f} (expected x{expect})")

report.write_csv("/tmp/demo_bench.csv")
report.write_plot_png("/tmp/demo_bench.png")
print("wrote /tmp/demo_bench.csv and /tmp/demo_bench.png")
