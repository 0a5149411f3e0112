"""Which parts of the pipeline earn their keep on a planted graph.

Run with ``python3 demos/ablations_and_sweeps.py``. A few minutes on one core.
"""

from wgcn.harness import Dataset, RunConfig, ablation_table, sweep
from wgcn.model import ModelConfig
from wgcn.synthetic import SyntheticSpec, generate_synthetic

# Weak features, so the graph has to carry the signal

g, table = generate_synthetic(SyntheticSpec(nodes_per_class=100, feature_signal=0.05, seed=5))
data = Dataset(graph=g, features=table.features, labels=table.labels, name="planted")
cfg = RunConfig(k=1, seeds=(0, 1, 2), model=ModelConfig(hidden=32, epochs=100))

print("variant        mean    std")
for row in ablation_table(cfg, data):
    print(f"{row['ablation']:14s} {row['mean']:.3f}  {row['std']:.3f}")

# Sensitivity to the tilt exponent

print("\nepsilon  mean")
for row in sweep(cfg, "epsilon", [1, 3, 5, 9], data):
    print(f"{row['value']:7d}  {row['mean']:.3f}")

# Tilt strength and restart probability together

print("\n  b    c    mean")
for row in sweep(cfg, "bc", [(0.1, 0.5), (0.3, 0.5), (0.7, 0.5), (0.3, 0.2), (0.3, 0.8)], data):
    b, c = row["value"]
    print(f"{b:4.1f} {c:4.1f}  {row['mean']:.3f}")
