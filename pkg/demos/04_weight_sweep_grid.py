"""Mapping the objective landscape with a grid of single-best samples.

Each grid cell re-weights the archive and keeps only the top candidate: rows
progressively relax the counterfactual quality weights (geometric schedule),
columns crossfade priority between two targeted outputs. The result
visualizes trade-offs without a single extra model call.
"""

from mcd import OptimizerConfig, SamplingRequest, TargetSpec, run_optimization
from mcd import bench2d
from mcd.sampler import alpha_pair_schedule, quality_weight_schedule, sweep

# Auxiliary objectives ride along during the search: maximize the bump output
# (peak_density) and minimize the band output (band_level).
problem = bench2d.make_problem("D2", with_aux_objectives=True)
archive = run_optimization(problem, OptimizerConfig(population=100, generations=100, seed=7))
print(f"archive: {len(archive)} candidates\n")

base = SamplingRequest(
    w_proximity=0.5, w_sparsity=0.2, w_manifold=0.5, w_diversity=0.2,
    targets=(
        TargetSpec(objective="peak_density", target=0.8),
        TargetSpec(objective="band_level", target=0.45),
    ),
)

rows, cols = 4, 4
row_schedule = quality_weight_schedule(rows, base=0.2, factor=2.0)      # w = 0.2 / 2^i
col_schedule = alpha_pair_schedule(cols, "peak_density", "band_level")  # alpha = 1.5^(n-j) vs 1.5^(j-1)
grid = sweep(archive, row_schedule, col_schedule, base)

print(f"{'':>6}" + "".join(f"   col {j+1} (alpha shift ->)" for j in range(cols)))
for i, row in enumerate(grid):
    cells = []
    for result in row:
        entry = result.entries[0]
        cells.append(f"({entry.values[0]:.2f},{entry.values[1]:.2f}) q={entry.quality:.2f}")
    print(f"row {i+1:>2} " + "  ".join(f"{c:<24}" for c in cells))

print("""
Top rows weight proximity/sparsity/manifold heavily, so picks hug the query;
lower rows free the search to chase targets. Left columns prioritize the
peak_density target, right columns the band_level target.
""")
