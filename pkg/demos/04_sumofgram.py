"""A small SumOfGram run: SSMA against a sum baseline with the same parameter count.

Both models see multisets of four vectors in R^4 with entries uniform in
[-1, 1] and regress sum_{p<=q} <x_p, x_q>.  The sum baseline encodes each
element linearly to width m, sums, and applies an MLP head.  Only the sum of
the elements reaches the head, so it cannot recover the sum of squared norms
part of the label.  This run uses one seed and a short schedule; the full
grid is `ssma sumofgram`.
"""
from ssma.experiments import SumOfGramGrid, TrainConfig, summarize, train_sumofgram

grid = SumOfGramGrid(activations=("relu",), kappas=(4,), seeds=(0,), train=TrainConfig(max_epochs=60))
records = train_sumofgram(grid)
for r in records:
    print(f"{r.aggregator:5s} m={r.m:3d} params={r.param_count:5d} epochs={r.epochs:3d} "
          f"train L1 {r.train_l1:.3f}  test L1 {r.test_l1:.3f}  ({r.seconds:.0f}s)")
means = summarize(records)
print(f"\nsum / SSMA test L1 ratio: {means[('sum', 'relu', 65)] / means[('ssma', 'relu', 65)]:.2f}")
