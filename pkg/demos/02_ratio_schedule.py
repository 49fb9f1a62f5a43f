"""
Learning step ratios and their learning rates
=============================================

A ratio u:s means u gradient updates per s environment steps. Each ratio
gets its own five-point learning-rate grid, centred so that
(updates per step) x (learning rate) stays roughly constant.
"""

from fractions import Fraction

from replayratio.ratio import LearnRatio, lr_grid, updates_for_step

# %%
for text in ["4:1", "2:1", "1:1", "1:2", "1:4", "1:8", "1:16", "1:32"]:
    grid = lr_grid(text)
    print(f"{text:>5}  " + "  ".join(f"{lr:.2e}" for lr in grid))

# %%
# The schedule is exact: a Fraction accumulator carries the remainder, so
# 1:3 fires on steps 3, 6, 9, ... and 3:2 alternates 1, 2, 1, 2.
for text in ["1:3", "3:2"]:
    ratio, acc, counts = LearnRatio.parse(text), Fraction(0), []
    for _ in range(12):
        n, acc = updates_for_step(ratio, acc)
        counts.append(n)
    print(text, counts, "total", sum(counts))
