"""
Mann-Whitney U on coverage samples
==================================

Exact p-values for small tie-free samples, the normal approximation
otherwise, and how close the two are at n = m = 8.
"""

# %%
import random

from rlexplore.harness.stats import mann_whitney_u, u_distribution

print(mann_whitney_u([1, 2, 3], [4, 5, 6]))
print(mann_whitney_u([5], [1]))
print(mann_whitney_u([3, 3, 4], [3, 4, 4]))

# %%
# null distribution of U for n = m = 3: 20 equally likely rank splits
dist = u_distribution(3, 3)
print(dist, sum(dist))

# %%
rng = random.Random(0)
gaps = []
for _ in range(1000):
    vals = rng.sample(range(10000), 16)
    a, b = vals[:8], vals[8:]
    gaps.append(abs(mann_whitney_u(a, b, "exact").p_value - mann_whitney_u(a, b, "normal").p_value))
print("largest exact/normal gap at n=m=8:", round(max(gaps), 4))

# %%
# two coverage samples like the ones a comparison produces
bonusmax = [951, 988, 1003, 929, 995, 970, 1012, 944, 981, 966]
random_walk = [736, 723, 741, 729, 750, 718, 733, 745, 726, 739]
print(mann_whitney_u(bonusmax, random_walk))
