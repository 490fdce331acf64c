"""Lines in Z^2 that are not coarsely periodic: the golden-ratio Beatty line
drifts away from every cyclic orbit, slowly for good rational approximations."""
import math

from coarsegeo.cayley import build_ball, restricted_hausdorff
from coarsegeo.groups import GroupSpec
from coarsegeo.patterns import DigitizedLine, SubgroupOrbit, realize, vec

Z2 = GroupSpec.free_abelian(2)
DIRS = [(1, 0), (1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]

if __name__ == "__main__":
    radii = (50, 100, 200, 400)
    print("direction " + " ".join(f"R={R:<4d}" for R in radii))
    rows = {v: [] for v in DIRS}
    for R in radii:
        ball = build_ball(Z2, R)
        gold = realize(DigitizedLine(tag="golden"), ball)
        for v in DIRS:
            orbit = realize(SubgroupOrbit([vec(*v)]), ball)
            rows[v].append(restricted_hausdorff(ball, gold, orbit, guard=0, policy="reach"))
    for v, vals in rows.items():
        slope = v[1] / v[0]
        print(f"{str(v):9s} " + " ".join(f"{d:<6d}" for d in vals) + f" |phi - {slope:.3f}| = "
              f"{abs((1 + math.sqrt(5)) / 2 - slope):.4f}")
