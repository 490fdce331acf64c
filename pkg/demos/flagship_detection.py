"""Recover the center of F2 x Z from its fiber, and watch the precondition
checks reject patterns that do not qualify."""
from coarsegeo.detection import detect_subgroup
from coarsegeo.groups import GroupSpec
from coarsegeo.patterns import Fiber, GeodesicWordLine, SubgroupOrbit

F2 = GroupSpec.free(2)
F2xZ = GroupSpec.direct_product([F2, GroupSpec.free_abelian(1)])


def show(title, cert):
    print(f"{title}: {cert.status}")
    if cert.generators:
        print(f"  generators {cert.generators[:4]}  residual {cert.residual} <= {cert.residual_bound}")
        print(f"  clusters {cert.cluster_count}  mu {cert.mu}  stable at {cert.stability['region']}")
    for note in cert.notes:
        print(f"  note: {note}")


if __name__ == "__main__":
    show("center fiber of F2 x Z", detect_subgroup(F2xZ, Fiber(2), 1, (5, 10)))
    show("offset fiber a.<z>", detect_subgroup(F2xZ, Fiber(2, "a"), 1, (5, 10)))
    show("x-axis in Z^2", detect_subgroup(GroupSpec.free_abelian(2), SubgroupOrbit(["x"]), 1, 32))
    show("Thue-Morse line in F2", detect_subgroup(F2, GeodesicWordLine(tag="thue_morse"), 1, 6))
