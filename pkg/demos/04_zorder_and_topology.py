"""Z-order patch sorting and the topology queries behind token assembly."""

from breptok.fixtures import generate_cube, generate_plate_with_holes
from breptok.topology import (
    LoopRec,
    face_adjacency,
    unfold_loop,
    validate_model,
    zorder_key,
)

print("z-order keys at depth 2 (x fastest):")
for y in range(3, -1, -1):
    print("  " + "  ".join(f"{zorder_key(x, y, 2):2d}" for x in range(4)))

loop = LoopRec(0, ((7, False), (8, False), (9, False)))
print(f"\nunfolded 3-edge loop, break at first edge: {unfold_loop(loop, 0)}")
print(f"unfolded 1-edge loop: {unfold_loop(LoopRec(1, ((4, False),)), 0)}")

cube = generate_cube()
report = validate_model(cube)
print(f"\ncube: valid={report.ok}, "
      f"neighbors per face: {sorted(len(v) for v in face_adjacency(cube).values())}")

plate = generate_plate_with_holes(seed=3)
adjacency = face_adjacency(plate)
counts = {fid: len(n) for fid, n in sorted(adjacency.items())}
print(f"plate with holes: {len(plate.faces)} faces, "
      f"neighbor counts {list(counts.values())}")
