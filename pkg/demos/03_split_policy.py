"""The train/val/test split policy at a glance.

Per class: up to 2500 images are sampled (seeded) into the test split; a
class at or below the threshold goes to test entirely, leaving it without
training data (reported as a warning). A 10% validation slice is carved
from whatever remains.

Run: python demos/03_split_policy.py
"""

from flowpix.pixels import split_dataset

class_sizes = {0: 3000, 1: 2500, 2: 2000, 3: 1, 4: 12000}
items = {cid: [f"img_{cid}_{i}" for i in range(n)] for cid, n in class_sizes.items()}

assignment, warnings = split_dataset(items, seed=42)

print(f"{'class':>5} {'total':>7} {'test':>6} {'val':>5} {'train':>6}")
for cid in sorted(assignment):
    buckets = assignment[cid]
    print(f"{cid:>5} {class_sizes[cid]:>7} {len(buckets['test']):>6} "
          f"{len(buckets['val']):>5} {len(buckets['train']):>6}")

print("\nwarnings:")
for warning in warnings:
    print(f"  {warning}")

again, _ = split_dataset(items, seed=42)
print(f"\nsame seed reproduces the assignment exactly: {assignment == again}")
other, _ = split_dataset(items, seed=43)
print(f"different seed changes it: {assignment != other}")
