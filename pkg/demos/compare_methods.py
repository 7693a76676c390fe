"""Run every classical method plus the random forest on one volume.

Reproduces, at desk scale, the kind of side-by-side comparison the
presets were tuned for.  Expect a few minutes of runtime (template
matching and adaptive morphology dominate).
"""

import time

import numpy as np

import crackseg3d as cs


def make_pair(seed, width=3, n=6):
    phantom_over, comp_over = cs.generation_profile("high-contrast")
    truth = cs.build_crack_mask(cs.CrackSpec(n=n, width=width, seed=seed))
    background = cs.synthesize_background(
        cs.PhantomSpec(dims=(2**n,) * 3, seed=seed + 1, **phantom_over)
    )
    gray = cs.composite(
        background, truth, cs.CompositeParams(seed=seed + 2, **comp_over)
    )
    return gray, truth


gray, truth = make_pair(10)

print(f"{'method':26s} {'P':>6s} {'R':>6s} {'F1':>6s}   time")
for method in ("sheet", "frangi", "template", "adaptive", "minpath", "hp"):
    preset = f"{method}/w3/recall"
    name, params = cs.resolve_preset(preset)
    start = time.monotonic()
    pred = cs.segment(gray, name, params)
    m = cs.evaluate_pair(pred, truth, tol=1)
    print(f"{preset:26s} {m.precision:6.3f} {m.recall:6.3f} {m.f1:6.3f}   "
          f"{time.monotonic() - start:5.1f}s")

# the forest needs its own training volumes
train = [make_pair(s) for s in (100, 200)]
start = time.monotonic()
forest = cs.train_forest(
    cs.assemble_training(train, cs.FeatureBankConfig()), seed=0
)
pred = cs.predict_forest(forest, gray)
m = cs.evaluate_pair(pred, truth, tol=1)
print(f"{'rf (trained, 2 pairs)':26s} {m.precision:6.3f} {m.recall:6.3f} "
      f"{m.f1:6.3f}   {time.monotonic() - start:5.1f}s")
