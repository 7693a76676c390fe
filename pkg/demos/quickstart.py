"""Generate one synthetic crack volume, segment it two ways, evaluate.

Runs in well under a minute on a laptop; no files are written.
"""

import numpy as np

import crackseg3d as cs

# -- generate: rough fractional-Brownian crack in a concrete phantom --------
phantom_over, comp_over = cs.generation_profile("high-contrast")
truth = cs.build_crack_mask(cs.CrackSpec(n=6, width=3, seed=1))
background = cs.synthesize_background(
    cs.PhantomSpec(dims=(64, 64, 64), seed=2, **phantom_over)
)
gray = cs.composite(background, truth, cs.CompositeParams(seed=3, **comp_over))
print(f"volume {gray.shape}, crack fraction {truth.mean():.3%}")

# -- segment with two tuned presets -----------------------------------------
for preset in ("frangi/w3/recall", "hp/w3/precision"):
    method, params = cs.resolve_preset(preset)
    pred = cs.segment(gray, method, params)
    for tol in (0, 1):
        m = cs.evaluate_pair(pred, truth, tol=tol)
        print(f"{preset:18s} tol={tol}: precision {m.precision:.3f} "
              f"recall {m.recall:.3f} F1 {m.f1:.3f}")
