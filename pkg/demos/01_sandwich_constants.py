"""
Sandwich-beam constants
=======================

The reduced bending/charge model is driven by a handful of lumped constants
built from the layer data. Here we derive them for the default beam, check
the positivity conditions that make the model well posed, and compare the
floating-point values with an exact rational evaluation.
"""
import numpy as np

from piezobeam import DEFAULT_SPEC, check_definiteness, derive_mm, derive_rn
from piezobeam.oracle import exact_constants, relative_gap

spec = DEFAULT_SPEC
print("layer thicknesses:", spec.h1, spec.h2, spec.h3)

# floating-point constants
mm = dict(derive_mm(spec).items())
for name, value in mm.items():
    print(f"  {name:>10s} = {value: .6e}")

# well-posedness: the stretching stiffness block is positive definite and the
# determinant of the sandwich block is positive
print(check_definiteness(spec))

# the same constants in exact arithmetic
exact = exact_constants(spec)
gaps = {k: relative_gap(mm[k], v) for k, v in exact.items() if k in mm}
print("largest relative gap to the rational evaluation: %.2e" % max(gaps.values()))

# the stretching model has its own, simpler set
print(derive_rn(spec))
