"""
Stability summary of the four closed loops
==========================================

Runs the spectral and time-domain checks for each reduced model under its
feedback law and prints the verdict next to the expected one.
"""
from piezobeam.acceptance import format_line, run_one

cache = {}
for k in (3, 4, 5, 6):
    print(format_line(run_one(k, cache)))

print()
for row in run_one(11, cache).data["rows"]:
    mark = "ok " if row["match"] else "!! "
    print(mark, f"{row['model']:<20s} {row['verdict']:<9s} expected {row['expected']:<9s} {row['evidence']}")
