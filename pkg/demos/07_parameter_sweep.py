"""
Sweeping a material parameter from the command line
===================================================

The ``piezobeam`` command runs the same computations from a config file.
Here the core shear modulus is swept and the closed-loop abscissa of the
electrostatic sandwich model is collected in ``sweep.csv``. Running the
sweep twice gives byte-identical files.
"""
import csv
import filecmp

from piezobeam.cli import main

args = ["spectrum", "--config", "../configs/default.conf", "--model", "mm-static", "--N", "32",
        "--sweep", "G2:1e5:2e6:6"]
main(args + ["--out", "out/sweep_a"])
main(args + ["--out", "out/sweep_b"])

with open("out/sweep_a/sweep.csv") as fh:
    for row in csv.DictReader(fh):
        print(f"G2 = {float(row['G2']):9.3e}   abscissa = {float(row['abscissa']): .4e}")

print("identical:", filecmp.cmp("out/sweep_a/sweep.csv", "out/sweep_b/sweep.csv", shallow=False))
