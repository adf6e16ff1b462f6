"""Reproduce every refinement table and the quarter-core benchmark.

Drives the installed CLI once per (domain, degree) pair, so the output
CSVs land exactly as a user running `critifem converge ...` would get
them, then runs `critifem benchmark iaea2d`.  About two minutes total;
the 3-D study is the bulk of it.

    python scripts/run_convergence_tables.py [outdir]

Writes <domain>_k<degree>_study.csv per study plus iaea2d_k1.vtk into
outdir (default ./tables).
"""

import sys
import time

from critifem.app import cli

STUDIES = [
    ("square", 1, "8,16,32,64"),
    ("square", 2, "8,16,32,64"),
    ("square", 3, "8,16,32,64"),
    ("disk", 1, "8,16,32,64"),
    ("disk", 2, "8,16,32,64"),
    ("disk", 3, "8,16,32,64"),
    ("lshape", 2, "8,16,32,64"),
    ("cube", 1, "4,8,16,32"),
]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "tables"
    for domain, degree, resolutions in STUDIES:
        t0 = time.perf_counter()
        code = cli([
            "converge", "--domain", domain, "--degree", str(degree),
            "--resolutions", resolutions, "--out", out,
        ])
        if code != 0:
            return code
        print(f"[{domain} k={degree}: {time.perf_counter() - t0:.1f}s]\n")
    code = cli(["benchmark", "iaea2d", "--out", out])
    if code != 0:
        return code
    print(f"\nall tables in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
