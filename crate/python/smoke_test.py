"""Build the extension with cargo and exercise it from Python.

Usage: python python/smoke_test.py [--release]
"""

import argparse
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build(release: bool) -> Path:
    cmd = ["cargo", "build", "-p", "fkgompertz-py"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)
    lib = ROOT / "target" / ("release" if release else "debug") / "libfkgompertz.so"
    dest = Path(tempfile.mkdtemp()) / "fkgompertz.so"
    shutil.copy(lib, dest)
    return dest.parent


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--release", action="store_true")
    args = ap.parse_args()
    sys.path.insert(0, str(build(args.release)))
    import fkgompertz as fk

    psi = fk.basis_values(1, [0.0])
    assert abs(psi[0][0] - 1 / math.sqrt(math.sinh(2.0))) < 1e-14

    mats = fk.structure(6)
    for i, row in enumerate(mats["S"]):
        assert abs(row[i] - 1.0) < 1e-10
        assert all(abs(v) < 1e-10 for v in row[:i])

    rows = fk.truncation_study(1)
    print("truncation", [(n, round(e, 4)) for _, n, e in rows])
    assert abs(rows[-1][2] - 0.012) < 0.05

    assert abs(fk.amplification(0.0) - (1 + math.log(2))) < 1e-12
    assert abs(fk.phi_inv(fk.phi(7.0)) - 7.0) < 1e-12

    model = fk.Model.preset(3)
    model.steps = 100
    n_t, n_a, n_x = model.validate()
    assert (n_t, n_x) == (101, 41)
    run = model.solve()
    assert run.blowup is None
    t, p = run.population()
    assert len(t) == n_t and all(v > 0 for v in p)
    dens = run.density(5.0)
    assert len(dens) == n_a and len(dens[0]) == n_x
    report = run.report()
    print("report", {k: report[k] for k in ("C", "dt_admissible", "max_norm_observed", "bound_2C")})

    out = Path(tempfile.mkdtemp())
    run.export(out, [5.0, 10.0])
    assert (out / "summary.csv").is_file()
    assert (out / "density_t10.000000.csv").is_file()

    bad = fk.Model.preset(1)
    bad.steps = 0
    try:
        bad.validate()
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("M = 0 accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
