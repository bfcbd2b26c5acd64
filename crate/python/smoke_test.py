"""Smoke test for the symclust Python extension.

Builds the extension with cargo (unless SYMCLUST_SKIP_BUILD is set or the
module is already importable), loads it, and exercises the main API.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_extension():
    try:
        import symclust  # noqa: F401 - installed, e.g. via maturin

        return symclust
    except ImportError:
        pass
    if not os.environ.get("SYMCLUST_SKIP_BUILD"):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "symclust-python"],
            cwd=ROOT,
            check=True,
        )
    built = ROOT / "target" / "release" / "libsymclust_py.so"
    if not built.exists():
        sys.exit(f"extension not found at {built}")
    target_dir = Path(tempfile.mkdtemp(prefix="symclust-py-"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(built, target_dir / f"symclust{suffix}")
    sys.path.insert(0, str(target_dir))
    import symclust

    return symclust


def main():
    sc = load_extension()

    assert sc.compute_weight(10, 200000, 3000000) == 150.0
    assert sc.sq_euclidean([1, 0, 0], [0, 1, 0]) == 2.0

    cats = ["x", "y", "z"]
    units = [
        ("a", [[0.8, 0.1, 0.1], [0.6, 0.2, 0.2]], [1.0, 2.0]),
        ("b", [[0.7, 0.2, 0.1], [0.5, 0.3, 0.2]], [2.0, 1.0]),
        ("c", [[0.1, 0.8, 0.1], [0.1, 0.1, 0.8]], [1.5, 1.5]),
        ("d", [[0.2, 0.7, 0.1], [0.2, 0.1, 0.7]], [1.0, 1.0]),
    ]
    ds = sc.Dataset(cats, ["v1", "v2"], units)
    assert len(ds) == 4 and ds.ids == ["a", "b", "c", "d"]
    again = sc.Dataset.from_json(ds.to_json())
    assert again.to_json() == ds.to_json()

    run = sc.run_leader(ds, 2, seed=3)
    assert run.labels[0] == run.labels[1] != run.labels[2] == run.labels[3]
    assert all(b <= a for a, b in zip(run.criterion_trace, run.criterion_trace[1:]))
    assert math.isclose(run.criterion, sc.partition_criterion(ds, run.labels), rel_tol=1e-12)

    tree = sc.agglomerate(ds)
    assert len(tree.merges) == 3
    heights = sum(m[2] for m in tree.merges)
    assert math.isclose(heights, sc.partition_criterion(ds, [0, 0, 0, 0]), rel_tol=1e-9)
    assert tree.cut(2) == [0, 0, 1, 1]
    assert tree.to_newick().endswith(";\n")

    report = sc.diagnostics(ds, [0, 0, 0, 0])
    assert report[0]["specificity"] == [0.0, 0.0]
    assert all(v == 1.0 for row in report[0]["contrasts"] for v in row)

    anova = sc.one_way_anova([[1, 2, 3], [2, 3, 4], [6, 7, 8]])
    assert math.isclose(anova["f_statistic"], 21.0, rel_tol=1e-12)
    assert math.isclose(anova["p_value"], 1 / 512, rel_tol=1e-9)

    try:
        sc.run_leader(ds, 9)
    except ValueError as e:
        assert "exceeds" in str(e)
    else:
        raise AssertionError("k > n accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
