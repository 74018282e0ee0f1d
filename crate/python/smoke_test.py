"""Smoke test for the ags_hbprm extension.

Install the module first (``maturin develop -m crates/python/Cargo.toml``) or
build it with ``cargo build -p ags-python --release``; in the second case the
shared library is loaded straight from ``target/release``.
"""

import importlib.machinery
import importlib.util
import math
import os
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        import ags_hbprm

        return ags_hbprm
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libags_hbprm.so", "libags_hbprm.dylib", "ags_hbprm.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("ags_hbprm", str(path))
                spec = importlib.util.spec_from_file_location("ags_hbprm", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("ags_hbprm not found; build it with `cargo build -p ags-python --release`")


def main():
    ags = load()

    assert abs(ags.psi0(1) + 0.5772156649015329) < 1e-12
    assert abs(ags.psi1(1) - math.pi**2 / 6) < 1e-12

    curve = ags.ks_curve()
    assert [p[0] for p in curve] == [1, 2, 3, 5, 10, 20]
    ks = [p[1] for p in curve]
    assert all(a >= b for a, b in zip(ks, ks[1:])), ks

    data, truth = ags.generate("large", 4, 15, 2, seed=3)
    assert (data.num_groups, data.num_covariates, len(data)) == (4, 2, 60)
    assert len(truth) == 8

    fit = ags.fit(data, "ags", warmup=200, keep=200, chains=2, seed=1)
    names = fit.parameter_names
    assert len(names) == 4 * 2 + 2 * 2
    draws = fit.draws
    assert len(draws) == 2 and len(draws[0]) == 200 and len(draws[0][0]) == len(names)
    means = fit.posterior_mean()
    assert set(means) == set(names)
    diag = fit.diagnostics()
    assert diag["N_d"] == 60 and diag["sampler"] == "ags"
    again = ags.fit(data, "ags", warmup=200, keep=200, chains=2, seed=1)
    assert again.draws == draws

    base = ags.fit(data, "mwg", warmup=200, keep=200, chains=2, seed=1)
    assert all(r is not None and 0 < r < 1 for r in base.acceptance_rates)

    series = [[d[0] for d in chain] for chain in draws]
    ess = ags.effective_sample_size(series)
    assert 0 < ess <= 400
    assert ags.mcse(series) > 0

    zeros = ags.Dataset(["a", "a", "b"], [[0.1], [0.4], [0.9]], [2, 0, 5])
    try:
        ags.fit(zeros, warmup=10, keep=10)
    except ValueError as e:
        assert "zero count" in str(e), e
    else:
        raise AssertionError("zero count accepted")
    shifted = ags.fit(zeros, warmup=10, keep=10, shift_counts=1)
    assert shifted.diagnostics()["N_d"] == 3
    assert zeros.without_zeros().counts == [2, 5]

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.csv")
        data.write_csv(path)
        back = ags.Dataset.read_csv(path)
        assert back.counts == data.counts and back.labels == data.labels
    try:
        ags.Dataset.read_csv("/nonexistent.csv")
    except OSError:
        pass
    else:
        raise AssertionError("missing file accepted")

    print("smoke test passed:", fit)


if __name__ == "__main__":
    main()
