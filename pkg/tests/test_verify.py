import numpy as np

from drawdown.dual_solver import EQUATION, FUNCTION, GRADIENT
from drawdown.lattice import GridConfig
from drawdown.verify import format_report, regime_blocks_contiguous, run_verification


def test_contiguity_helper():
    good = np.array([[GRADIENT, GRADIENT, EQUATION, FUNCTION, FUNCTION]])
    assert regime_blocks_contiguous(good)
    bad = np.array([[GRADIENT, EQUATION, GRADIENT, FUNCTION, FUNCTION]])
    assert not regime_blocks_contiguous(bad)
    interleaved = np.array([[GRADIENT, FUNCTION, EQUATION, FUNCTION, FUNCTION]])
    assert not regime_blocks_contiguous(interleaved)


def test_full_suite_passes(ref_params):
    checks = run_verification(ref_params, GridConfig(n_s=200, n_tau=50))
    hard = [c for c in checks if c.kind == "hard"]
    assert len(hard) >= 15
    for c in hard:
        assert c.passed, f"{c.name}: measured={c.measured} bound={c.bound}"
    report = format_report(checks)
    assert report.count("\n") + 1 == len(checks)
    assert "FAIL [hard]" not in report
