#!/usr/bin/env python3
"""Smoke test for the _scldpc extension module.

Expects the cdylib to exist already:

    cargo build --release -p scldpc-py
    python3 python/smoke_test.py
"""
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_module():
    names = ["lib_scldpc.so", "_scldpc.so", "lib_scldpc.dylib", "_scldpc.pyd"]
    for profile in ("release", "debug"):
        for name in names:
            src = ROOT / "target" / profile / name
            if src.exists():
                tmp = tempfile.mkdtemp(prefix="scldpc_")
                shutil.copy(src, pathlib.Path(tmp) / "_scldpc.so")
                sys.path.insert(0, tmp)
                import _scldpc

                return _scldpc
    sys.exit("cdylib not found; run `cargo build --release -p scldpc-py` first")


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = load_module()

    grid = m.GridSpec(25.0, 256)
    assert grid.bins == 256

    # BEC densities close under both convolutions
    a = m.Density.bec(grid, 0.37)
    b = m.Density.bec(grid, 0.62)
    approx(a.var_conv(b).entropy(), 0.37 * 0.62, 1e-12)
    approx(a.chk_conv(b).entropy(), 1 - 0.63 * 0.38, 1e-12)
    approx(a.total_mass(), 1.0, 1e-12)

    # design rates
    approx(m.CoupledSpec.uncoupled(3, 6).design_rate(), 0.5, 1e-12)
    approx(m.CoupledSpec.line(3, 6, 11, 3).design_rate(), 0.4604, 1e-4)

    # channel entropy inversion round-trips
    ch = m.ChannelParam.from_entropy("bawgn", 0.4791)
    approx(ch.entropy(), 0.4791, 1e-9)

    # scalar BEC threshold
    unc = m.CoupledSpec.uncoupled(3, 6)
    approx(m.bec_bp_threshold(unc, 1e-5), 0.4294, 5e-4)

    # forward DE decodes below threshold
    ents, iters, reason = m.forward_de_entropies(m.ChannelParam("bec", 0.40), unc, grid)
    assert reason == "ToZero", reason
    assert max(ents) < 1e-6

    # EBP curve and Maxwell bound on the BEC
    anchors = [i / 400 for i in range(1, 401)]
    curve = m.trace_ebp_curve("bec", unc, grid, anchors)
    approx(curve.maxwell_bound(0.5), 0.48815, 1e-3)
    approx(curve.area(), 0.5, 2e-3)
    assert "anchor,param_value" in curve.to_csv()

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
