#!/usr/bin/env python3
"""Smoke test for the comb_qed extension module.

Build the extension first, then run this script from the repo root:

    cargo build -p comb-qed-py --release --features extension-module
    python3 python/smoke_test.py

The script locates the cdylib under target/, stages it as an importable
module, and exercises every exported function once with light sanity
checks.  Exit status 0 means the binding surface is healthy.
"""

import json
import math
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def stage_module():
    candidates = [
        os.path.join(REPO, "target", profile, name)
        for profile in ("release", "debug")
        for name in ("libcomb_qed.so", "libcomb_qed.dylib", "comb_qed.dll")
    ]
    src = next((p for p in candidates if os.path.exists(p)), None)
    if src is None:
        sys.exit(
            "extension not built; run "
            "`cargo build -p comb-qed-py --release --features extension-module`"
        )
    stage = tempfile.mkdtemp(prefix="comb_qed_py_")
    suffix = ".pyd" if src.endswith(".dll") else ".so"
    shutil.copy2(src, os.path.join(stage, "comb_qed" + suffix))
    sys.path.insert(0, stage)


def close(a, b, tol, label):
    if abs(a - b) > tol:
        sys.exit(f"FAIL {label}: {a} vs {b} (tol {tol})")
    print(f"  ok  {label}: {a:.6g}")


def main():
    stage_module()
    import comb_qed as cq

    print(f"comb_qed {cq.__version__}")

    couplings = [30.96, 32.27, 28.24, 32.13, 30.54]
    gammas = [0.414, 0.287, 0.033, 0.350, 0.290]
    center, spacing = 5874.5, 40.0

    g = cq.collective_coupling(couplings)
    close(g, math.sqrt(sum(c * c for c in couplings)), 1e-9, "collective_coupling")
    close(g, 68.95, 0.1, "collective_coupling vs device value")

    freqs = cq.comb_frequencies(center, spacing, 5)
    close(freqs[0], center - 2 * spacing, 1e-9, "comb lower edge")
    close(sum(freqs) / 5, center, 1e-9, "comb center")

    cavity = (5878.0, 0.42, 0.51, 0.003)
    modes = cq.dressed_modes(center, spacing, couplings, gammas, *cavity)
    bright = [m for m in modes if m[2]]
    print(f"  ok  dressed_modes: {len(modes)} modes, {len(bright)} bright")
    if len(modes) != 6:
        sys.exit("FAIL dressed_modes: expected 6 single-excitation modes")

    probe = [center - 150.0 + 0.5 * i for i in range(601)]
    power = cq.transmission_power(
        probe, center, spacing, couplings, gammas, *cavity, sum(cavity[1:])
    )
    if len(power) != len(probe) or max(power) <= 0:
        sys.exit("FAIL transmission_power: bad shape or all-zero output")
    print(f"  ok  transmission_power: peak {max(power):.4g}")

    tau, spread = cq.predict_revival_time([m[0] for m in modes])
    close(tau, 1e3 / spacing, 2.0, "predict_revival_time vs 1/spacing")
    print(f"  ok  predict_revival_time: tau {tau:.2f} ns, spread {spread:.3g}")

    times, abs_sq, photon = cq.propagate_comb(
        center, spacing, couplings, gammas, *cavity,
        eta_peak=1.2, duration=16.0, carrier=center, sigma=16.0 / 3.81,
        t_end=120.0, dt_out=0.2, fock_max=2,
    )
    if len(times) != len(abs_sq) or len(times) != len(photon):
        sys.exit("FAIL propagate_comb: ragged outputs")
    if min(photon) < -1e-9 or max(photon) <= 0:
        sys.exit("FAIL propagate_comb: unphysical photon number")
    print(f"  ok  propagate_comb: {len(times)} samples, peak n {max(photon):.4g}")

    tau_first, tau_mean, peak_times, peak_heights = cq.extract_revivals(
        times, abs_sq, 16.0, tau
    )
    close(tau_mean, tau, 3.0, "extract_revivals tau_mean")
    if len(peak_times) != len(peak_heights) or not peak_times:
        sys.exit("FAIL extract_revivals: empty or ragged peak lists")

    m = [[1.1 if i == j else 0.02 for j in range(7)] for i in range(7)]
    currents = cq.currents_for_comb(
        m, [0.1] * 7, [6400.0] * 7, [(0, 5800.0), (1, 5900.0)]
    )
    if len(currents) != 7:
        sys.exit("FAIL currents_for_comb: wrong length")
    print(f"  ok  currents_for_comb: {[round(c, 4) for c in currents]}")

    cfg = {
        "kind": "pulse_overlap",
        "cavity": {"omega_c": cavity[0], "kappa_e1": cavity[1],
                   "kappa_e2": cavity[2], "kappa_i": cavity[3],
                   "kappa_load": sum(cavity[1:])},
        "comb": {"center": center, "spacing": 50.0,
                 "couplings": couplings, "gammas": gammas},
        "pulse": {"eta_peak": 1.2, "duration": 16.0, "carrier": center,
                  "shape": "gaussian", "sigma": 16.0 / 3.81},
        "freq_grid": {"start": center - 200.0, "stop": center + 200.0, "step": 0.05},
        "output_prefix": "smoke",
    }
    with tempfile.TemporaryDirectory() as out:
        summary = json.loads(cq.run_config(json.dumps(cfg), out))
        if summary["failures"]:
            sys.exit(f"FAIL run_config: {summary['failures']}")
        missing = [p for p in summary["outputs"] if not os.path.exists(os.path.join(out, p))]
        if missing:
            sys.exit(f"FAIL run_config: missing outputs {missing}")
        print(f"  ok  run_config: overlap {summary['derived']['overlap']:.4g}, "
              f"{len(summary['outputs'])} files")

    print("smoke test passed")


if __name__ == "__main__":
    main()
