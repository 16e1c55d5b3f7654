"""A short WER run: hypercube L=8 against E8 K=8 at one Eb/N0 each.

Uses a few thousand frames so it finishes in minutes; the full curves are
produced by ``dprime simulate --config results/<name>.cfg``.

    python3 demos/quick_wer.py
"""
from dprime import sim

for shaping_spec, ebn0 in (("hypercube:8", 10.5), ("e8:8", 9.9)):
    cfg = sim.parse_config(f"lattice = table1\nshaping = {shaping_spec}\nebn0_db = {ebn0}\n"
                           "trials = 2000\nstop_errors = 20\n")
    curve = sim.run_wer(cfg)
    p = curve.points[0]
    print(f"{shaping_spec:12s} Eb/N0 {p['ebn0_db']:.2f} dB  SNR {p['snr_db']:.2f} dB  "
          f"power {p['power']:.3f}  WER {p['errors']}/{p['trials']} = {p['wer']:.2e}")
