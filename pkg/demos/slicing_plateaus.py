"""Slice reconfiguration on a saturated downlink.

Runs the bundled slicing scenario at 100 and 15 PRBs and prints UE1's
smoothed throughput at the end of each schedule step: unsliced, 80:20,
20:80 and 50:50.
"""

from aerial_twin.experiment import run
from aerial_twin.scenario import bundled_scenario_path, load_scenario

STEPS = [("unsliced", 15.0, 20.0), ("80:20", 35.0, 40.0), ("20:80", 55.0, 60.0), ("50:50", 75.0, 80.0)]


def plateau(result, ue, lo, hi):
    vals = [m.value for m in result.measurements
            if m.metric == "throughput_bps" and m.node_id == ue and lo < m.time <= hi]
    return sum(vals) / len(vals)


def main():
    for name in ("slicing_fig9", "slicing_fig9_15prb"):
        res = run(load_scenario(bundled_scenario_path(name)))
        print(f"{name} ({res.scenario.ran.total_prb} PRB)")
        base = None
        for label, lo, hi in STEPS:
            p = plateau(res, "UE1", lo, hi)
            base = base or p
            print(f"  {label:>8}  UE1 {p / 1e6:7.2f} Mbit/s  ({p / base:.2f} of baseline)")


if __name__ == "__main__":
    main()
