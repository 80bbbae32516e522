"""RSRP seen by a UAV flying five level legs past a fixed transmitter.

The fixed node sends a 1.4 MHz signal at 3.51 GHz. Each leg flies at a
different altitude, so the mean slant distance grows leg by leg and the
mean RSRP falls with it.
"""

import math

from aerial_twin.experiment import run
from aerial_twin.geo import geodetic_to_enu
from aerial_twin.scenario import bundled_scenario_path, load_scenario


def main():
    sc = load_scenario(bundled_scenario_path("rsrp_altitudes"))
    res = run(sc)
    tx = sc.node("LW1").enu
    marks = [(e.time, e.payload["leg"]) for e in res.log.of_kind("waypoint_reached")]

    def leg_at(t):
        current = None
        for when, name in marks:
            if when <= t:
                current = name
        return current

    legs: dict[str, list[tuple[float, float]]] = {}
    for m in res.measurements:
        if m.metric != "rsrp_dbm":
            continue
        leg = leg_at(m.time)
        if leg and leg.startswith("alt_"):
            v = geodetic_to_enu(sc.origin, m.position)
            d = math.dist((v.east, v.north, v.up), (tx.east, tx.north, tx.up))
            legs.setdefault(leg, []).append((d, m.value))

    print(f"{'leg':>9} {'samples':>8} {'mean slant m':>13} {'mean RSRP dBm':>14}")
    for leg in sorted(legs, key=lambda s: int(s[4:-1])):
        rows = legs[leg]
        d = sum(r[0] for r in rows) / len(rows)
        p = sum(r[1] for r in rows) / len(rows)
        print(f"{leg:>9} {len(rows):>8} {d:>13.1f} {p:>14.2f}")
    print(f"IQ captures: {len(res.iq_captures)}")


if __name__ == "__main__":
    main()
