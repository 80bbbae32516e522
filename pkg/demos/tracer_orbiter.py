"""Two UAVs: a tracer flies waypoints while an orbiter circles it at each one.

Prints the time the tracer reaches each waypoint and how well the orbiter
holds its commanded radius during the orbit that follows.
"""

import math

from aerial_twin.experiment import run
from aerial_twin.scenario import bundled_scenario_path, load_scenario
from aerial_twin.vehicle import Mode


def main():
    sc = load_scenario(bundled_scenario_path("tracer_orbiter"))
    res = run(sc)
    orb = sc.orbiters[0]
    tracer = {p.time: p.position for p in res.tracks[orb.tracer]}

    for e in res.log.of_kind("waypoint_reached"):
        if e.payload["node"] == orb.tracer:
            print(f"t={e.time:6.1f} s  {orb.tracer} reached {e.payload['leg']}")

    radii = [math.hypot(p.position.east - tracer[p.time].east, p.position.north - tracer[p.time].north)
             for p in res.tracks[orb.node] if p.mode is Mode.ORBIT]
    tail = radii[len(radii) // 4:]
    print(f"orbit samples {len(radii)}, radius {min(tail):.2f} to {max(tail):.2f} m (commanded {orb.radius} m)")
    print("missions:", res.summary["missions"])


if __name__ == "__main__":
    main()
