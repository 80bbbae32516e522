"""A mission that would leave the geofence, run with and without --strict.

In strict mode the supervisor holds the vehicle at the boundary, then
returns it home once the grace period expires. Without it the same
crossing is only reported.
"""

from aerial_twin.experiment import run
from aerial_twin.scenario import bundled_scenario_path, load_scenario


def main():
    for strict in (True, False):
        sc = load_scenario(bundled_scenario_path("geofence_override"), strict=strict)
        res = run(sc)
        fence = sc.geofence.localize(sc.origin)
        worst = max(fence.distance_outside(p.position) for p in res.tracks["UAV1"])
        print(f"strict={strict}")
        for e in res.log.of_kind("override"):
            print(f"  t={e.time:5.1f} s  {e.payload['action']:<8} [{e.payload['rule']}]")
        print(f"  furthest outside the fence: {worst:.2f} m, mission {res.summary['missions']['UAV1']}")


if __name__ == "__main__":
    main()
