"""Vehicle emulation: point-mass kinematics, waypoint mission FSM, command
filtering, geofence supervision and tracer/orbiter coordination.

The layering mirrors a companion-computer stack. Experimenter code (the
mission FSM or a coordinator) produces :class:`Command` objects; every
command passes :func:`filter_command` before it can reach an
:class:`Autopilot`, which refuses anything that was not vetted. A
:class:`Supervisor` watches the resulting states against the geofence and
can preempt the experimenter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .errors import ConfigurationError
from .geo import ZERO, EnuVector, LocalFence, distance_3d


class Mode(str, Enum):
    IDLE = "IDLE"
    TAKEOFF = "TAKEOFF"
    ENROUTE = "ENROUTE"
    HOLD = "HOLD"
    ORBIT = "ORBIT"
    LANDING = "LANDING"
    RTL = "RTL"
    OVERRIDDEN = "OVERRIDDEN"


class CommandKind(str, Enum):
    ARM = "ARM"
    DISARM = "DISARM"
    TAKEOFF = "TAKEOFF"
    GOTO = "GOTO"
    SET_SPEED = "SET_SPEED"
    HOLD = "HOLD"
    ORBIT = "ORBIT"
    LAND = "LAND"
    RTL = "RTL"
    # recognised but never allowlisted by default
    ACTUATOR_RAW = "ACTUATOR_RAW"
    PARAM_SET = "PARAM_SET"
    MOTOR_TEST = "MOTOR_TEST"


class Issuer(str, Enum):
    EXPERIMENTER = "experimenter"
    SUPERVISOR = "supervisor"


DEFAULT_ALLOWLIST = frozenset({
    CommandKind.ARM, CommandKind.DISARM, CommandKind.TAKEOFF, CommandKind.GOTO,
    CommandKind.SET_SPEED, CommandKind.HOLD, CommandKind.ORBIT, CommandKind.LAND,
    CommandKind.RTL,
})

# rule names reported in rejections and overrides
FILTER_RULES = ("not_allowlisted", "supervisor_lock", "invalid_parameter",
                "speed_limit", "altitude_limit", "vehicle_kind")
SUPERVISOR_RULES = ("geofence_predicted_exit", "geofence_outside", "hold_escalation")

LANDED_EPS = 1e-6


@dataclass(frozen=True)
class VehicleLimits:
    v_max_h: float = 5.0
    v_max_v: float = 2.0
    a_max: float = 2.0
    kind: str = "multicopter"
    arrival_radius: float = 1.0
    pitch_gain: float = 0.0  # rad per m/s^2 of forward acceleration

    def __post_init__(self):
        if self.kind not in ("multicopter", "rover"):
            raise ConfigurationError(f"unknown vehicle kind {self.kind!r}")
        if not (self.v_max_h > 0 and self.a_max > 0 and self.arrival_radius > 0):
            raise ConfigurationError("v_max_h, a_max and arrival_radius must be positive")
        if self.kind == "rover" and self.v_max_v != 0:
            raise ConfigurationError("a rover must have v_max_v = 0")
        if self.kind == "multicopter" and not self.v_max_v > 0:
            raise ConfigurationError("a multicopter needs v_max_v > 0")


@dataclass(frozen=True)
class VehicleState:
    position: EnuVector
    velocity: EnuVector = ZERO
    heading: float = 0.0  # radians clockwise from north
    pitch: float = 0.0
    armed: bool = False
    mode: Mode = Mode.IDLE


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    issuer: Issuer = Issuer.EXPERIMENTER
    alt: float | None = None
    target: EnuVector | None = None
    speed: float | None = None
    duration: float | None = None
    center_node: str | None = None
    radius: float | None = None
    angular_rate: float | None = None
    rule: str | None = None
    vetted: bool = field(default=False, compare=False)

    @classmethod
    def arm(cls, **kw):
        return cls(CommandKind.ARM, **kw)

    @classmethod
    def takeoff(cls, alt, **kw):
        return cls(CommandKind.TAKEOFF, alt=alt, **kw)

    @classmethod
    def goto(cls, target, speed, **kw):
        return cls(CommandKind.GOTO, target=target, speed=speed, **kw)

    @classmethod
    def hold(cls, duration=0.0, **kw):
        return cls(CommandKind.HOLD, duration=duration, **kw)

    @classmethod
    def orbit(cls, center_node, radius, angular_rate, **kw):
        return cls(CommandKind.ORBIT, center_node=center_node, radius=radius,
                   angular_rate=angular_rate, **kw)

    @classmethod
    def land(cls, **kw):
        return cls(CommandKind.LAND, **kw)

    @classmethod
    def rtl(cls, **kw):
        return cls(CommandKind.RTL, **kw)

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "issuer": self.issuer.value}
        for name in ("alt", "speed", "duration", "center_node", "radius", "angular_rate", "rule"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.target is not None:
            out["target"] = list(self.target.as_tuple())
        return out


@dataclass(frozen=True)
class Accepted:
    command: Command


@dataclass(frozen=True)
class Rejected:
    command: Command
    reason: str


def _bad(x) -> bool:
    return x is None or not math.isfinite(x)


def filter_command(cmd: Command, allowlist=DEFAULT_ALLOWLIST, limits: VehicleLimits | None = None,
                   *, alt_max: float | None = None, locked: bool = False) -> Accepted | Rejected:
    """Pass or reject ``cmd``.

    Supervisor commands skip the allowlist and the lock but are still held
    to the vehicle's physical limits. ``locked`` is set while a supervisor
    override owns the vehicle.
    """
    limits = limits or VehicleLimits()
    experimenter = cmd.issuer is Issuer.EXPERIMENTER
    if experimenter and cmd.kind not in allowlist:
        return Rejected(cmd, "not_allowlisted")
    if experimenter and locked:
        return Rejected(cmd, "supervisor_lock")

    k = cmd.kind
    if k is CommandKind.TAKEOFF:
        if _bad(cmd.alt) or cmd.alt <= 0:
            return Rejected(cmd, "invalid_parameter")
        if limits.kind == "rover":
            return Rejected(cmd, "vehicle_kind")
        if alt_max is not None and cmd.alt > alt_max:
            return Rejected(cmd, "altitude_limit")
    elif k is CommandKind.GOTO:
        if cmd.target is None or _bad(cmd.speed) or cmd.speed <= 0:
            return Rejected(cmd, "invalid_parameter")
        if cmd.speed > limits.v_max_h:
            return Rejected(cmd, "speed_limit")
        if alt_max is not None and cmd.target.up > alt_max:
            return Rejected(cmd, "altitude_limit")
    elif k is CommandKind.SET_SPEED:
        if _bad(cmd.speed) or cmd.speed <= 0:
            return Rejected(cmd, "invalid_parameter")
        if cmd.speed > limits.v_max_h:
            return Rejected(cmd, "speed_limit")
    elif k is CommandKind.HOLD:
        if cmd.duration is not None and (not math.isfinite(cmd.duration) or cmd.duration < 0):
            return Rejected(cmd, "invalid_parameter")
    elif k is CommandKind.ORBIT:
        if cmd.center_node is None or _bad(cmd.radius) or cmd.radius <= 0 or _bad(cmd.angular_rate):
            return Rejected(cmd, "invalid_parameter")
        if cmd.radius * abs(cmd.angular_rate) > limits.v_max_h:
            return Rejected(cmd, "speed_limit")
    return Accepted(replace(cmd, vetted=True))


def step_kinematics(s: VehicleState, setpoint: EnuVector, speed: float, limits: VehicleLimits,
                    dt: float, disturbance: EnuVector | None = None) -> VehicleState:
    """Advance a point mass one tick toward ``setpoint``.

    Speed follows a trapezoidal profile: accelerate at ``a_max`` up to the
    cruise speed, then brake along the discrete braking curve so the vehicle
    arrives at rest. Position integrates the mean of old and new velocity. When a tick
    would reach or pass the setpoint the vehicle is snapped onto it with
    zero velocity. ``disturbance`` is a velocity offset (wind drift) applied
    to position only.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if limits.v_max_v == 0:
        setpoint = EnuVector(setpoint.east, setpoint.north, s.position.up)
    delta = setpoint - s.position
    dist = delta.norm()
    v = s.velocity
    if dist == 0.0 and v.norm() == 0.0 and disturbance is None:
        return s

    cap_h = min(speed, limits.v_max_h)
    cap_v = limits.v_max_v
    if dist > 0:
        u = delta * (1.0 / dist)
        # fastest speed after this tick from which braking at a_max still stops on the
        # setpoint, accounting for the distance this tick itself covers:
        # v'^2 = 2 a (d - (v + v') dt / 2)
        a = limits.a_max
        v_along = max(0.0, v.east * u.east + v.north * u.north + v.up * u.up)
        disc = (a * dt) ** 2 + 8.0 * a * dist - 4.0 * a * v_along * dt
        target_speed = max(0.0, 0.5 * (math.sqrt(disc) - a * dt)) if disc > 0 else 0.0
        uh, uv = u.horizontal_norm(), abs(u.up)
        if uh > 0:
            target_speed = min(target_speed, cap_h / uh)
        if uv > 0:
            target_speed = min(target_speed, cap_v / uv)
        v_des = u * target_speed
    else:
        u = None
        v_des = ZERO

    dv = v_des - v
    dv_norm = dv.norm()
    max_dv = limits.a_max * dt
    if dv_norm > max_dv:
        dv = dv * (max_dv / dv_norm)
    v_new = v + dv
    travel = (v + v_new) * (0.5 * dt)

    if u is not None and (travel.east * u.east + travel.north * u.north + travel.up * u.up) >= dist:
        pos, v_new = setpoint, ZERO
    else:
        pos = s.position + travel
    if disturbance is not None:
        pos = pos + disturbance * dt

    heading = s.heading
    if v_new.horizontal_norm() > 1e-9:
        heading = math.atan2(v_new.east, v_new.north)
    pitch = s.pitch
    if limits.pitch_gain:
        a_fwd = ((v_new.east - v.east) * math.sin(heading) + (v_new.north - v.north) * math.cos(heading)) / dt
        pitch = -limits.pitch_gain * a_fwd  # nose down while accelerating forward
    return replace(s, position=pos, velocity=v_new, heading=heading, pitch=pitch)


def stopping_point(s: VehicleState, limits: VehicleLimits) -> EnuVector:
    """Where the vehicle comes to rest braking at ``a_max`` from its current velocity."""
    speed = s.velocity.norm()
    return s.position + s.velocity * (speed / (2.0 * limits.a_max))


# ---------------------------------------------------------------------------
# mission FSM


class MissionState(str, Enum):
    IDLE = "IDLE"
    TAKEOFF = "TAKEOFF"
    ENROUTE = "ENROUTE"
    HOLD = "HOLD"
    LANDING = "LANDING"
    DONE = "DONE"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class Waypoint:
    position: EnuVector
    speed: float = 5.0
    wait: float = 0.0
    leg: str | None = None


@dataclass(frozen=True)
class Mission:
    waypoints: tuple[Waypoint, ...]
    current_index: int = 0
    state: MissionState = MissionState.IDLE
    takeoff_alt: float | None = None
    arrival_radius: float = 1.0
    # a gated mission holds at every waypoint until release() is called
    gated: bool = False
    hold_until: float = 0.0
    goto_sent: bool = False
    last_reached: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if not self.waypoints:
            raise ConfigurationError("a mission needs at least one waypoint")

    def validate(self, limits: VehicleLimits) -> None:
        for i, wp in enumerate(self.waypoints):
            if not 0 < wp.speed <= limits.v_max_h:
                raise ConfigurationError(f"waypoint {i} speed {wp.speed} outside (0, {limits.v_max_h}]")
            if wp.wait < 0:
                raise ConfigurationError(f"waypoint {i} has negative wait")

    @property
    def finished(self) -> bool:
        return self.state in (MissionState.DONE, MissionState.ABORTED)


def is_landed(s: VehicleState) -> bool:
    return s.position.up <= LANDED_EPS and s.velocity.norm() == 0.0 and not s.armed


_TICK_EPS = 1e-9


def fsm_tick(m: Mission, s: VehicleState, t: float) -> tuple[Mission, Command | None]:
    """One deterministic step of the waypoint mission.

    Emits at most one command. Several state changes may chain within one
    tick (for example reaching a zero-wait waypoint and heading for the
    next one), but the chain stops at the first emitted command.
    """
    m = replace(m, last_reached=None)
    for _ in range(len(m.waypoints) + 4):
        st = m.state
        if st is MissionState.IDLE:
            if not s.armed:
                return m, Command.arm()
            if m.takeoff_alt is not None and s.position.up < m.takeoff_alt - m.arrival_radius:
                return replace(m, state=MissionState.TAKEOFF), Command.takeoff(m.takeoff_alt)
            m = replace(m, state=MissionState.ENROUTE, goto_sent=False)
        elif st is MissionState.TAKEOFF:
            if s.position.up >= m.takeoff_alt - m.arrival_radius:
                m = replace(m, state=MissionState.ENROUTE, goto_sent=False)
                continue
            if s.mode is not Mode.TAKEOFF:
                return m, Command.takeoff(m.takeoff_alt)
            return m, None
        elif st is MissionState.ENROUTE:
            wp = m.waypoints[m.current_index]
            if distance_3d(s.position, wp.position) <= m.arrival_radius:
                hold_until = math.inf if m.gated else t + wp.wait
                m = replace(m, state=MissionState.HOLD, hold_until=hold_until, last_reached=m.current_index)
                if m.gated or wp.wait > 0:
                    return m, Command.hold(None if m.gated else wp.wait)
                continue
            if not m.goto_sent or s.mode is not Mode.ENROUTE:
                return replace(m, goto_sent=True), Command.goto(wp.position, wp.speed)
            return m, None
        elif st is MissionState.HOLD:
            if t + _TICK_EPS < m.hold_until:
                return m, None
            if m.current_index + 1 < len(m.waypoints):
                m = replace(m, current_index=m.current_index + 1, state=MissionState.ENROUTE, goto_sent=False)
                continue
            return replace(m, state=MissionState.LANDING), Command.land()
        elif st is MissionState.LANDING:
            if is_landed(s):
                return replace(m, state=MissionState.DONE), None
            return m, None
        else:
            return m, None
    return m, None


def release(m: Mission, t: float) -> Mission:
    """Open the gate of a mission holding at a waypoint."""
    if m.state is MissionState.HOLD:
        return replace(m, hold_until=t)
    return m


# ---------------------------------------------------------------------------
# orbiting


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def orbiter_tick(orbiter: VehicleState, tracer: VehicleState, radius: float, angular_rate: float,
                 dt: float, formation: EnuVector | None = None) -> EnuVector:
    """Next orbiter setpoint around ``tracer``.

    While the tracer is ENROUTE and a formation offset is given, the orbiter
    shadows it at that offset. Otherwise the setpoint lies on the circle of
    ``radius`` about the tracer's horizontal position, at the orbiter's own
    altitude, ``angular_rate * dt`` ahead of the orbiter's current bearing.
    Bearing is measured counter-clockwise from east.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if formation is not None and tracer.mode is Mode.ENROUTE:
        return tracer.position + formation
    de = orbiter.position.east - tracer.position.east
    dn = orbiter.position.north - tracer.position.north
    bearing = math.atan2(dn, de) if (de or dn) else 0.0
    bearing += angular_rate * dt
    return EnuVector(tracer.position.east + radius * math.cos(bearing),
                     tracer.position.north + radius * math.sin(bearing),
                     orbiter.position.up)


def bearing_of(orbiter: EnuVector, center: EnuVector) -> float:
    return math.atan2(orbiter.north - center.north, orbiter.east - center.east)


# ---------------------------------------------------------------------------
# supervision


@dataclass(frozen=True)
class Clear:
    pass


@dataclass(frozen=True)
class Override:
    command: Command
    rule: str


@dataclass(frozen=True)
class Release:
    pass


def supervisor_check(s: VehicleState, fence: LocalFence, lookahead: float,
                     limits: VehicleLimits | None = None, *, escalate: bool = False) -> Clear | Override:
    """Predict whether the vehicle leaves ``fence``.

    The prediction extrapolates velocity over ``lookahead`` seconds; when
    ``limits`` are known the braking distance at ``a_max`` is added so a
    HOLD issued now still stops inside. A vehicle already outside gets RTL.
    A predicted exit gets HOLD unless ``escalate``.
    """
    if lookahead < 0:
        raise ValueError("lookahead must be >= 0")
    if not fence.contains(s.position):
        return Override(Command.rtl(issuer=Issuer.SUPERVISOR, rule="geofence_outside"), "geofence_outside")
    predicted = s.position + s.velocity * lookahead
    if limits is not None:
        predicted = predicted + s.velocity * (s.velocity.norm() / (2.0 * limits.a_max))
    # the ground stops a descent, so never predict below it
    predicted = EnuVector(predicted.east, predicted.north, max(predicted.up, min(0.0, s.position.up)))
    if fence.contains(predicted):
        return Clear()
    if escalate:
        return Override(Command.rtl(issuer=Issuer.SUPERVISOR, rule="hold_escalation"), "hold_escalation")
    return Override(Command.hold(issuer=Issuer.SUPERVISOR, rule="geofence_predicted_exit"),
                    "geofence_predicted_exit")


class Supervisor:
    """Stateful HOLD -> RTL escalation on top of :func:`supervisor_check`.

    First predicted exit: HOLD. After ``grace`` seconds the vehicle is
    re-checked; still predicted out escalates to RTL, otherwise control is
    released back to the experimenter. Any later offense goes straight to
    RTL.
    """

    def __init__(self, fence: LocalFence, lookahead: float = 1.0, grace: float = 5.0):
        self.fence = fence
        self.lookahead = lookahead
        self.grace = grace
        self._offenses: dict[str, int] = {}
        self._hold_since: dict[str, float] = {}
        self._rtl: set[str] = set()

    def evaluate(self, node: str, s: VehicleState, limits: VehicleLimits, t: float):
        if node in self._rtl or not s.armed:
            return Clear()
        if node in self._hold_since:
            if t - self._hold_since[node] + _TICK_EPS < self.grace:
                return Clear()
            del self._hold_since[node]
            res = supervisor_check(s, self.fence, self.lookahead, limits, escalate=True)
            if isinstance(res, Override):
                self._rtl.add(node)
                return res
            return Release()
        offenses = self._offenses.get(node, 0)
        res = supervisor_check(s, self.fence, self.lookahead, limits, escalate=offenses > 0)
        if isinstance(res, Override):
            self._offenses[node] = offenses + 1
            if res.command.kind is CommandKind.HOLD:
                self._hold_since[node] = t
            else:
                self._rtl.add(node)
        return res


# ---------------------------------------------------------------------------
# autopilot


class UnvettedCommandError(RuntimeError):
    pass


class Autopilot:
    """Executes vetted commands by steering :func:`step_kinematics`."""

    def __init__(self, node_id: str, state: VehicleState, limits: VehicleLimits):
        self.node_id = node_id
        self.state = state
        self.limits = limits
        self.home = state.position
        self.setpoint = state.position
        self.speed = limits.v_max_h
        self.behavior: str | None = None
        self.orbit: Command | None = None
        self.received: list[Command] = []

    @property
    def overridden(self) -> bool:
        return self.state.mode is Mode.OVERRIDDEN

    def _mode(self, cmd: Command, mode: Mode) -> Mode:
        return Mode.OVERRIDDEN if cmd.issuer is Issuer.SUPERVISOR else mode

    def apply(self, cmd: Command) -> None:
        if not cmd.vetted:
            raise UnvettedCommandError(f"{cmd.kind.value} reached {self.node_id} without passing the filter")
        self.received.append(cmd)
        s = self.state
        k = cmd.kind
        if k is CommandKind.ARM:
            self.state = replace(s, armed=True)
        elif k is CommandKind.DISARM:
            if s.position.up <= self.home.up + LANDED_EPS and s.velocity.norm() == 0.0:
                self.state = replace(s, armed=False, mode=Mode.IDLE)
                self.behavior = None
        elif k is CommandKind.TAKEOFF:
            self.behavior = "takeoff"
            self.setpoint = EnuVector(s.position.east, s.position.north, cmd.alt)
            self.speed = self.limits.v_max_h
            self.state = replace(s, mode=self._mode(cmd, Mode.TAKEOFF))
        elif k is CommandKind.GOTO:
            self.behavior = "goto"
            self.setpoint = cmd.target
            self.speed = cmd.speed
            self.state = replace(s, mode=self._mode(cmd, Mode.ENROUTE))
        elif k is CommandKind.SET_SPEED:
            self.speed = cmd.speed
        elif k is CommandKind.HOLD:
            self.behavior = "hold"
            self.setpoint = stopping_point(s, self.limits)
            self.state = replace(s, mode=self._mode(cmd, Mode.HOLD))
        elif k is CommandKind.ORBIT:
            self.behavior = "orbit"
            self.orbit = cmd
            self.speed = self.limits.v_max_h
            self.state = replace(s, mode=self._mode(cmd, Mode.ORBIT))
        elif k is CommandKind.LAND:
            self.behavior = "land"
            self.setpoint = EnuVector(s.position.east, s.position.north, self.home.up)
            self.state = replace(s, mode=self._mode(cmd, Mode.LANDING))
        elif k is CommandKind.RTL:
            self.behavior = "rtl"
            self.setpoint = EnuVector(self.home.east, self.home.north, s.position.up)
            self.speed = self.limits.v_max_h
            self.state = replace(s, mode=self._mode(cmd, Mode.RTL))

    def release(self) -> None:
        """Hand control back after a supervisor HOLD."""
        if self.state.mode is Mode.OVERRIDDEN:
            self.state = replace(self.state, mode=Mode.HOLD)

    def step(self, dt: float, peers: Mapping[str, VehicleState] | None = None,
             disturbance: EnuVector | None = None) -> VehicleState:
        s = self.state
        if not s.armed or self.behavior is None:
            return s
        if self.behavior == "orbit" and self.orbit is not None:
            center = (peers or {}).get(self.orbit.center_node)
            if center is not None:
                # fly the circle at r*|w|, chasing a setpoint far enough ahead that the
                # braking profile never caps the speed below that
                self.speed = min(self.limits.v_max_h, self.orbit.radius * abs(self.orbit.angular_rate))
                lead = max(dt, self.speed / self.limits.a_max)
                self.setpoint = orbiter_tick(s, center, self.orbit.radius, self.orbit.angular_rate, lead)
        s = step_kinematics(s, self.setpoint, self.speed, self.limits, dt, disturbance)
        home_offset = (s.position.horizontal() - self.home.horizontal()).norm()
        if self.behavior == "rtl" and home_offset <= self.limits.arrival_radius and s.velocity.norm() == 0.0:
            self.behavior = "land"
            self.setpoint = EnuVector(s.position.east, s.position.north, self.home.up)
        if self.behavior == "land" and s.position.up <= self.home.up + LANDED_EPS and s.velocity.norm() == 0.0:
            # touchdown: disarm, keep OVERRIDDEN visible if the supervisor owned the landing
            s = replace(s, armed=False, mode=s.mode if s.mode is Mode.OVERRIDDEN else Mode.IDLE)
            self.behavior = None
        self.state = s
        return s


# ---------------------------------------------------------------------------
# tracer / orbiter coordination


class TracerOrbiter:
    """Two gated missions kept in lock-step.

    The orbiter's waypoints are the tracer's shifted by ``formation``, so
    both vehicles move at the same time in the same direction. When both
    hold at waypoint ``i`` and have settled, the orbiter is sent an ORBIT
    around the tracer; once its unwrapped bearing has swept a full turn both
    gates open together.
    """

    def __init__(self, tracer: str, orbiter: str, radius: float, angular_rate: float,
                 settle_speed: float = 0.05):
        self.tracer = tracer
        self.orbiter = orbiter
        self.radius = radius
        self.angular_rate = angular_rate
        self.settle_speed = settle_speed
        self.orbiting_index: int | None = None
        self.completed: list[int] = []
        self.phase = 0.0
        self._last_bearing = 0.0

    def tick(self, missions: dict[str, Mission], states: Mapping[str, VehicleState], t: float) -> Command | None:
        """Release gates and return an ORBIT command for the orbiter, if due."""
        mt, mo = missions[self.tracer], missions[self.orbiter]
        st, so = states[self.tracer], states[self.orbiter]
        if self.orbiting_index is not None:
            b = bearing_of(so.position, st.position)
            self.phase += _wrap(b - self._last_bearing)
            self._last_bearing = b
            if abs(self.phase) >= 2.0 * math.pi:
                self.completed.append(self.orbiting_index)
                self.orbiting_index = None
                missions[self.tracer] = release(mt, t)
                missions[self.orbiter] = release(mo, t)
            return None
        both_holding = (mt.state is MissionState.HOLD and mo.state is MissionState.HOLD
                        and mt.current_index == mo.current_index
                        and mt.current_index not in self.completed)
        if both_holding and st.velocity.norm() <= self.settle_speed and so.velocity.norm() <= self.settle_speed:
            self.orbiting_index = mt.current_index
            self.phase = 0.0
            self._last_bearing = bearing_of(so.position, st.position)
            return Command.orbit(self.tracer, self.radius, self.angular_rate)
        return None
