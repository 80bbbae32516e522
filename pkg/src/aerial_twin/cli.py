"""Command-line front end: validate, run, plot-data, replay.

Exit statuses: 0 success, 1 missing input, 2 invalid input, 3 IO failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ScenarioError
from .experiment import emit_outputs, precheck, run
from .scenario import METRICS, bundled_scenario_path, bundled_scenarios, load_scenario

EXIT_OK, EXIT_MISSING, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3
GROUP_FIELDS = ("node", "peer", "metric", "leg")
HIGHLIGHT = {"override", "rf_violation"}


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


def _u64(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _scenario_path(arg: str) -> Path:
    p = Path(arg)
    if p.is_file():
        return p
    if p.parent == Path(".") and (p.stem + ".json") in bundled_scenarios():
        return bundled_scenario_path(p.stem)
    raise _Exit(EXIT_MISSING, f"error: scenario not found: {arg}")


def _input_file(arg: str) -> Path:
    p = Path(arg)
    if not p.is_file():
        raise _Exit(EXIT_MISSING, f"error: file not found: {arg}")
    return p


def _load(path: Path, seed=None, strict=None):
    try:
        return load_scenario(path, seed=seed, strict=strict)
    except ScenarioError as exc:
        raise _Exit(EXIT_INVALID, f"error: {exc}") from None
    except OSError as exc:
        raise _Exit(EXIT_IO, f"error: cannot read {path}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args, out) -> int:
    sc = _load(_scenario_path(args.scenario), args.seed, args.strict or None)
    findings = precheck(sc)
    if findings:
        for f in findings:
            band = f" in {f['band']}" if f["band"] else ""
            where = "airborne " if f["airborne"] else ""
            line = f"error: compliance: {where}transmitter {f['node']}{band}: {', '.join(f['reasons'])}"
            print(line, file=sys.stderr)
        return EXIT_INVALID
    print("OK", file=out)
    print(json.dumps(sc.effective, indent=2, sort_keys=True), file=out)
    return EXIT_OK


def cmd_run(args, out) -> int:
    sc = _load(_scenario_path(args.scenario), args.seed, args.strict or None)
    result = run(sc)
    try:
        paths = emit_outputs(result, args.out)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"error: cannot write outputs to {args.out}: {exc}") from None
    s = result.summary
    print(f"scenario {sc.name} seed {sc.seed}{' strict' if sc.strict else ''}", file=out)
    print(f"ticks {s['ticks']}  overrides {s['overrides']}  violations {s['violations']}  "
          f"rejections {s['rejections']}  records {s['records']}  events {s['events']}", file=out)
    print(f"wrote {len(paths)} files to {args.out}", file=out)
    return EXIT_OK


def _read_events(path: Path) -> list[dict]:
    events = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise _Exit(EXIT_IO, f"error: cannot read {path}: {exc}") from None
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            ev = json.loads(line)
        except json.JSONDecodeError as exc:
            raise _Exit(EXIT_INVALID, f"error: {path}: line {i}: malformed JSON ({exc.msg})") from None
        if not isinstance(ev, dict) or "kind" not in ev or (ev["kind"] != "header" and "time" not in ev):
            raise _Exit(EXIT_INVALID, f"error: {path}: line {i}: not an event record")
        events.append(ev)
    return events


def _leg_lookup(events: list[dict]):
    marks: dict[str, list[tuple[float, str]]] = {}
    for ev in events:
        if ev.get("kind") == "waypoint_reached":
            p = ev.get("payload", {})
            marks.setdefault(p.get("node"), []).append((float(ev["time"]), p.get("leg") or f"wp{p.get('index')}"))

    def leg(node: str, t: float) -> str:
        current = "pre_mission"
        for when, name in marks.get(node, []):
            if when <= t + 1e-9:
                current = name
            else:
                break
        return current
    return leg


def cmd_plot_data(args, out) -> int:
    if args.metric not in METRICS:
        raise _Exit(EXIT_INVALID, f"error: unknown metric {args.metric!r}; choose from {', '.join(METRICS)}")
    path = _input_file(args.measurements)
    leg = None
    if args.group_by == "leg":
        if not args.events:
            raise _Exit(EXIT_INVALID, "error: --group-by leg needs --events <events.jsonl>")
        leg = _leg_lookup(_read_events(_input_file(args.events)))
    try:
        text = path.read_text()
    except OSError as exc:
        raise _Exit(EXIT_IO, f"error: cannot read {path}: {exc}") from None
    rows = list(csv.DictReader(io.StringIO(text)))
    if text.strip() and rows == [] and not text.startswith("time,"):
        raise _Exit(EXIT_INVALID, f"error: {path}: missing CSV header")

    table: dict[str, dict[str, str]] = {}
    groups: set[str] = set()
    for n, r in enumerate(rows, start=2):
        try:
            if r["metric"] != args.metric:
                continue
            if args.node and r["node_id"] != args.node:
                continue
            if args.peer and r["peer_node_id"] != args.peer:
                continue
            key = {"node": r["node_id"], "peer": r["peer_node_id"], "metric": r["metric"]}.get(args.group_by)
            if key is None:
                key = leg(r["node_id"], float(r["time"]))
            cell = table.setdefault(r["time"], {})
        except (KeyError, ValueError):
            raise _Exit(EXIT_INVALID, f"error: {path}: line {n}: malformed record") from None
        if key in cell:
            raise _Exit(EXIT_INVALID, f"error: several {args.metric} values for {key!r} at t={r['time']}; "
                                      "narrow with --node or --peer")
        cell[key] = r["value"]
        groups.add(key)

    cols = sorted(groups)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", *cols])
    for t in sorted(table, key=float):
        w.writerow([t, *(table[t].get(c, "") for c in cols)])
    return EXIT_OK


def _describe(ev: dict) -> str:
    p = ev.get("payload", {})
    kind = ev["kind"]
    node = p.get("node", p.get("cell", ""))
    if kind in ("command_accepted", "command_rejected"):
        c = p.get("command", {})
        extra = f" [{p['rule']}]" if "rule" in p else ""
        return f"{node} {c.get('kind', '?')} ({c.get('issuer', '?')}){extra}"
    if kind == "override":
        tag = "advisory " if p.get("advisory") else ""
        return f"{node} {tag}{p.get('action', '')} [{p.get('rule', '')}]"
    if kind == "rf_violation":
        return f"{node} {', '.join(p.get('reasons', []))}{' muted' if p.get('muted') else ''}"
    if kind == "waypoint_reached":
        return f"{node} waypoint {p.get('index')} leg {p.get('leg')}"
    if kind == "slice_reconfig":
        cfg = p.get("config", {})
        shares = " ".join(f"{sid}={share:g}" for sid, share in cfg.get("slices", []))
        return f"{node} {shares}"
    if kind == "silence_suppressed":
        return f"{p.get('count')} silent transmitter(s): {', '.join(p.get('nodes', []))}"
    return json.dumps(p, sort_keys=True)


def cmd_replay(args, out) -> int:
    events = _read_events(_input_file(args.events))
    for ev in events:
        if ev["kind"] == "header":
            print(f"# scenario {ev.get('scenario')} seed {ev.get('seed')} "
                  f"strict {str(ev.get('strict')).lower()} tool {ev.get('tool_version')}", file=out)
            continue
        mark = "!!" if ev["kind"] in HIGHLIGHT else "  "
        print(f"{mark} {float(ev['time']):10.3f}  {ev['kind']:<18} {_describe(ev)}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aerial-twin", description="Batch-mode aerial RAN digital twin.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario and print its effective configuration")
    v.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    v.add_argument("--seed", type=_u64)
    v.add_argument("--strict", action="store_true")
    v.set_defaults(fn=cmd_validate)

    r = sub.add_parser("run", help="run a scenario and write its outputs")
    r.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=_u64)
    r.add_argument("--strict", action="store_true", help="testbed semantics: mute violators, apply overrides")
    r.set_defaults(fn=cmd_run)

    p = sub.add_parser("plot-data", help="pivot one metric into plottable columns")
    p.add_argument("measurements", help="measurements.csv from a run")
    p.add_argument("--metric", required=True)
    p.add_argument("--group-by", choices=GROUP_FIELDS, default="node")
    p.add_argument("--events", help="events.jsonl, needed for --group-by leg")
    p.add_argument("--node", help="keep only this node_id")
    p.add_argument("--peer", help="keep only this peer_node_id")
    p.set_defaults(fn=cmd_plot_data)

    e = sub.add_parser("replay", help="render an event log as a timeline")
    e.add_argument("events", help="events.jsonl from a run")
    e.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, out)
    except _Exit as exc:
        if exc.message:
            print(exc.message, file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error of ours
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
