"""Trace and report files.

Traces are JSON Lines: one header object followed by one record per
frame.  Reports are plain JSON.  Both carry a schema version; the digest
of a trace is the SHA-256 over its canonical encoded lines, which is what
the determinism checks compare.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .harness import RunReport, ViolationEvent, count_safety_breaches

TRACE_SCHEMA_VERSION = 1
COMPLETION_SLACK = 0.5


class TraceFormatError(Exception):
    """Raised for unreadable, schema-mismatched, or truncated traces."""


def _encode(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def trace_header(scenario, argus_enabled: bool, cfg) -> dict:
    m = cfg.monitor
    return {
        "schema_version": TRACE_SCHEMA_VERSION,
        "kind": "argus-trace",
        "scenario": scenario.name,
        "scenario_path": scenario.path,
        "seed": scenario.seed,
        "argus": argus_enabled,
        "frame_rate": scenario.frame_rate,
        "route_length": scenario.route_length,
        "config": {
            "collision_window": m.collision_window,
            "stall_window": m.stall_window,
            "recovery_window": m.recovery_window,
            "trigger_threshold": m.trigger_threshold,
            "horizon": m.horizon,
            "stop_speed": m.stop_speed,
            "caps": [m.cap_ego, m.cap_vehicle, m.cap_pedestrian],
        },
    }


def write_trace(path: str | Path, header: dict, records: list[dict]) -> str:
    """Write a trace file; returns its digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_encode(header)] + [_encode(r) for r in records]
    path.write_text("\n".join(lines) + "\n")
    return digest_lines(lines)


def digest_lines(lines: list[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def read_trace(path: str | Path) -> tuple[dict, list[dict], str]:
    """Read a trace file; returns (header, records, digest)."""
    path = Path(path)
    if not path.exists():
        raise TraceFormatError(f"{path}: no such trace file")
    lines = path.read_text().splitlines()
    if not lines:
        raise TraceFormatError(f"{path}: empty trace")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"{path}: bad header ({e})") from e
    if header.get("kind") != "argus-trace":
        raise TraceFormatError(f"{path}: not a trace file")
    version = header.get("schema_version")
    if version != TRACE_SCHEMA_VERSION:
        raise TraceFormatError(
            f"{path}: unsupported schema_version {version!r} "
            f"(this build reads {TRACE_SCHEMA_VERSION})"
        )
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"{path}:{i}: bad record ({e})") from e
    canonical = [_encode(header)] + [_encode(r) for r in records]
    return header, records, digest_lines(canonical)


def write_report(path: str | Path, report: RunReport, trace_digest: str | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": TRACE_SCHEMA_VERSION, "kind": "argus-report"}
    payload.update(report.to_dict())
    if trace_digest is not None:
        payload["trace_digest"] = trace_digest
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_report(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise TraceFormatError(f"{path}: no such report file")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"{path}: bad report ({e})") from e
    if payload.get("kind") != "argus-report":
        raise TraceFormatError(f"{path}: not a report file")
    return payload


def recompute_from_trace(header: dict, records: list[dict]) -> dict:
    """Re-derive the report metrics a trace implies.

    Used by replay verification: the recomputed values must match the
    stored report field for field.
    """
    route_length = float(header["route_length"])
    violations = []
    for rec in records:
        for kind, penalty, actor in rec.get("violations", []):
            violations.append(
                ViolationEvent(rec["frame"], kind, penalty, actor))
    max_station = max((rec["progress"] for rec in records), default=0.0)
    completed = max_station >= route_length - COMPLETION_SLACK
    rc = 100.0 if completed else min(100.0, 100.0 * max_station / route_length)
    infraction = 1.0
    for v in violations:
        infraction *= v.penalty
    takeovers = []
    for i, rec in enumerate(records):
        if rec.get("takeover") is not None:
            takeovers.append({"frame": rec["frame"], "cause": rec["takeover"],
                              "return_frame": None})
        if rec.get("returned") and takeovers:
            takeovers[-1]["return_frame"] = rec["frame"]
    return {
        "route_completion": rc,
        "infraction_score": infraction,
        "driving_score": rc * infraction,
        "completed": completed,
        "success": completed and not violations,
        "violations": [
            {"frame": v.frame, "kind": v.kind, "penalty": v.penalty,
             "actor_id": v.actor_id} for v in violations
        ],
        "takeovers": takeovers,
        "safety_breaches": count_safety_breaches(records),
        "frames": len(records),
    }


def verify_replay(trace_path: str | Path, report_path: str | Path) -> list[str]:
    """Cross-check a trace against its stored report.

    Returns a list of mismatch descriptions (empty when everything
    agrees).  Raises TraceFormatError for unreadable inputs.
    """
    header, records, digest = read_trace(trace_path)
    stored = read_report(report_path)
    derived = recompute_from_trace(header, records)
    problems = []
    if stored.get("trace_digest") not in (None, digest):
        problems.append(
            f"trace digest mismatch: report has {stored.get('trace_digest')[:12]}..., "
            f"trace hashes to {digest[:12]}..."
        )
    for key, want in derived.items():
        have = stored.get(key)
        if isinstance(want, float):
            if have is None or abs(have - want) > 1e-9:
                problems.append(f"{key}: report {have!r} != recomputed {want!r}")
        elif have != want:
            problems.append(f"{key}: report {have!r} != recomputed {want!r}")
    return problems
