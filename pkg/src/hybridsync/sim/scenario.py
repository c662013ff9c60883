"""Scenario script parsing.

One action per line: ``<t_ms> <peer|*> <verb> [args]``.  Verbs:

    join group=<g> [session=<code>]
    leave
    place pose=<qx,qy,qz,qw;tx,ty,tz>
    transform rot=<qx,qy,qz,qw> scale=<s> trans=<tx,ty,tz>
    annotate ray=<ox,oy,oz;dx,dy,dz> label="<text>" [color=<0-255>]
    point ray=<ox,oy,oz;dx,dy,dz> ttl=<ms>
    slice push n=<nx,ny,nz> d=<offset>
    slice pop
    assert converged            (peer field must be *)

``#`` starts a comment; blank lines are skipped; timestamps must be
non-decreasing.  Ray and pose coordinates are given in the acting peer's
group anchor frame; slice planes are model-local.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field

from hybridsync.geometry import Ray, RigidPose, SlicePlane
from hybridsync.geometry.types import normalize
from hybridsync.quaternion import Quaternion
from hybridsync.state import SCALE_MAX, SCALE_MIN, SharedTransform


class ScenarioError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Action:
    line_no: int
    t: float  # seconds
    peer: int | None  # None for '*'
    verb: str
    args: dict = field(default_factory=dict)


def _floats(text: str, n: int, line_no: int, what: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise ScenarioError(line_no, f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ScenarioError(line_no, f"non-numeric value in {what}: {text!r}") from None


def _parse_ray(text: str, line_no: int) -> Ray:
    if ";" not in text:
        raise ScenarioError(line_no, f"ray needs 'ox,oy,oz;dx,dy,dz', got {text!r}")
    o_str, d_str = text.split(";", 1)
    origin = _floats(o_str, 3, line_no, "ray origin")
    direction = _floats(d_str, 3, line_no, "ray direction")
    try:
        return Ray(origin, normalize(direction))
    except ValueError as exc:
        raise ScenarioError(line_no, f"bad ray: {exc}") from None


def _parse_pose(text: str, line_no: int) -> RigidPose:
    if ";" not in text:
        raise ScenarioError(line_no, f"pose needs 'qx,qy,qz,qw;tx,ty,tz', got {text!r}")
    q_str, t_str = text.split(";", 1)
    q = _floats(q_str, 4, line_no, "pose rotation")
    t = _floats(t_str, 3, line_no, "pose translation")
    try:
        return RigidPose(Quaternion.normalized(*q), t)
    except ValueError as exc:
        raise ScenarioError(line_no, f"bad pose: {exc}") from None


def _kv_args(fields: list[str], line_no: int, allowed: set[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for f in fields:
        if "=" not in f:
            raise ScenarioError(line_no, f"expected key=value, got {f!r}")
        key, value = f.split("=", 1)
        if key not in allowed:
            raise ScenarioError(line_no, f"unknown field {key!r} (allowed: {sorted(allowed)})")
        if key in out:
            raise ScenarioError(line_no, f"duplicate field {key!r}")
        out[key] = value
    return out


def _require(kv: dict, key: str, line_no: int) -> str:
    if key not in kv:
        raise ScenarioError(line_no, f"missing required field {key!r}")
    return kv[key]


def parse_scenario(text: str) -> list[Action]:
    actions: list[Action] = []
    last_t = float("-inf")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        try:
            fields = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioError(line_no, f"unbalanced quotes: {exc}") from None
        if not fields:
            continue
        if len(fields) < 3:
            raise ScenarioError(line_no, "expected '<t_ms> <peer|*> <verb> [args]'")
        try:
            t_ms = int(fields[0])
        except ValueError:
            raise ScenarioError(line_no, f"bad timestamp {fields[0]!r}") from None
        if t_ms < 0:
            raise ScenarioError(line_no, "timestamps must be >= 0")
        if t_ms < last_t:
            raise ScenarioError(line_no, f"timestamp {t_ms} decreases (previous {int(last_t)})")
        last_t = t_ms

        peer: int | None
        if fields[1] == "*":
            peer = None
        else:
            try:
                peer = int(fields[1])
            except ValueError:
                raise ScenarioError(line_no, f"bad peer field {fields[1]!r}") from None
            if peer < 0:
                raise ScenarioError(line_no, "peer ids must be >= 0")

        verb, rest = fields[2], fields[3:]
        t = t_ms / 1000.0

        if verb == "join":
            kv = _kv_args(rest, line_no, {"group", "session"})
            try:
                args = {
                    "group": int(_require(kv, "group", line_no)),
                    "session": int(kv.get("session", "0")),
                }
            except ValueError:
                raise ScenarioError(line_no, "group and session must be integers") from None
            actions.append(Action(line_no, t, peer, "join", args))
        elif verb == "leave":
            _kv_args(rest, line_no, set())
            actions.append(Action(line_no, t, peer, "leave"))
        elif verb == "place":
            kv = _kv_args(rest, line_no, {"pose"})
            pose = _parse_pose(_require(kv, "pose", line_no), line_no)
            actions.append(Action(line_no, t, peer, "place", {"pose": pose}))
        elif verb == "transform":
            kv = _kv_args(rest, line_no, {"rot", "scale", "trans"})
            rot = _floats(_require(kv, "rot", line_no), 4, line_no, "rot")
            trans = _floats(_require(kv, "trans", line_no), 3, line_no, "trans")
            try:
                scale = float(_require(kv, "scale", line_no))
            except ValueError:
                raise ScenarioError(line_no, "scale must be a number") from None
            if not SCALE_MIN <= scale <= SCALE_MAX:
                raise ScenarioError(line_no, f"scale {scale} outside [{SCALE_MIN}, {SCALE_MAX}]")
            try:
                transform = SharedTransform(Quaternion.normalized(*rot), trans, scale)
            except ValueError as exc:
                raise ScenarioError(line_no, f"bad transform: {exc}") from None
            actions.append(Action(line_no, t, peer, "transform", {"transform": transform}))
        elif verb == "annotate":
            kv = _kv_args(rest, line_no, {"ray", "label", "color"})
            ray = _parse_ray(_require(kv, "ray", line_no), line_no)
            try:
                color = int(kv.get("color", "0"))
            except ValueError:
                raise ScenarioError(line_no, "color must be an integer") from None
            if not 0 <= color <= 255:
                raise ScenarioError(line_no, f"color {color} outside [0, 255]")
            actions.append(
                Action(line_no, t, peer, "annotate",
                       {"ray": ray, "label": kv.get("label", ""), "color": color})
            )
        elif verb == "point":
            kv = _kv_args(rest, line_no, {"ray", "ttl"})
            ray = _parse_ray(_require(kv, "ray", line_no), line_no)
            try:
                ttl = int(_require(kv, "ttl", line_no))
            except ValueError:
                raise ScenarioError(line_no, "ttl must be an integer") from None
            actions.append(Action(line_no, t, peer, "point", {"ray": ray, "ttl": ttl}))
        elif verb == "slice":
            if not rest:
                raise ScenarioError(line_no, "slice needs 'push' or 'pop'")
            sub, sub_rest = rest[0], rest[1:]
            if sub == "push":
                kv = _kv_args(sub_rest, line_no, {"n", "d"})
                n = _floats(_require(kv, "n", line_no), 3, line_no, "n")
                try:
                    d = float(_require(kv, "d", line_no))
                except ValueError:
                    raise ScenarioError(line_no, "d must be a number") from None
                try:
                    plane = SlicePlane(normalize(n), d)
                except ValueError as exc:
                    raise ScenarioError(line_no, f"bad plane: {exc}") from None
                actions.append(Action(line_no, t, peer, "slice_push", {"plane": plane}))
            elif sub == "pop":
                _kv_args(sub_rest, line_no, set())
                actions.append(Action(line_no, t, peer, "slice_pop"))
            else:
                raise ScenarioError(line_no, f"unknown slice form {sub!r}")
        elif verb == "assert":
            if rest != ["converged"]:
                raise ScenarioError(line_no, "only 'assert converged' is supported")
            if peer is not None:
                raise ScenarioError(line_no, "assert converged takes peer field '*'")
            actions.append(Action(line_no, t, None, "assert_converged"))
        else:
            raise ScenarioError(line_no, f"unknown verb {verb!r}")

        if verb != "assert" and peer is None:
            raise ScenarioError(line_no, f"peer '*' is only valid for 'assert converged'")
    return actions
