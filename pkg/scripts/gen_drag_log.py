"""Generate the committed playground drag log (frontend/fixtures/drag_log.json).

The log is a scripted drag session covering all four interactive set
variants (point, plane, circle, rectangle): each segment drags the set
through a few waypoints, then holds the final pose so the closed-loop
solver settles. Messages are validated against the protocol schema and
replayed through a live PlaygroundSession; the recorded replies are stored
alongside the messages so both the TypeScript client tests and the Python
end-to-end test can replay against ground truth.

Run from the repository root:

    python3 scripts/gen_drag_log.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT_PATH = ROOT / "frontend" / "fixtures" / "drag_log.json"

SETTLE_TICKS = 14
# the rectangle interior needs a longer hold before the residual settles
RECT_SETTLE_TICKS = 26
RESIDUAL_TOL = 1e-4


def lerp(a, b, t):
    return [a[i] + t * (b[i] - a[i]) for i in range(len(a))]


def target(set_spec):
    return {"type": "target", "set": set_spec}


def point_segment(start, goal, steps=6):
    msgs = []
    for k in range(1, steps + 1):
        p = lerp(start, goal, k / steps)
        msgs.append(target({"kind": "point", "target": [round(v, 4) for v in p]}))
    msgs += [target({"kind": "point", "target": goal})] * SETTLE_TICKS
    return msgs


def plane_segment():
    # The draggable handle is a point h: the plane passes through h with
    # normal along h, exactly like the client's drag rule.
    msgs = []
    handles = [(1.3, 0.5), (1.25, 0.62), (1.2, 0.74), (1.15, 0.86), (1.1, 0.95)]
    for hx, hy in handles:
        norm = (hx * hx + hy * hy) ** 0.5
        spec = {
            "kind": "plane",
            "normal": [round(hx / norm, 6), round(hy / norm, 6)],
            "offset": round(norm, 6),
            "side": "on",
        }
        msgs.append(target(spec))
    msgs += [target(msgs[-1]["set"])] * SETTLE_TICKS
    return msgs


def circle_segment():
    msgs = []
    for r in (0.5, 0.45, 0.4, 0.35, 0.3):
        spec = {"kind": "circle", "center": [0.8, 0.3], "r_outer": r, "r_inner": 0.0}
        msgs.append(target(spec))
    msgs += [target(msgs[-1]["set"])] * SETTLE_TICKS
    return msgs


def rectangle_segment():
    msgs = []
    for L, w in ((0.9, 0.5), (0.85, 0.48), (0.8, 0.45), (0.75, 0.42), (0.7, 0.4)):
        spec = {
            "kind": "rectangle",
            "center": [0.6, -0.4],
            "length": L,
            "width": w,
            "angle": 0.6,
            "region": "in",
        }
        msgs.append(target(spec))
    msgs += [target(msgs[-1]["set"])] * RECT_SETTLE_TICKS
    return msgs


def build_messages():
    messages = [{"type": "hello", "version": 1}]
    messages += point_segment([1.0, 1.2], [1.2, 0.9])
    messages += plane_segment()
    messages += circle_segment()
    messages += rectangle_segment()
    return messages


def main():
    sys.path.insert(0, str(ROOT / "src"))
    from alspg.bench.schema import PlanarArmSpec
    from alspg.service.app import PlaygroundSession
    from alspg.service.protocol import message_adapter

    messages = build_messages()
    for msg in messages:
        message_adapter.validate_python(msg)  # raises on schema drift

    session = PlaygroundSession(PlanarArmSpec())
    replies = []
    segment_ends = []
    last_kind = None
    for i, msg in enumerate(messages):
        if msg["type"] == "target" and msg["set"]["kind"] != last_kind:
            if last_kind is not None:
                segment_ends.append(i - 1)
            last_kind = msg["set"]["kind"]
        reply = session.handle(json.dumps(msg))
        replies.append(json.loads(reply.model_dump_json()))
    segment_ends.append(len(messages) - 1)

    # Every variant segment must have settled: reachable targets end with a
    # residual at or below the tolerance the end-to-end test asserts.
    for end in segment_ends:
        rep = replies[end]
        assert rep["type"] == "state", rep
        assert rep["residual"] <= RESIDUAL_TOL, (
            f"segment ending at message {end} settled at residual {rep['residual']:.3e}"
        )

    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    OUT_PATH.write_text(
        json.dumps(
            {"protocol": "playground", "version": 1,
             "messages": messages, "replies": replies},
            indent=1,
        )
        + "\n"
    )
    kinds = [m["set"]["kind"] for m in messages if m["type"] == "target"]
    print(f"wrote {OUT_PATH.relative_to(ROOT)}: {len(messages)} messages, "
          f"variants {sorted(set(kinds))}")
    for end in segment_ends:
        print(f"  segment end @{end}: residual {replies[end]['residual']:.3e}")


if __name__ == "__main__":
    main()
