"""SVG and JSON output for traced networks, plus a loader for the JSON graph."""

from __future__ import annotations

import json
from pathlib import Path

from camnet.errors import InputError
from camnet.wkb.curve import INF, HitchinPoint, RationalCoeff
from camnet.wkb.network import Joint, Network, census, classify_ends, network_edges
from camnet.wkb.trace import CurveSegment

SCHEMA = "camnet/1"

# one colour per unordered sheet pair; the reverse orientation gets a dashed stroke
_PAIR_COLOURS = {
    (0, 1): "#1f77b4",
    (0, 2): "#d62728",
    (1, 2): "#2ca02c",
}
_FALLBACK_COLOUR = "#7f7f7f"


def _pair_colour(label) -> str:
    i, j = label
    return _PAIR_COLOURS.get((min(i, j), max(i, j)), _FALLBACK_COLOUR)


def _c(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _uncomplex(v) -> complex:
    return complex(float(v[0]), float(v[1]))


def _point_json(p):
    return INF if p == INF else _c(p)


def _point_from_json(p):
    return INF if p == INF else _uncomplex(p)


def hitchin_to_config(h: HitchinPoint) -> dict:
    coeffs = {}
    for k, c in enumerate(h.coeffs, start=1):
        coeffs[f"a{k}"] = {"num": list(c.num), "den": list(c.den)}
    return {"group": h.group, "char_poly": coeffs, "punctures": [_point_json(p) for p in h.punctures]}


def _hitchin_from_json(cfg: dict) -> HitchinPoint:
    n = {"SL2": 2, "SL3": 3, "GL2": 2, "GL3": 3}[cfg["group"]]
    coeffs = tuple(
        RationalCoeff(tuple(cfg["char_poly"][f"a{k}"]["num"]), tuple(cfg["char_poly"][f"a{k}"]["den"])) for k in range(1, n + 1)
    )
    return HitchinPoint(cfg["group"], coeffs, tuple(_point_from_json(p) for p in cfg["punctures"]))


# ---------------------------------------------------------------------------
# JSON graph
# ---------------------------------------------------------------------------


def network_to_json(net: Network) -> dict:
    classes = classify_ends(net)
    vertices = []
    for k, b in enumerate(net.branch_points):
        vertices.append({"id": f"bp:{k}", "kind": "branch-point", "z": _c(b)})
    for j in net.joints:
        vertices.append({"id": f"joint:{j.id}", "kind": "joint", "z": _c(j.z), "iteration": j.iteration})
    for d, r in net.discs.items():
        vertices.append({"id": f"disc:{_disc_key(d)}", "kind": "disc", "center": _point_json(d), "radius": r})
    edges = []
    for tail, head, sid in network_edges(net):
        edges.append({"tail": _vname(tail), "head": _vname(head), "segment": sid})
    segments = []
    for s in net.segments:
        item = s.to_json()
        item["class"] = classes[s.id]
        segments.append(item)
    return {
        "schema": SCHEMA,
        "hitchin": hitchin_to_config(net.hitchin),
        "branch_points": [_c(b) for b in net.branch_points],
        "discs": [{"puncture": _point_json(d), "radius": r} for d, r in net.discs.items()],
        "cut_points": [_c(p) for p in net.cut_points],
        "cut_perms": [list(p) for p in net.cut_perms],
        "vertices": vertices,
        "edges": edges,
        "segments": segments,
        "joints": [j.to_json() for j in net.joints],
        "order": list(net.order),
        "iterations": net.iterations,
        "census": census(net),
        "errors": list(net.errors),
        "notes": list(net.notes),
    }


def _disc_key(d) -> str:
    if d == INF:
        return INF
    d = complex(d)
    return f"{d.real:.12g}{d.imag:+.12g}i"


def _vname(v) -> str:
    kind, ref = v
    if kind == "bp":
        return f"bp:{ref}"
    if kind == "joint":
        return f"joint:{ref}"
    if kind == "disc":
        return f"disc:{ref}"
    return f"end:{ref}"


def network_from_json(data: dict) -> Network:
    if data.get("schema") != SCHEMA:
        raise InputError(f"expected schema {SCHEMA!r}, got {data.get('schema')!r}")
    try:
        h = _hitchin_from_json(data["hitchin"])
        segments = []
        for s in data["segments"]:
            end = s["end"]
            if end is not None:
                end = (end[0], _point_from_json(end[1]))
            origin = tuple(s["origin"])
            if origin[0] == "point":
                origin = ("point", _uncomplex(origin[1]))
            segments.append(
                CurveSegment(
                    s["id"],
                    tuple(s["label"]),
                    [_uncomplex(p) for p in s["points"]],
                    origin,
                    iteration=s["iteration"],
                    status=s["status"],
                    end=end,
                    crossings=[tuple(c) for c in s["crossings"]],
                    residual=s["residual"],
                )
            )
        joints = [
            Joint(
                j["id"],
                _uncomplex(j["z"]),
                [(int(m[0]), int(m[1]), float(m[2])) for m in j["members"]],
                spawned=list(j["spawned"]),
                iteration=j["iteration"],
                labels=[tuple(x) for x in j["labels"]],
                tangents=[_uncomplex(t) for t in j["tangents"]],
            )
            for j in data["joints"]
        ]
        return Network(
            h,
            [_uncomplex(b) for b in data["branch_points"]],
            {_point_from_json(d["puncture"]): float(d["radius"]) for d in data["discs"]},
            segments,
            joints,
            [_uncomplex(p) for p in data["cut_points"]],
            [tuple(p) for p in data["cut_perms"]],
            errors=list(data["errors"]),
            notes=list(data["notes"]),
            order=list(data["order"]),
            iterations=data["iterations"],
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"malformed network graph: {exc}") from exc


def export_graph(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_json(net), indent=1, sort_keys=True) + "\n")


def load_network(path) -> Network:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return network_from_json(data)


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def _view_box(net: Network) -> tuple[float, float, float, float]:
    pts = list(net.branch_points) + [j.z for j in net.joints]
    pts += [complex(d) for d in net.discs if d != INF]
    for s in net.segments:
        pts.extend(s.points)
    if not pts:
        return -2.0, -2.0, 2.0, 2.0
    # keep the picture focused: curves running out to a large infinity disc are cut off
    finite = list(net.branch_points) + [j.z for j in net.joints] + [complex(d) for d in net.discs if d != INF]
    if finite:
        span = max(max(abs(p - finite[0]) for p in finite), 1.0)
        cx = sum(p.real for p in finite) / len(finite)
        cy = sum(p.imag for p in finite) / len(finite)
        half = 2.0 * span
        return cx - half, cy - half, cx + half, cy + half
    xs = [p.real for p in pts]
    ys = [p.imag for p in pts]
    return min(xs), min(ys), max(xs), max(ys)


def render_svg(net: Network, size: int = 640) -> str:
    x0, y0, x1, y1 = _view_box(net)
    w = max(x1 - x0, 1e-9)
    hgt = max(y1 - y0, 1e-9)
    s = size / max(w, hgt)

    def X(z):
        return (z.real - x0) * s

    def Y(z):
        return (y1 - z.imag) * s

    def fmt(v):
        return f"{v:.3f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<clipPath id="frame"><rect x="0" y="0" width="{size}" height="{size}"/></clipPath>',
        '<g clip-path="url(#frame)">',
    ]
    # axes
    if x0 <= 0 <= x1:
        out.append(f'<line x1="{fmt(X(0j))}" y1="0" x2="{fmt(X(0j))}" y2="{size}" stroke="#cccccc" stroke-width="1"/>')
    if y0 <= 0 <= y1:
        out.append(f'<line x1="0" y1="{fmt(Y(0j))}" x2="{size}" y2="{fmt(Y(0j))}" stroke="#cccccc" stroke-width="1"/>')
    for d, r in sorted(net.discs.items(), key=lambda kv: _disc_key(kv[0])):
        if d == INF:
            # the working circle around the origin stands in for the disc at infinity
            out.append(f'<circle cx="{fmt(X(0j))}" cy="{fmt(Y(0j))}" r="{fmt(r * s)}" fill="none" stroke="#555555" stroke-dasharray="6,4"/>')
        else:
            d = complex(d)
            out.append(f'<circle cx="{fmt(X(d))}" cy="{fmt(Y(d))}" r="{fmt(r * s)}" fill="none" stroke="#555555" stroke-dasharray="4,3"/>')
    for seg in net.segments:
        for first, last, label in seg.pieces(net.cut_perms):
            pts = seg.points[first : last + 1]
            if len(pts) < 2:
                continue
            path = " ".join(f"{fmt(X(p))},{fmt(Y(p))}" for p in pts)
            dash = ' stroke-dasharray="5,2"' if label[0] > label[1] else ""
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{_pair_colour(label)}" stroke-width="1.5"{dash}>'
                f"<title>segment {seg.id} {label[0]}{label[1]} {seg.status}</title></polyline>"
            )
    arm = 6.0
    for b in net.branch_points:
        cx, cy = X(b), Y(b)
        out.append(
            f'<path d="M{fmt(cx - arm)},{fmt(cy - arm)} L{fmt(cx + arm)},{fmt(cy + arm)} '
            f'M{fmt(cx - arm)},{fmt(cy + arm)} L{fmt(cx + arm)},{fmt(cy - arm)}" stroke="black" stroke-width="2"/>'
        )
    for j in net.joints:
        out.append(f'<circle cx="{fmt(X(j.z))}" cy="{fmt(Y(j.z))}" r="4" fill="black"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_svg(net: Network, path, size: int = 640) -> None:
    Path(path).write_text(render_svg(net, size))


def empty_network(h: HitchinPoint) -> Network:
    return Network(h, [], {}, [], [], [], [])
