"""Dependency-free SVG emitters for convergence and flow diagnostics."""

from __future__ import annotations

from .netmodel import Network

WIDTH, HEIGHT = 640.0, 480.0
MARGIN = 56.0


def _lerp_color(t: float) -> str:
    """Early generations blue, late generations red."""
    a, b = (31, 119, 180), (214, 39, 40)
    return "#%02x%02x%02x" % tuple(round(x + (y - x) * t) for x, y in zip(a, b))


def _axis_scale(values, lo_pad=0.05, hi_pad=0.05):
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    span = hi - lo
    return lo - span * lo_pad, hi + span * hi_pad


def _svg(body, title, provenance=""):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f"<!-- {provenance} -->\n"
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:g}" height="{HEIGHT:g}" '
        f'viewBox="0 0 {WIDTH:g} {HEIGHT:g}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{WIDTH / 2:g}" y="24" text-anchor="middle" font-size="16" '
        f'font-family="sans-serif">{title}</text>\n' + body + "</svg>\n"
    )


def convergence_scatter(points, title, x_label="phase duration (s)", y_label="fitness", provenance=""):
    """Scatter of (duration, fitness, generation) triples as an SVG string."""
    if not points:
        raise ValueError("no points to plot")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    gens = [p[2] for p in points]
    gmax = max(gens) or 1
    x0, x1 = _axis_scale(xs)
    y0, y1 = _axis_scale(ys)

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    rows = [
        f'<line x1="{MARGIN:g}" y1="{HEIGHT - MARGIN:g}" x2="{WIDTH - MARGIN:g}" '
        f'y2="{HEIGHT - MARGIN:g}" stroke="black"/>',
        f'<line x1="{MARGIN:g}" y1="{MARGIN:g}" x2="{MARGIN:g}" y2="{HEIGHT - MARGIN:g}" stroke="black"/>',
        f'<text x="{WIDTH / 2:g}" y="{HEIGHT - 12:g}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{HEIGHT / 2:g}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {HEIGHT / 2:g})">{y_label}</text>',
        f'<text x="{MARGIN:g}" y="{HEIGHT - MARGIN + 16:g}" font-size="10" '
        f'font-family="sans-serif">{x0:.1f}</text>',
        f'<text x="{WIDTH - MARGIN:g}" y="{HEIGHT - MARGIN + 16:g}" text-anchor="end" '
        f'font-size="10" font-family="sans-serif">{x1:.1f}</text>',
        f'<text x="{MARGIN - 4:g}" y="{HEIGHT - MARGIN:g}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{y0:.2f}</text>',
        f'<text x="{MARGIN - 4:g}" y="{MARGIN + 4:g}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{y1:.2f}</text>',
    ]
    for x, y, g in points:
        rows.append(
            f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{_lerp_color(g / gmax)}" '
            'fill-opacity="0.6"/>'
        )
    return _svg("\n".join(rows) + "\n", title, provenance)


def flow_map(net: Network, flows: dict, title="link flows", provenance=""):
    """Schematic of road links with stroke width proportional to flow."""
    road = net.road_links()
    if not road:
        raise ValueError("network has no road links to draw")
    xs = [n.x for n in net.nodes.values()]
    ys = [n.y for n in net.nodes.values()]
    x0, x1 = _axis_scale(xs, 0.1, 0.1)
    y0, y1 = _axis_scale(ys, 0.1, 0.1)

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    peak = max((flows.get(l.id, 0.0) for l in road), default=0.0) or 1.0
    rows = []
    for link in road:
        a = net.nodes[link.from_node]
        b = net.nodes[link.to_node]
        flow = flows.get(link.id, 0.0)
        # offset the two directions of a street sideways so both stay visible
        dx, dy = b.x - a.x, b.y - a.y
        norm = (dx * dx + dy * dy) ** 0.5 or 1.0
        ox, oy = -dy / norm * 6.0, dx / norm * 6.0
        width = 0.8 + 7.0 * flow / peak
        rows.append(
            f'<line x1="{px(a.x) + ox:.1f}" y1="{py(a.y) - oy:.1f}" '
            f'x2="{px(b.x) + ox:.1f}" y2="{py(b.y) - oy:.1f}" '
            f'stroke="#1f77b4" stroke-width="{width:.2f}"/>'
        )
        mx = (px(a.x) + px(b.x)) / 2 + 2.2 * ox
        my = (py(a.y) + py(b.y)) / 2 - 2.2 * oy
        rows.append(
            f'<text x="{mx:.1f}" y="{my:.1f}" font-size="10" text-anchor="middle" '
            f'font-family="sans-serif">{flow:.0f}</text>'
        )
    for node in sorted(net.nodes.values(), key=lambda n: str(n.id)):
        shape = (
            f'<rect x="{px(node.x) - 5:.1f}" y="{py(node.y) - 5:.1f}" width="10" height="10" '
            'fill="#444"/>'
            if node.kind.value == "signalized-intersection"
            else f'<circle cx="{px(node.x):.1f}" cy="{py(node.y):.1f}" r="4" fill="#999"/>'
        )
        rows.append(shape)
        rows.append(
            f'<text x="{px(node.x) + 8:.1f}" y="{py(node.y) - 8:.1f}" font-size="10" '
            f'font-family="sans-serif">{node.id}</text>'
        )
    return _svg("\n".join(rows) + "\n", title, provenance)
