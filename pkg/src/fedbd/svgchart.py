"""Dependency-free SVG line charts with deterministic output.

Fixed [0, 1] y-axis and fixed element ordering, so identical inputs always
produce byte-identical files.
"""

WIDTH = 720
HEIGHT = 440
MARGIN_LEFT = 60
MARGIN_RIGHT = 170
MARGIN_TOP = 48
MARGIN_BOTTOM = 56

ARM_COLORS = {
    "AF-FL": "#1f77b4",
    "BD-FL": "#ff7f0e",
    "BD-FMFL": "#d62728",
}
_FALLBACK_COLORS = ("#2ca02c", "#9467bd", "#8c564b")


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def render_line_chart(
    title: str,
    y_label: str,
    series: list[tuple[str, list[float]]],
    x_label: str = "round",
) -> str:
    """Render one polyline per series over x = 1..len(values), y fixed to [0, 1]."""
    if not series or not any(values for _, values in series):
        raise ValueError("nothing to plot")
    plot_left = MARGIN_LEFT
    plot_right = WIDTH - MARGIN_RIGHT
    plot_top = MARGIN_TOP
    plot_bottom = HEIGHT - MARGIN_BOTTOM
    plot_w = plot_right - plot_left
    plot_h = plot_bottom - plot_top
    max_x = max(len(values) for _, values in series)

    def x_px(x: int) -> float:
        if max_x == 1:
            return plot_left + plot_w / 2
        return plot_left + (x - 1) * plot_w / (max_x - 1)

    def y_px(y: float) -> float:
        return plot_bottom - min(max(y, 0.0), 1.0) * plot_h

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="26" text-anchor="middle" font-size="17" '
        f'font-family="sans-serif">{_escape(title)}</text>',
    ]
    for i in range(6):
        value = i / 5
        y = y_px(value)
        lines.append(
            f'<line x1="{plot_left}" y1="{y:.2f}" x2="{plot_right}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{plot_left - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif">{value:.1f}</text>'
        )
    step = max(1, max_x // 10)
    for x in range(1, max_x + 1):
        if x != 1 and x != max_x and x % step != 0:
            continue
        px = x_px(x)
        lines.append(
            f'<line x1="{px:.2f}" y1="{plot_bottom}" x2="{px:.2f}" y2="{plot_bottom + 5}" '
            'stroke="#000000" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{px:.2f}" y="{plot_bottom + 19}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif">{x}</text>'
        )
    lines.append(
        f'<line x1="{plot_left}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}" '
        'stroke="#000000" stroke-width="1.5"/>'
    )
    lines.append(
        f'<line x1="{plot_left}" y1="{plot_top}" x2="{plot_left}" y2="{plot_bottom}" '
        'stroke="#000000" stroke-width="1.5"/>'
    )
    lines.append(
        f'<text x="{(plot_left + plot_right) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{_escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="18" y="{(plot_top + plot_bottom) / 2:.1f}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 18 {(plot_top + plot_bottom) / 2:.1f})">{_escape(y_label)}</text>'
    )
    fallback = iter(_FALLBACK_COLORS)
    legend_y = plot_top + 8
    for name, values in series:
        color = ARM_COLORS.get(name) or next(fallback)
        points = " ".join(
            f"{x_px(i + 1):.2f},{y_px(v):.2f}" for i, v in enumerate(values)
        )
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>'
        )
        lines.append(
            f'<rect x="{plot_right + 14}" y="{legend_y - 9}" width="14" height="3" fill="{color}"/>'
        )
        lines.append(
            f'<text x="{plot_right + 33}" y="{legend_y - 4}" font-size="12" '
            f'font-family="sans-serif">{_escape(name)}</text>'
        )
        legend_y += 18
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
