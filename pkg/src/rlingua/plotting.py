"""Static success-curve rendering without a plotting dependency.

Produces a standalone SVG: one mean line per arm with a min/max band over
seeds.  All coordinates are formatted with a fixed precision, so rendering the
same inputs twice yields byte-identical output.
"""

from __future__ import annotations

from .experiment import RunFailure, read_metrics

_WIDTH, _HEIGHT = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 64, 16, 16, 48

_ARM_COLORS = {
    "rlingua": "#d62728",
    "td3": "#1f77b4",
    "controller": "#2ca02c",
}
_FALLBACK_COLORS = ("#9467bd", "#8c564b", "#e377c2")


def _f(x) -> str:
    return f"{x:.2f}"


def _collect(metric_files):
    """Group (stamps, ema series) by arm; stamps must agree within an arm."""
    by_arm = {}
    for path in metric_files:
        meta, rows = read_metrics(path)
        arm = meta.get("arm", "unknown")
        stamps = [r["env_step"] for r in rows]
        emas = [r["ema_success"] for r in rows]
        if not stamps:
            raise RunFailure(f"metrics file {path} has no rows")
        entry = by_arm.setdefault(arm, {"stamps": stamps, "series": []})
        if entry["stamps"] != stamps:
            raise RunFailure(
                f"metrics file {path} has env-step stamps that do not match "
                f"the other {arm} files")
        entry["series"].append(emas)
    return by_arm


def render_curves(metric_files, out_path) -> str:
    """Render mean EMA success vs env steps with min/max shading per arm."""
    if not metric_files:
        raise RunFailure("no metrics files given")
    by_arm = _collect(metric_files)
    x_max = max(max(e["stamps"]) for e in by_arm.values())
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def sx(step):
        return _LEFT + plot_w * (step / x_max if x_max else 0.0)

    def sy(value):
        return _TOP + plot_h * (1.0 - value)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    # Axes and ticks.
    parts.append(
        f'<rect x="{_LEFT}" y="{_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>')
    for i in range(5):
        frac = i / 4
        x = _LEFT + plot_w * frac
        step = int(round(x_max * frac))
        parts.append(f'<line x1="{_f(x)}" y1="{_TOP + plot_h}" x2="{_f(x)}" '
                     f'y2="{_TOP + plot_h + 4}" stroke="black"/>')
        parts.append(f'<text x="{_f(x)}" y="{_TOP + plot_h + 18}" '
                     f'font-size="11" text-anchor="middle">{step}</text>')
        y = _TOP + plot_h * (1 - frac)
        parts.append(f'<line x1="{_LEFT - 4}" y1="{_f(y)}" x2="{_LEFT}" '
                     f'y2="{_f(y)}" stroke="black"/>')
        parts.append(f'<text x="{_LEFT - 8}" y="{_f(y + 4)}" font-size="11" '
                     f'text-anchor="end">{_f(frac)}</text>')
    parts.append(f'<text x="{_LEFT + plot_w / 2:.2f}" y="{_HEIGHT - 8}" '
                 f'font-size="12" text-anchor="middle">environment steps</text>')
    parts.append(f'<text x="14" y="{_TOP + plot_h / 2:.2f}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 14 '
                 f'{_TOP + plot_h / 2:.2f})">success rate (EMA)</text>')

    fallback = iter(_FALLBACK_COLORS)
    legend_y = _TOP + 14
    for arm in sorted(by_arm):
        entry = by_arm[arm]
        stamps = entry["stamps"]
        series = entry["series"]
        n = len(stamps)
        mean = [sum(s[i] for s in series) / len(series) for i in range(n)]
        lo = [min(s[i] for s in series) for i in range(n)]
        hi = [max(s[i] for s in series) for i in range(n)]
        color = _ARM_COLORS.get(arm) or next(fallback)
        band = " ".join(f"{_f(sx(stamps[i]))},{_f(sy(hi[i]))}" for i in range(n))
        band += " " + " ".join(f"{_f(sx(stamps[i]))},{_f(sy(lo[i]))}"
                               for i in range(n - 1, -1, -1))
        parts.append(f'<polygon points="{band}" fill="{color}" '
                     f'fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_f(sx(stamps[i]))},{_f(sy(mean[i]))}" for i in range(n))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<line x1="{_LEFT + 8}" y1="{_f(legend_y - 4)}" '
                     f'x2="{_LEFT + 28}" y2="{_f(legend_y - 4)}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_LEFT + 32}" y="{_f(legend_y)}" '
                     f'font-size="12">{arm}</text>')
        legend_y += 16
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return svg
