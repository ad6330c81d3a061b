"""Static SVG renderings of the similarity heatmap and the suite dendrogram."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .coverage import Dendrogram, SimilarityMatrix, leaf_order

LOW = (247, 251, 255)
HIGH = (8, 48, 107)


def _color(v: float) -> str:
    t = min(max(v, 0.0), 1.0)
    r, g, b = (round(lo + (hi - lo) * t) for lo, hi in zip(LOW, HIGH))
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg(width, height, body) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n')
    return head + "\n".join(body) + "\n</svg>\n"


def heatmap_svg(sim: SimilarityMatrix, order=None, title="Cosine similarity between suites") -> str:
    """Annotated heatmap, colored linearly on [0, 1], rows/columns in ``order``."""
    if order is not None:
        sim = sim.reordered(order)
    ids = sim.suite_ids
    cell, margin, top = 64, 110, 40
    size = cell * len(ids)
    width, height = margin + size + 90, top + margin + size
    body = [f'<text x="{margin}" y="24" font-size="14">{escape(title)}</text>']
    for i, row_id in enumerate(ids):
        y = top + i * cell
        body.append(f'<text x="{margin - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end">{escape(row_id)}</text>')
        for j, v in enumerate(sim.values[i]):
            x = margin + j * cell
            ink = "#ffffff" if v > 0.6 else "#000000"
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_color(v)}" stroke="#ffffff"/>')
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                        f'fill="{ink}">{v:.2f}</text>')
    for j, col_id in enumerate(ids):
        x = margin + j * cell + cell / 2
        y = top + size + 8
        body.append(f'<text x="{x:.1f}" y="{y}" text-anchor="end" '
                    f'transform="rotate(-45 {x:.1f} {y})">{escape(col_id)}</text>')
    # color bar
    bx = margin + size + 30
    for s in range(10):
        v0 = 1 - s / 10
        body.append(f'<rect x="{bx}" y="{top + s * size / 10:.1f}" width="16" height="{size / 10:.1f}" '
                    f'fill="{_color(v0 - 0.05)}"/>')
    body.append(f'<text x="{bx + 20}" y="{top + 10}">1</text>')
    body.append(f'<text x="{bx + 20}" y="{top + size}">0</text>')
    return _svg(width, height, body)


def dendrogram_svg(dendrogram: Dendrogram, title="Average-linkage dendrogram (1 - cosine)") -> str:
    order = leaf_order(dendrogram)
    m = len(dendrogram.leaf_ids)
    step, margin, top, span = 32, 110, 40, 360
    max_d = max((mg.distance for mg in dendrogram.merges), default=0.0) or 1.0
    pos = {dendrogram.leaf_ids.index(s): (0.0, top + i * step) for i, s in enumerate(order)}

    def sx(d):
        return margin + span * d / max_d

    body = [f'<text x="{margin}" y="24" font-size="14">{escape(title)}</text>']
    for i, s in enumerate(order):
        body.append(f'<text x="{margin - 6}" y="{top + i * step + 4}" text-anchor="end">{escape(s)}</text>')
    for t, mg in enumerate(dendrogram.merges):
        (dl, yl), (dr, yr) = pos[mg.left], pos[mg.right]
        x = sx(mg.distance)
        body.append(f'<path d="M{sx(dl):.1f},{yl:.1f} H{x:.1f} V{yr:.1f} H{sx(dr):.1f}" '
                    f'fill="none" stroke="#08306b" stroke-width="1.5"/>')
        pos[m + t] = (mg.distance, (yl + yr) / 2)
    axis_y = top + (m - 1) * step + 24
    body.append(f'<line x1="{margin}" y1="{axis_y}" x2="{margin + span}" y2="{axis_y}" stroke="#000000"/>')
    for q in range(5):
        d = max_d * q / 4
        body.append(f'<text x="{sx(d):.1f}" y="{axis_y + 16}" text-anchor="middle">{d:.2f}</text>')
    return _svg(margin + span + 40, axis_y + 30, body)
