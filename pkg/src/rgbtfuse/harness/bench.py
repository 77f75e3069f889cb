"""Shift-sensitivity table of IoU, GIoU and GeoShape for square boxes."""
import json

from ..assign import Box, GeoShapeParams, geoshape, giou, iou

COLUMNS = ("size", "shift", "iou", "iou_analytic", "giou", "geoshape")


def assign_bench(sizes, shifts, params=GeoShapeParams()):
    """Compare metrics for a k x k box against its copy shifted by delta along x.

    ``iou_analytic`` is ``(k - delta) / (k + delta)`` for ``delta <= k`` and
    ``None`` otherwise.
    """
    sizes, shifts = list(sizes), list(shifts)
    if not sizes or not shifts:
        raise ValueError("sizes and shifts must be non-empty")
    rows = []
    for k in sizes:
        for delta in shifts:
            a = Box(0.0, 0.0, float(k), float(k))
            g = Box(float(delta), 0.0, float(k), float(k))
            rows.append(
                {
                    "size": k,
                    "shift": delta,
                    "iou": iou(a, g),
                    "iou_analytic": (k - delta) / (k + delta) if abs(delta) <= k else None,
                    "giou": giou(a, g),
                    "geoshape": geoshape(a, g, params),
                }
            )
    return rows


def format_table(rows):
    def cell(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.6f}"
        return str(v)

    lines = ["\t".join(COLUMNS)]
    lines += ["\t".join(cell(row[c]) for c in COLUMNS) for row in rows]
    return "\n".join(lines)


def format_json(rows):
    return json.dumps(rows, indent=2)
