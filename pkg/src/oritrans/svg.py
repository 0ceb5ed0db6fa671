"""Write-only figures and per-atom tables."""
from __future__ import annotations

import csv
import io
import math

from .coefficients import Alpha, PhiNorm, cost_C
from .currents import PolyCurrent1
from .geometry import point_to_float

_HEAD = """<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto">
<path d="M0,0 L10,5 L0,10 z" fill="#333"/></marker></defs>
<rect width="100%" height="100%" fill="white"/>
"""


def _label(coef) -> str:
    nz = [(k, x) for k, x in enumerate(coef) if x]
    if len(nz) > 3:
        return f"{len(nz)} channels"
    return " ".join(f"{k}:{x:g}" if isinstance(x, float) else f"{k}:{x}" for k, x in nz)


def render(T: PolyCurrent1 | None = None, points=(), segments=(), title: str = "", size: int = 480) -> str:
    """SVG of terminals (numbered), current atoms (arrows along the stored
    orientation, labelled with their nonzero coefficients) and plain segments."""
    pts = [point_to_float(p)[:2] for p in points]
    atoms = [] if T is None else [((point_to_float(s.a)[:2], point_to_float(s.b)[:2]), c) for s, c in T.atoms]
    plain = [(point_to_float(s.a)[:2], point_to_float(s.b)[:2]) for s in segments]
    xs = [p[0] for p in pts] + [q[0] for (a, b), _ in atoms for q in (a, b)] + [q[0] for a, b in plain for q in (a, b)]
    ys = [p[1] for p in pts] + [q[1] for (a, b), _ in atoms for q in (a, b)] + [q[1] for a, b in plain for q in (a, b)]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    pad = 40

    def tr(p):
        x = pad + (p[0] - min(xs)) / span * (size - 2 * pad)
        y = size - pad - (p[1] - min(ys)) / span * (size - 2 * pad)
        return x, y

    out = [_HEAD.format(w=size, h=size)]
    if title:
        out.append(f'<text x="10" y="20" font-size="14">{title}</text>\n')
    for a, b in plain:
        (x1, y1), (x2, y2) = tr(a), tr(b)
        out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="#aaa" stroke-dasharray="4 3"/>\n')
    for (a, b), c in atoms:
        (x1, y1), (x2, y2) = tr(a), tr(b)
        out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="#333" '
                   f'stroke-width="2" marker-end="url(#arrow)"/>\n')
        out.append(f'<text x="{(x1 + x2) / 2 + 4:.2f}" y="{(y1 + y2) / 2 - 4:.2f}" font-size="10" '
                   f'fill="#06c">{_label(c)}</text>\n')
    for k, p in enumerate(pts):
        x, y = tr(p)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="5" fill="#c30"/>\n')
        out.append(f'<text x="{x + 7:.2f}" y="{y + 14:.2f}" font-size="12">{k}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def atom_table(T: PolyCurrent1, phi: PhiNorm | None = None, alpha=None) -> str:
    """CSV rows (a, b, length, theta_minus, theta_plus, cost) per atom.

    theta_minus / theta_plus are the summed negative / positive coefficients;
    cost is the per-unit-length multi-material cost when phi and alpha are given.
    """
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["a", "b", "length", "theta_minus", "theta_plus", "cost"])
    alpha = Alpha.of(alpha) if alpha is not None else None
    for s, c in T.atoms:
        plus = sum(x for x in c if x > 0)
        minus = -sum(x for x in c if x < 0)
        cost = cost_C(c, phi, alpha) if phi is not None else math.nan
        w.writerow([" ".join(str(x) for x in s.a), " ".join(str(x) for x in s.b),
                    repr(s.length()), minus, plus, cost])
    return buf.getvalue()
