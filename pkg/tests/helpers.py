"""Shared test utilities: box grids for sweeps and scalar re-implementations
of the attention formulas used as independent oracles."""

import math

import numpy as np

from relvqa.geometry import BBox


def grid_boxes(n_positions=5, sizes=(2, 5, 12), span=40):
    """Integer-coordinate boxes over a coarse grid, mixed sizes."""
    boxes = []
    coords = np.linspace(0, span, n_positions).astype(int)
    for x in coords:
        for y in coords:
            for s in sizes:
                boxes.append(BBox(float(x), float(y), float(s), float(s + 1)))
    return boxes


def scalar_sinusoid(raw, d_h, base=1000.0):
    out = []
    for c in raw:
        for t in range(d_h // 8):
            wav = base ** (8.0 * t / d_h)
            out.append(math.sin(c / wav))
            out.append(math.cos(c / wav))
    return out


def scalar_relative_geometry(bi, bj, eps=1e-3):
    return [
        math.log(max(abs(bi.x - bj.x), eps)) - math.log(bi.w),
        math.log(max(abs(bi.y - bj.y), eps)) - math.log(bi.h),
        math.log(bj.w) - math.log(bi.w),
        math.log(bj.h) - math.log(bi.h),
    ]


def scalar_implicit_attention(vprime, boxes, u, v, w_geom, d_h, eps=1e-3, base=1000.0):
    """Plain-loop recomputation of the geometry-gated attention rows."""
    k = len(boxes)
    dh = len(u)
    scale = 1.0 / math.sqrt(dh)
    alpha = [[0.0] * k for _ in range(k)]
    for i in range(k):
        ui = [sum(u[r][c] * vprime[i][c] for c in range(len(vprime[i]))) for r in range(dh)]
        row_num = []
        for j in range(k):
            vj = [sum(v[r][c] * vprime[j][c] for c in range(len(vprime[j]))) for r in range(dh)]
            av = scale * sum(ui[r] * vj[r] for r in range(dh))
            emb = scalar_sinusoid(scalar_relative_geometry(boxes[i], boxes[j], eps), d_h, base)
            ab = max(0.0, sum(w_geom[t] * emb[t] for t in range(d_h)))
            row_num.append(ab * math.exp(av))
        z = sum(row_num)
        if z == 0.0:
            for j in range(k):
                alpha[i][j] = 1.0 / k
        else:
            for j in range(k):
                alpha[i][j] = row_num[j] / z
    return alpha


def scalar_explicit_attention(vprime, neighbors, u, v_dir, c_lab, k):
    """Plain-loop recomputation of the directed labeled attention rows."""
    dh = len(u)
    scale = 1.0 / math.sqrt(dh)
    alpha = [[0.0] * k for _ in range(k)]
    for i in range(k):
        ui = [sum(u[r][c] * vprime[i][c] for c in range(len(vprime[i]))) for r in range(dh)]
        terms = []
        for j, label, dcode in neighbors[i]:
            vm = v_dir[dcode]
            vj = [sum(vm[r][c] * vprime[j][c] for c in range(len(vprime[j]))) for r in range(dh)]
            logit = scale * sum(ui[r] * vj[r] for r in range(dh)) + c_lab[label]
            terms.append((j, math.exp(logit)))
        z = sum(t for _, t in terms)
        for j, t in terms:
            alpha[i][j] = t / z
    return alpha
