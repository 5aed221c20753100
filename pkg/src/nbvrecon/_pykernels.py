"""Pure numpy versions of the visibility kernels (fallback for the compiled core)."""

import numpy as np

# minimal parametric overlap for a segment to count as passing through a pixel
OVERLAP_EPS = 1e-12
_CHUNK = 256


def _blocked_chunk(cx, cy, tx, ty, tpix, occ, h, neighborhood):
    dx = (tx - cx)[:, None]
    dy = (ty - cy)[:, None]
    x_lo = occ[None, :, 0] * h
    y_lo = occ[None, :, 1] * h

    with np.errstate(divide="ignore", invalid="ignore"):
        ax = (x_lo - cx) / dx
        bx = (x_lo + h - cx) / dx
        ay = (y_lo - cy) / dy
        by = (y_lo + h - cy) / dy
    t_in = np.maximum(np.minimum(ax, bx), np.minimum(ay, by))
    t_out = np.minimum(np.maximum(ax, bx), np.maximum(ay, by))

    # axis-parallel segments: must lie strictly inside the slab
    flat_x = dx == 0
    flat_y = dy == 0
    inside_x = (cx > x_lo) & (cx < x_lo + h)
    inside_y = (cy > y_lo) & (cy < y_lo + h)
    t_in = np.where(flat_x, np.where(flat_y, 0.0, np.minimum(ay, by)), t_in)
    t_out = np.where(flat_x, np.where(flat_y, 1.0, np.maximum(ay, by)), t_out)
    t_in = np.where(flat_y & ~flat_x, np.minimum(ax, bx), t_in)
    t_out = np.where(flat_y & ~flat_x, np.maximum(ax, bx), t_out)
    ok_axis = np.where(flat_x, inside_x, True) & np.where(flat_y, inside_y, True)

    hit = ok_axis & (np.minimum(t_out, 1.0) - np.maximum(t_in, 0.0) > OVERLAP_EPS)
    near = np.maximum(
        np.abs(occ[None, :, 0] - tpix[:, None, 0]), np.abs(occ[None, :, 1] - tpix[:, None, 1])
    )
    hit &= near > neighborhood
    return hit.any(axis=1)


def segments_clear(cx, cy, targets, target_pix, occluders, h, neighborhood=1):
    """For each target, True when the segment from the camera reaches it unobstructed.

    targets: (m, 2) float points; target_pix: (m, 2) their integer pixels;
    occluders: (k, 2) integer pixels treated as open h x h squares. Occluders
    within Chebyshev pixel distance ``neighborhood`` of a target's own pixel
    are ignored for that target.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    target_pix = np.asarray(target_pix, dtype=np.int64).reshape(-1, 2)
    occ = np.asarray(occluders, dtype=np.int64).reshape(-1, 2)
    out = np.ones(len(targets), dtype=bool)
    if len(targets) == 0 or len(occ) == 0:
        return out
    for s in range(0, len(targets), _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[sl] = ~_blocked_chunk(
            cx, cy, targets[sl, 0], targets[sl, 1], target_pix[sl], occ, h, neighborhood
        )
    return out
