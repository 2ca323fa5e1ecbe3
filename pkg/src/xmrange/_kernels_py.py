"""Pure-Python versions of the hot loops (fallback for the compiled core)."""


def filter_bounds(recs, b):
    """Records of ``recs`` whose (x, y, z) lie in the closed box ``b``."""
    x0, x1, y0, y1, z0, z1 = b
    return [r for r in recs
            if x0 <= r[0] <= x1 and y0 <= r[1] <= y1 and z0 <= r[2] <= z1]


def filter_bounds_into(out, recs, b):
    x0, x1, y0, y1, z0, z1 = b
    for r in recs:
        if x0 <= r[0] <= x1 and y0 <= r[1] <= y1 and z0 <= r[2] <= z1:
            out.append(r)


def count_bounds(recs, b):
    x0, x1, y0, y1, z0, z1 = b
    n = 0
    for r in recs:
        if x0 <= r[0] <= x1 and y0 <= r[1] <= y1 and z0 <= r[2] <= z1:
            n += 1
    return n


def filter_dominating(recs, q):
    """Records dominating ``q`` (all three coordinates >=)."""
    qx, qy, qz = q[0], q[1], q[2]
    return [r for r in recs if r[0] >= qx and r[1] >= qy and r[2] >= qz]


def batch_pairs(chunk, boxes):
    """All ``(j,) + record`` with the record inside boxes[j]."""
    out = []
    for j, b in enumerate(boxes):
        x0, x1, y0, y1, z0, z1 = b
        for r in chunk:
            if x0 <= r[0] <= x1 and y0 <= r[1] <= y1 and z0 <= r[2] <= z1:
                out.append((j,) + r)
    return out
