"""Pure-Python mining kernels; same contract as the compiled ``_ckernels``.

The corpus is one flat ``array('i')`` of item ids plus ``offsets`` so that
sequence ``s`` occupies ``flat[offsets[s]:offsets[s + 1]]``. A projection
is a pair of parallel arrays: the sequences containing a prefix and the
flat index where the earliest match of that prefix ends.
"""

from __future__ import annotations

from array import array


def count_extensions(flat, offsets, proj_seq, proj_pos, n_items: int) -> array:
    """For every item, count projected sequences holding it after the prefix."""
    counts = array("i", bytes(4 * n_items))
    for s, p in zip(proj_seq, proj_pos):
        for item in set(flat[p + 1 : offsets[s + 1]]):
            counts[item] += 1
    return counts


def project(flat, offsets, proj_seq, proj_pos, item: int) -> tuple[array, array]:
    """Extend the projection by ``item``, keeping the leftmost match."""
    out_seq = array("i")
    out_pos = array("i")
    for s, p in zip(proj_seq, proj_pos):
        try:
            idx = flat.index(item, p + 1, offsets[s + 1])
        except ValueError:
            continue
        out_seq.append(s)
        out_pos.append(idx)
    return out_seq, out_pos
