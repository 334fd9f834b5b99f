"""Mixed-radix codes for dense tables over finite product spaces.

One layout is used everywhere in the package: coordinates are ordered
``(x_0, y_0, x_1, y_1, ...)`` with earlier times more significant, and a
tuple's code is its row-major rank under that order.  Table row indices,
flattened path indices and ndarray axes all follow this single convention.
"""
from __future__ import annotations

import math
from typing import Sequence

from .errors import DomainError


def product_size(sizes: Sequence[int]) -> int:
    """Number of tuples in the product space with the given per-coordinate sizes."""
    return math.prod(sizes)


def encode(digits: Sequence[int], sizes: Sequence[int]) -> int:
    """Row-major rank of ``digits`` in the product space described by ``sizes``."""
    if len(digits) != len(sizes):
        raise DomainError(
            f"digit count {len(digits)} does not match radix count {len(sizes)}"
        )
    code = 0
    for d, s in zip(digits, sizes):
        if not 0 <= d < s:
            raise DomainError(f"digit {d} out of range for alphabet of size {s}")
        code = code * s + d
    return code


def decode(code: int, sizes: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`encode`."""
    total = product_size(sizes)
    if not 0 <= code < total:
        raise DomainError(f"code {code} out of range for a space of {total} tuples")
    digits = []
    for s in reversed(sizes):
        digits.append(code % s)
        code //= s
    return tuple(reversed(digits))


def interleave(x_part: Sequence[int], y_part: Sequence[int]) -> tuple[int, ...]:
    """Merge per-time coordinates into the canonical interleaved order.

    ``y_part`` may be one element shorter than ``x_part``, which is the shape
    of a channel-step history ``(x^i, y^{i-1})``.
    """
    if len(y_part) not in (len(x_part), len(x_part) - 1):
        raise DomainError("y coordinates must number len(x) or len(x) - 1")
    out: list[int] = []
    for i, x in enumerate(x_part):
        out.append(x)
        if i < len(y_part):
            out.append(y_part[i])
    return tuple(out)
