"""Keep freed numpy buffers in the heap instead of returning them to the OS.

The training loop allocates and frees the same ~1 MB activation blocks every
epoch. With glibc's default dynamic mmap threshold each of them is a fresh
mapping, and the resulting page faults cost more than the arithmetic. Raising
the mmap and trim thresholds lets the blocks be recycled. Set
``LIFTEMBED_NO_MALLOPT=1`` to skip this.
"""

import ctypes
import os
import sys

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_done = False


def tune_allocator(limit=1 << 30):
    global _done
    if _done or os.environ.get("LIFTEMBED_NO_MALLOPT") or not sys.platform.startswith("linux"):
        return False
    _done = True
    try:
        libc = ctypes.CDLL("libc.so.6")
        return bool(libc.mallopt(_M_MMAP_THRESHOLD, limit)) and bool(libc.mallopt(_M_TRIM_THRESHOLD, limit))
    except (OSError, AttributeError):
        return False
