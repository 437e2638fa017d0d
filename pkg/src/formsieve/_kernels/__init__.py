"""Kernel selection: compiled extension if built, else the pure twin.

FORMSIEVE_PURE=1 forces the pure kernels.  Both produce identical results;
only speed differs.
"""

import os

from . import pure

if os.environ.get("FORMSIEVE_PURE") == "1":
    impl = pure
else:
    try:
        from . import _fast as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pure

KERNEL_NAME = impl.KERNEL_NAME
eliminate_cubes = impl.eliminate_cubes
runs_subtract = impl.runs_subtract
runs_intersect_len = impl.runs_intersect_len
runs_block_counts = impl.runs_block_counts
floor_pair_windows = impl.floor_pair_windows
