"""Selects the compiled kernels when importable, else the pure-Python ones.

Set ``THERMOLOCK_PURE=1`` to force the fallback.
"""

import os

from thermolock import _pykernels as python_impl

if os.environ.get("THERMOLOCK_PURE"):
    impl = python_impl
    compiled_impl = None
else:
    try:
        from thermolock import _ckernels as compiled_impl
    except ImportError:  # extension not built
        compiled_impl = None
    impl = compiled_impl or python_impl

IMPLEMENTATION = impl.IMPLEMENTATION
toeplitz_bits = impl.toeplitz_bits
toeplitz_batch = impl.toeplitz_batch
erasure_counts = impl.erasure_counts
memory_oracle = impl.memory_oracle
