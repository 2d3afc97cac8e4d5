"""Backend dispatch for the trajectory scanners.

The compiled extension is optional; when it is absent (source checkout
without a C toolchain) the pure numpy implementation takes over with the
same results. `BACKEND` reports which one is active.
"""

try:
    from . import _fastpath as _impl
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _slowpath as _impl

BACKEND: str = _impl.BACKEND
ks1_first_crossing = _impl.ks1_first_crossing
ks2_first_crossing = _impl.ks2_first_crossing
