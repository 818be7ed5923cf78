"""Kernel backend selection: compiled extension if built, numpy reference otherwise."""

from . import _ref

try:
    from . import _fast as _impl

    HAVE_FAST = True
except ImportError:
    _impl = _ref
    HAVE_FAST = False

tri_element_arrays = _impl.tri_element_arrays
tet_element_arrays = _impl.tet_element_arrays
radial_ode_sweep = _impl.radial_ode_sweep
radial_ode_span = _impl.radial_ode_span

__all__ = [
    "HAVE_FAST",
    "tri_element_arrays",
    "tet_element_arrays",
    "radial_ode_sweep",
    "radial_ode_span",
    "_ref",
]
