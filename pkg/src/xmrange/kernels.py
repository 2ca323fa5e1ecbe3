"""Hot inner loops, compiled when the extension is available.

Set ``XMRANGE_PURE=1`` to force the pure-Python implementation.
"""

import os

if os.environ.get("XMRANGE_PURE"):
    from ._kernels_py import (batch_pairs, count_bounds, filter_bounds,  # noqa: F401
                              filter_bounds_into, filter_dominating)
    COMPILED = False
else:
    try:
        from ._ext.kernels import (batch_pairs, count_bounds, filter_bounds,  # noqa: F401
                                   filter_bounds_into, filter_dominating)
        COMPILED = True
    except ImportError:  # pragma: no cover - depends on the build
        from ._kernels_py import (batch_pairs, count_bounds, filter_bounds,  # noqa: F401
                                  filter_bounds_into, filter_dominating)
        COMPILED = False
