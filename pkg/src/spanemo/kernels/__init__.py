"""Per-example loss kernels with a compiled fast path.

Both backends expose the same two functions:

``bce_batch(y, y_hat, eps)``
    Per-example binary cross-entropy (mean over classes) and its gradient
    with respect to ``y_hat``. Entries of ``y_hat`` are clamped to
    ``[eps, 1 - eps]`` before the logs; the gradient is 0 where the clamp
    is active.

``lca_batch(y, y_hat)``
    Per-example pairwise exponential margin loss over all
    (negative, positive) class pairs,
    ``mean over pairs of exp(y_hat[neg] - y_hat[pos])``,
    and its gradient. Examples whose positive or negative set is empty
    contribute exactly 0 loss and 0 gradient.

The Cython extension is selected at import when it was compiled; set
``SPANEMO_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

if os.environ.get("SPANEMO_PURE_PYTHON"):
    from spanemo.kernels import py_kernels as _impl

    BACKEND = "python"
else:
    try:
        from spanemo.kernels import _fast as _impl

        BACKEND = "cython"
    except ImportError:
        from spanemo.kernels import py_kernels as _impl

        BACKEND = "python"

bce_batch = _impl.bce_batch
lca_batch = _impl.lca_batch

__all__ = ["BACKEND", "bce_batch", "lca_batch"]
