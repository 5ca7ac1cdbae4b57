"""Hot inner-loop kernels for dense forward/backward passes and updates.

The compiled extension ``_ckernels`` is used when it has been built;
otherwise the numpy implementation in ``_pykernels`` is loaded. Setting the
environment variable ``JOINTUQ_PURE_PYTHON=1`` forces the fallback.

``BACKEND`` names the active implementation (``"cython"`` or ``"numpy"``).
"""

import os

from . import _pykernels as reference
from ._pykernels import (
    HEAD_SIGMOID,
    HEAD_SOFTPLUS,
    LINEAR,
    LOSS_MAE,
    LOSS_MSE,
    RELU,
    SIGMOID,
    SOFTPLUS,
    TANH,
    sigmoid,
    softplus,
)

compiled = None
if os.environ.get("JOINTUQ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else reference
BACKEND = "cython" if compiled is not None else "numpy"

forward_pass = _impl.forward_pass
backward_pass = _impl.backward_pass
nesterov_update = _impl.nesterov_update
joint_loss_batch = _impl.joint_loss_batch
regressor_loss_batch = _impl.regressor_loss_batch

__all__ = [
    "BACKEND",
    "HEAD_SIGMOID",
    "HEAD_SOFTPLUS",
    "LINEAR",
    "LOSS_MAE",
    "LOSS_MSE",
    "RELU",
    "SIGMOID",
    "SOFTPLUS",
    "TANH",
    "backward_pass",
    "compiled",
    "forward_pass",
    "joint_loss_batch",
    "nesterov_update",
    "reference",
    "regressor_loss_batch",
    "sigmoid",
    "softplus",
]
