"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extensions are used when they import; set
``NSPOT_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` records the
choice. Both backends are importable directly as :data:`compiled` (``None``
when unavailable) and :data:`python` for side-by-side testing and
benchmarking.
"""

import math
import os
from types import SimpleNamespace

from . import _py

python = SimpleNamespace(
    name="python",
    loglik_model1=_py.loglik_model1,
    loglik_model2=_py.loglik_model2,
    rate_part=_py.rate_part,
    tail_model1=_py.tail_model1,
    tail_model2=_py.tail_model2,
    min_linear=_py.min_linear,
    simulate_path=_py.simulate_path,
)

try:
    from . import _loglik, _simulate
except ImportError:  # extension not built
    compiled = None
else:
    compiled = SimpleNamespace(
        name="compiled",
        loglik_model1=_loglik.loglik_model1,
        loglik_model2=_loglik.loglik_model2,
        rate_part=_loglik.rate_part,
        tail_model1=_loglik.tail_model1,
        tail_model2=_loglik.tail_model2,
        min_linear=_loglik.min_linear,
        simulate_path=_simulate.simulate_path,
    )

if compiled is not None and os.environ.get("NSPOT_PURE_PYTHON", "") in ("", "0"):
    active = compiled
else:
    active = python

BACKEND = active.name


def finalize(nbad, total):
    """Map a raw kernel result to a log-likelihood (``-inf`` when invalid)."""
    if nbad or not math.isfinite(total):
        return -math.inf
    return total


def loglik(kind, CT, CeT, ye, csum_e, theta, u, backend=None):
    """Log-likelihood for model ``kind`` (1 or 2) from prepared arrays."""
    k = backend or active
    if kind == 1:
        return finalize(*k.loglik_model1(CT, CeT, ye, csum_e, theta))
    return finalize(*k.loglik_model2(CT, CeT, ye, csum_e, theta, u))


def rate(CT, csum_e, r, grad=None, backend=None):
    """Logistic (exceedance-indicator) part of the log-likelihood.

    ``grad``, when given, is overwritten with the gradient in ``r``.
    """
    return (backend or active).rate_part(CT, csum_e, r, grad)


def tail(kind, CT, CeT, ye, theta, u, backend=None, check=True):
    """GPD part of the log-likelihood (``-inf`` when the link is invalid).

    For Model II, ``check=False`` skips the positivity scan over all rows;
    the caller must then have established it.
    """
    k = backend or active
    if kind == 1:
        return finalize(*k.tail_model1(CeT, ye, theta))
    return finalize(*k.tail_model2(CT, CeT, ye, theta, u, check))


def min_linear(CT, w, backend=None):
    """Smallest ``w . c_t`` over the rows of the design."""
    return (backend or active).min_linear(CT, w)
