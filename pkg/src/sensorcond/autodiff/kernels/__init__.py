"""Kernel backend selection.

The recurrent layer is the hot loop of every training run, so it has two
interchangeable implementations: a Cython extension (built by setup.py) and
a pure-numpy fallback. Selection happens once at import time:

    SENSORCOND_KERNELS=auto      compiled if available, else python (default)
    SENSORCOND_KERNELS=compiled  require the extension, fail if missing
    SENSORCOND_KERNELS=python    force the numpy fallback

Both backends implement identical math on float64; they agree to within a
few ulp (the compiled path uses libm transcendentals, numpy its own), and
each is individually deterministic. `benchmarks/compare_backends.py` times
one against the other.
"""

import os

from ...errors import ConfigError
from . import _recurrent_py

_choice = os.environ.get("SENSORCOND_KERNELS", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ConfigError(f"SENSORCOND_KERNELS must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    recurrent = _recurrent_py
else:
    try:
        from . import _recurrent_cy as recurrent  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise ConfigError(
                "SENSORCOND_KERNELS=compiled but the extension is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`")
        recurrent = _recurrent_py


def backend_name() -> str:
    return recurrent.BACKEND
