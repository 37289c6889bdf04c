"""Kernel backend selection.

The compiled extensions ``diskrul._clstm`` and ``diskrul._csplit`` are used
when importable; set ``DISKRUL_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_lstm = _split = _pykernels

if os.environ.get("DISKRUL_PURE_PYTHON") != "1":
    try:
        from . import _clstm, _csplit
    except ImportError:
        pass
    else:
        _lstm, _split = _clstm, _csplit
        BACKEND = "cython"

lstm_gates_forward = _lstm.lstm_gates_forward
lstm_gates_backward = _lstm.lstm_gates_backward
best_split = _split.best_split

__all__ = ["BACKEND", "lstm_gates_forward", "lstm_gates_backward", "best_split"]
