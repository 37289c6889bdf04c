import csv

import numpy as np
import pytest

from diskrul import _pykernels, kernels

try:
    from diskrul import _clstm, _csplit
except ImportError:
    _clstm = _csplit = None

BACKENDS = ["python"] + (["cython"] if _clstm is not None else [])

# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel backend by swapping the dispatch table."""
    lstm = _pykernels if request.param == "python" else _clstm
    split = _pykernels if request.param == "python" else _csplit
    monkeypatch.setattr(kernels, "lstm_gates_forward", lstm.lstm_gates_forward)
    monkeypatch.setattr(kernels, "lstm_gates_backward", lstm.lstm_gates_backward)
    monkeypatch.setattr(kernels, "best_split", split.best_split)
    return request.param


def write_backblaze(path, rows, smart_ids=(5, 9)):
    """rows: (date, serial, model, failure, {attr: raw}) tuples."""
    header = ["date", "serial_number", "model", "capacity_bytes", "failure"]
    for a in smart_ids:
        header += [f"smart_{a}_normalized", f"smart_{a}_raw"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for date, serial, model, failure, smart in rows:
            line = [date, serial, model, "1000", int(failure)]
            for a in smart_ids:
                v = smart.get(a)
                line += ["100", "" if v is None else v]
            w.writerow(line)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        status, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}")
