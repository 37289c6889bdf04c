"""Compiled vs numpy kernels, alone and inside one training step.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Reports the best-of-``repeat`` wall time per call for each backend and the
speedup of the compiled one. Without the extension only the numpy column
is filled.
"""
import argparse
import json
import timeit

import numpy as np

from diskrul import _pykernels, kernels

try:
    from diskrul import _clstm, _csplit
except ImportError:  # extension not built
    _clstm = _csplit = None


def _time(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def lstm_cases(rng):
    for dtype in (np.float32, np.float64):
        for B, H in ((64, 50), (64, 200)):
            z = rng.standard_normal((B, 4 * H)).astype(dtype) * 3
            c = rng.standard_normal((B, H)).astype(dtype)
            gates, _, tc, _ = _pykernels.lstm_gates_forward(z, c)
            dh = rng.standard_normal((B, H)).astype(dtype)
            tag = f"{np.dtype(dtype).name} B={B} H={H}"
            yield f"lstm forward  {tag}", "lstm_gates_forward", (z, c)
            yield f"lstm backward {tag}", "lstm_gates_backward", (dh, c, gates, c, tc)


def split_cases(rng):
    for n in (1_000, 100_000):
        x = np.sort(rng.integers(0, n // 10, n).astype(np.float64))
        r = rng.standard_normal(n)
        yield f"best_split n={n}", "best_split", (x, r, 5)


def training_step(module_lstm, number, repeat):
    """One forward+backward of the (50, 1, 1) model on a 64-window batch."""
    from diskrul.seqnet import EncoderDecoderConfig, EncoderDecoderModel, backward, forward

    saved = kernels.lstm_gates_forward, kernels.lstm_gates_backward
    kernels.lstm_gates_forward = module_lstm.lstm_gates_forward
    kernels.lstm_gates_backward = module_lstm.lstm_gates_backward
    try:
        cfg = EncoderDecoderConfig(50, 1, 1, 15, 25)
        model = EncoderDecoderModel.init(cfg, seed=0, precision="single")
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 255, (64, 25, 15))
        Y = rng.uniform(0, 150, (64, 25))

        def step():
            _, cache = forward(model, X)
            backward(model, cache, Y)

        return _time(step, number, repeat)
    finally:
        kernels.lstm_gates_forward, kernels.lstm_gates_backward = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    rows = []
    for label, name, call_args in list(lstm_cases(rng)) + list(split_cases(rng)):
        compiled = {"lstm": _clstm, "best": _csplit}[name[:4]]
        number = 20 if name == "best_split" else 500
        py = _time(lambda: getattr(_pykernels, name)(*call_args), number, args.repeat)
        cy = None if compiled is None else _time(
            lambda: getattr(compiled, name)(*call_args), number, args.repeat)
        rows.append((label, py, cy))
    py = training_step(_pykernels, 5, args.repeat)
    cy = None if _clstm is None else training_step(_clstm, 5, args.repeat)
    rows.append(("training step (50,1,1) B=64 T=25 single", py, cy))

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'case':<42} {'numpy':>11} {'compiled':>11} {'speedup':>8}")
    for label, py, cy in rows:
        cy_s = "-" if cy is None else f"{cy * 1e6:9.1f}us"
        sp = "-" if cy is None else f"{py / cy:7.2f}x"
        print(f"{label:<42} {py * 1e6:9.1f}us {cy_s:>11} {sp:>8}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([{"case": l, "numpy_s": p, "compiled_s": c} for l, p, c in rows], fh, indent=2)


if __name__ == "__main__":
    main()
