"""Runtime and memory scaling harness for the journey fitters.

Each (method, size) cell runs in a fresh subprocess so memory readings
start from a clean interpreter. The child fits one model and prints a
single JSON line; the parent samples the child's resident set at 20 Hz
with psutil while it runs and merges in the child's own getrusage peak.
Resident-set numbers are therefore approximate: they bound the true
peak from below by the sampling gap and include interpreter overhead.

Outputs land in two files to keep reruns comparable:

``bench.csv``               method,n,d,epochs_to_tol,final_ci
                            deterministic given the seed
``bench_measurements.csv``  method,n,d,wall_time_s,peak_resident_bytes,
                            peak_traced_bytes,status
                            timing and memory, machine-dependent

``epochs_to_tol`` counts alternating rounds (spectral) or epochs (gd)
until the tolerance was met, -1 when the cap was hit or the cell
failed. Cells run sequentially so they never contend for memory.
"""

import argparse
import csv
import json
import os
import resource
import subprocess
import sys
import time
import tracemalloc

import numpy as np
import psutil

METHODS = ("spectral", "gd-full", "gd-minibatch")

_SAMPLE_INTERVAL_S = 0.05  # 20 Hz, above the 10 Hz floor the contract pins

# Constant-step mini-batch descent diverges at the full-batch default
# step on journey data; this is the largest stable power of ten there.
_MINIBATCH_STEP = 0.05
_MINIBATCH_FRACTION = 0.2


def run_cell(method, n, d, max_items, seed, tol, epochs):
    """Fit one cell and return its measurement dict (runs in the child)."""
    from .extensions import counting_process_fit, flatten_journeys
    from .generate import generate_ads
    from .metrics import concordance_index
    from .predictors import FitConfig, LinearExp, gd_mle_fit

    tracemalloc.start()
    train_ads, _ = generate_ads(n, max_items, seed=seed, d=d, split="train")
    test_ads, _ = generate_ads(max(n // 5, 10), max_items, seed=seed, d=d, split="test")
    started = time.perf_counter()

    predictor = LinearExp(d)
    if method == "spectral":
        result = counting_process_fit(
            train_ads, predictor=predictor, tol=tol, outer_iters=epochs, seed=seed
        )
        epochs_to_tol = len(result.diagnostics) if result.converged else -1
    else:
        flat_train, _ = flatten_journeys(train_ads)
        trace = []
        cfg = FitConfig(
            epochs=epochs,
            tol=tol,
            seed=seed,
            step_size=_MINIBATCH_STEP if method == "gd-minibatch" else 1.0,
            batch_fraction=_MINIBATCH_FRACTION if method == "gd-minibatch" else None,
        )
        gd_mle_fit(predictor, flat_train, cfg, trace=trace)
        epochs_to_tol = len(trace) if len(trace) < epochs else -1

    wall = time.perf_counter() - started
    flat_test, _ = flatten_journeys(test_ads)
    final_ci = concordance_index(
        flat_test.time, flat_test.event, predictor.scores(flat_test.features)
    )
    _, peak_traced = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return {
        "method": method,
        "n": n,
        "d": d,
        "wall_time_s": wall,
        "peak_traced_bytes": int(peak_traced),
        "epochs_to_tol": int(epochs_to_tol),
        "final_ci": float(final_ci),
        # ru_maxrss is KiB on Linux
        "ru_maxrss": int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss),
    }


def _spawn_cell(method, n, d, max_items, seed, tol, epochs):
    cmd = [
        sys.executable,
        "-m",
        "specsurv.bench",
        "--cell",
        method,
        "--n",
        str(n),
        "--d",
        str(d),
        "--max-items",
        str(max_items),
        "--seed",
        str(seed),
        "--tol",
        repr(tol),
        "--epochs",
        str(epochs),
    ]
    return subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)


def _watch(proc, timeout):
    """Sample the child's RSS until it exits; returns (peak_bytes, timed_out)."""
    peak = 0
    deadline = time.monotonic() + timeout
    try:
        handle = psutil.Process(proc.pid)
    except psutil.NoSuchProcess:
        handle = None
    while proc.poll() is None:
        if handle is not None:
            try:
                peak = max(peak, handle.memory_info().rss)
            except psutil.NoSuchProcess:
                pass
        if time.monotonic() > deadline:
            proc.kill()
            proc.wait()
            return peak, True
        time.sleep(_SAMPLE_INTERVAL_S)
    return peak, False


def run_bench(
    sizes,
    methods,
    d,
    max_items,
    seed,
    out_dir,
    cell_timeout=600.0,
    tol=1e-4,
    epochs=500,
    log=print,
):
    """Run every (method, size) cell sequentially and write both CSVs."""
    results = []
    measurements = []
    for n in sizes:
        for method in methods:
            if method not in METHODS:
                raise ValueError(f"unknown bench method {method!r}")
            log(f"bench: {method} n={n} d={d}")
            started = time.perf_counter()
            proc = _spawn_cell(method, n, d, max_items, seed, tol, epochs)
            sampled_peak, timed_out = _watch(proc, cell_timeout)
            wall = time.perf_counter() - started
            stdout, stderr = proc.communicate()
            status = "ok"
            cell = None
            if timed_out:
                status = "timeout"
            elif proc.returncode != 0:
                status = "error"
                log(f"bench: {method} n={n} failed: {stderr.strip().splitlines()[-1:]}")
            else:
                try:
                    cell = json.loads(stdout.strip().splitlines()[-1])
                except (ValueError, IndexError):
                    status = "error"
            if cell is None:
                results.append((method, n, d, -1, float("nan")))
                measurements.append((method, n, d, wall, sampled_peak, 0, status))
                continue
            peak_rss = max(sampled_peak, cell["ru_maxrss"] * 1024)
            results.append((method, n, d, cell["epochs_to_tol"], cell["final_ci"]))
            measurements.append(
                (method, n, d, cell["wall_time_s"], peak_rss, cell["peak_traced_bytes"], status)
            )
    _write(os.path.join(out_dir, "bench.csv"),
           ("method", "n", "d", "epochs_to_tol", "final_ci"), results)
    _write(
        os.path.join(out_dir, "bench_measurements.csv"),
        ("method", "n", "d", "wall_time_s", "peak_resident_bytes",
         "peak_traced_bytes", "status"),
        measurements,
    )
    return results


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                             for v in row])


def _child_main(argv):
    parser = argparse.ArgumentParser(prog="specsurv.bench")
    parser.add_argument("--cell", required=True, choices=METHODS)
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--d", type=int, default=50)
    parser.add_argument("--max-items", type=int, default=50)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--tol", type=float, default=1e-4)
    parser.add_argument("--epochs", type=int, default=500)
    args = parser.parse_args(argv)
    cell = run_cell(args.cell, args.n, args.d, args.max_items, args.seed, args.tol, args.epochs)
    print(json.dumps(cell))
    return 0


if __name__ == "__main__":
    sys.exit(_child_main(sys.argv[1:]))
