"""Compare the compiled kernels with the numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time (``JOINTUQ_PURE_PYTHON=1`` forces numpy).

    python benchmarks/bench_kernels.py [--repeat 5] [--epochs 20] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(repeat, epochs):
    import numpy as np

    from jointuq import kernels
    from jointuq.data import gen_smooth
    from jointuq.losses import JointLossSpec
    from jointuq.nn import dense_stack, mlp_new
    from jointuq.training import TrainConfig, train_pair

    rng = np.random.default_rng(0)
    net = mlp_new(dense_stack(1, (10, 10), "tanh", "linear"), 0)
    acts = net.act_codes
    out = {"backend": kernels.BACKEND}
    for batch in (1, 20, 500):
        x = rng.normal(size=(batch, 1))
        grad = rng.normal(size=(batch, 1))
        masks = [None] * len(net.weights)

        def step():
            for _ in range(200):
                pres, posts = kernels.forward_pass(net.weights, net.biases, acts, x, masks)
                kernels.backward_pass(net.weights, acts, pres, posts, masks, grad, False)

        out[f"fwd_bwd_batch{batch}_us"] = _best(step, repeat) / 200 * 1e6

    data = gen_smooth(1000, 0)
    cfg = TrainConfig(JointLossSpec("sigmoid", 0.1), epochs=epochs, minibatch=20, learning_rate=1e-2)
    out["train_pair_s"] = _best(lambda: train_pair(data, cfg), max(1, repeat // 2))
    out["train_epochs"] = epochs
    print(json.dumps(out))


def run_backend(pure, repeat, epochs):
    env = dict(os.environ)
    env.pop("JOINTUQ_PURE_PYTHON", None)
    if pure:
        env["JOINTUQ_PURE_PYTHON"] = "1"
    cmd = [sys.executable, __file__, "--child", "--repeat", str(repeat), "--epochs", str(epochs)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--json", help="also write the raw timings here")
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.child:
        child(args.repeat, args.epochs)
        return 0

    fast = run_backend(False, args.repeat, args.epochs)
    slow = run_backend(True, args.repeat, args.epochs)
    if fast["backend"] != "cython":
        print("compiled extension not available; both runs use numpy")
    keys = [k for k in fast if k not in ("backend", "train_epochs")]
    print(f"{'measure':<24}{'cython':>12}{'numpy':>12}{'speedup':>10}")
    for k in keys:
        print(f"{k:<24}{fast[k]:>12.2f}{slow[k]:>12.2f}{slow[k] / fast[k]:>9.1f}x")
    print(f"(train_pair: smooth N=1000, minibatch 20, {args.epochs} epochs)")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"cython": fast, "numpy": slow}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
