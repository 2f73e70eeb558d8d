#!/usr/bin/env python3
"""Benchmark the transition kernels: pure Python vs compiled.

Runs random-policy episodes through each backend and reports steps per
second for the full env.step path and for the bare kernel call.

Usage: python benchmarks/bench_step.py [--episodes N] [--seed S]
"""

import argparse
import time

import numpy as np

from netpen import Environment, GenerationConfig
from netpen._engine import available_backends


def bench_env_steps(backend: str, episodes: int, seed: int) -> tuple[int, float]:
    env = Environment(GenerationConfig(), backend=backend)
    rng = np.random.default_rng(seed)
    steps = 0
    start = time.perf_counter()
    for i in range(episodes):
        env.reset(seed=seed if i == 0 else None)
        while True:
            result = env.step(int(rng.integers(env.action_count)))
            steps += 1
            if result.terminated or result.truncated:
                break
    return steps, time.perf_counter() - start


def bench_kernel_only(backend: str, iterations: int, seed: int) -> float:
    """Time the bare kernel on a fixed precondition-failing action (the
    common case for a random agent), excluding env bookkeeping."""
    env = Environment(GenerationConfig(), backend=backend)
    env.reset(seed=seed)
    engine = env._engine
    rng = env.state.rng
    noop_like = env.action_count - 1  # padded slot on <max-size networks, else a privesc
    start = time.perf_counter()
    for _ in range(iterations):
        engine.step(noop_like, rng, False)
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--kernel-iterations", type=int, default=200_000)
    args = parser.parse_args()

    backends = available_backends()
    print(f"available backends: {backends}")
    results = {}
    for backend in backends:
        steps, elapsed = bench_env_steps(backend, args.episodes, args.seed)
        rate = steps / elapsed
        results[backend] = rate
        print(f"[env.step   ] {backend:>8}: {steps:>8} steps in {elapsed:6.2f}s  ({rate:,.0f} steps/s)")
    for backend in backends:
        elapsed = bench_kernel_only(backend, args.kernel_iterations, args.seed)
        rate = args.kernel_iterations / elapsed
        print(f"[kernel only] {backend:>8}: {args.kernel_iterations:>8} calls in {elapsed:6.2f}s  ({rate:,.0f} calls/s)")
    if "compiled" in results and "python" in results:
        print(f"end-to-end speedup: {results['compiled'] / results['python']:.2f}x")


if __name__ == "__main__":
    main()
