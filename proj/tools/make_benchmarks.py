"""Regenerates configs/benchmarks/*.json, the variance-study corpus.

Benchmark 00 is the two-mode benchmark (modes at -4 and +4). The rest are
drawn from a fixed seed: two to four modes, 1-D or 2-D, means at least 3
apart, and estimators are compared at the reference component's mean.
"""
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "configs" / "benchmarks"
MIN_SEPARATION = 3.0


def far_enough(p, others):
    return all(math.dist(p, q) >= MIN_SEPARATION for q in others)


def random_means(rng, count, dim):
    means, tries = [], 0
    while len(means) < count:
        tries += 1
        if tries > 1000:
            means, tries = [], 0
        if dim == 1:
            p = [round(rng.uniform(-8.0, 8.0), 2)]
        else:
            r, a = rng.uniform(2.5, 6.0), rng.uniform(0.0, 2.0 * math.pi)
            p = [round(r * math.cos(a), 2), round(r * math.sin(a), 2)]
        if far_enough(p, means):
            means.append(p)
    return means


def benchmark(name, components, reference):
    return {
        "name": name,
        "prior": {"name": name, "components": components},
        "reference": {"component_mean": reference},
        "theta": components[reference]["mean"],
    }


def main():
    rng = random.Random(20240917)
    OUT.mkdir(parents=True, exist_ok=True)
    items = [benchmark("b00-two-mode", [
        {"weight": 0.5, "mean": [-4.0], "variance": 0.25},
        {"weight": 0.5, "mean": [4.0], "variance": 0.25},
    ], 1)]
    for i in range(1, 10):
        dim = 1 if i < 5 else 2
        count = 2 + i % 3
        raw = [rng.uniform(0.5, 1.5) for _ in range(count)]
        weights = [round(w / sum(raw), 4) for w in raw]
        weights[-1] = round(1.0 - sum(weights[:-1]), 4)
        comps = [{"weight": w, "mean": m, "variance": round(rng.uniform(0.15, 0.4), 3)}
                 for w, m in zip(weights, random_means(rng, count, dim))]
        items.append(benchmark(f"b{i:02d}-{dim}d-{count}mode", comps, rng.randrange(count)))
    for b in items:
        (OUT / f"{b['name']}.json").write_text(json.dumps(b, indent=2) + "\n")


if __name__ == "__main__":
    main()
