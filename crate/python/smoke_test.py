"""Smoke test for the Python extension.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import json
import math

import hbni

SCENARIO = json.dumps({
    "version": 1,
    "M": 3,
    "true_thetas": [1, 6, 20],
    "plan": {"kind": "counts", "counts": [5, 5, 5]},
    "seed": 2,
})


def main():
    third = 1.0 / 3.0
    w = [2.0, 56.0 / 729.0, 462.0 * 3.0 ** -20]
    f = hbni.Filter([third, third, third])
    f.update([third, third, third], [1.0, 6.0, 20.0])
    post = f.posterior()
    for p, wi in zip(post, w):
        assert abs(p - wi / sum(w)) < 1e-12, post
    assert f.label() == 1 and f.n_seen == 1

    lp = hbni.log_dirichlet_obs([third, third, third], 2, 6.0)
    assert abs(lp - (math.log(56.0) - 6.0 * math.log(3.0))) < 1e-12

    obs, labels = hbni.simulate(SCENARIO)
    assert len(obs) == 15 and labels == [1] * 5 + [2] * 5 + [3] * 5

    model, diag = hbni.infer(obs, seed=5)
    assert len(model) == 200 and model.classes == 3
    diag = json.loads(diag)
    assert 0.0 <= diag["acceptance"]["theta"] <= 1.0
    again = hbni.NoiseModel.from_json(model.to_json())
    assert again.median_thetas() == model.median_thetas()

    posts = hbni.filter_distribution(obs[:4], model)
    assert len(posts) == 200 and all(abs(sum(p) - 1.0) < 1e-9 for p in posts)
    window = hbni.sliding_window_classify(obs, 3, model)
    assert len(window) == 15 and window[-1][1] in (1, 2, 3)

    mean, label = hbni.max_of_mean([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1]])
    assert label == 1 and abs(mean[0] - 0.5) < 1e-12
    assert hbni.vote([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.1, 0.8, 0.1]]) == 2
    single = hbni.ssbf([[0.2, 0.3, 0.5]])
    assert all(abs(a - b) < 1e-12 for a, b in zip(single, [0.2, 0.3, 0.5])), single

    report = json.loads(hbni.compare(SCENARIO, trials=5, n_grid=[1, 3]))
    assert report["version"] == 1 and len(report["rows"]) == 2

    try:
        hbni.Filter([0.5, 0.6])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid prior accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
