"""Smoke test for the corrfade extension module.

Build and install first, e.g. `maturin build --release` in crates/python and
`pip install` the wheel, then run `python python/smoke_test.py`.
"""

import random

import corrfade


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol * max(1.0, abs(y)) for x, y in zip(a, b))


def main():
    rng = random.Random(1)

    profile = corrfade.Profile.two_innovation_example(1.0, 2.0)
    assert (profile.rank, profile.block_len) == (2, 3)
    assert corrfade.check_recovery_conditions_simo(profile)["passed"]

    bad = corrfade.Profile([[1, 0, 1], [0, 1, 0]])
    report = corrfade.check_recovery_conditions_simo(bad)
    assert not report["passed"]
    assert report["failures"][0]["indices"] == [("q", 2), ("t", 3)]

    for seed in range(20):
        payload = [complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(2)]
        y = corrfade.transmit(corrfade.encode_simo(payload), profile, n_r=2, seed=seed)
        x = corrfade.decode_simo(y, profile)
        assert close(x[:2], payload), (x, payload)
        assert x[2] == 1

    flat = corrfade.Profile.block_fading(6)
    payload = [[complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(4)] for _ in range(2)]
    block = corrfade.encode_mimo(payload, flat)
    x = corrfade.decode_mimo(corrfade.transmit(block, flat, n_r=2, seed=3), flat, 2)
    assert all(close(a, b) for a, b in zip(x, block))

    b, pivots = corrfade.canonical_form([[2, 0, 1], [0, 3, 2]])
    assert pivots == [0, 1] and abs(b[0][2] - 0.5) < 1e-15

    try:
        corrfade.Profile([[1, 0], [0, 1]])
    except ValueError:
        pass
    else:
        raise AssertionError("Q = T must be rejected")

    table, slope = corrfade.sweep(profile, "simo", 1, 2, [40, 50, 60, 70], 100, seed=5)
    assert table.startswith("snr,dmin,grid,bler,rate_bits\n")
    assert slope is not None and 1.2 < slope < 2.6, slope
    again, _ = corrfade.sweep(profile, "simo", 1, 2, [40, 50, 60, 70], 100, seed=5)
    assert again == table

    print("smoke test passed; slope", round(slope, 3))


if __name__ == "__main__":
    main()
