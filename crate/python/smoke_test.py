"""Smoke test for the coldstart_py extension module.

Build and install the module first, e.g.

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math

import coldstart_py as cs


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def test_calibration():
    report = cs.calibrate(100, 30, 0.9)
    assert close(report.k_min_dominance, 296.0), report.k_min_dominance
    assert close(report.k_min_descending, 299.0), report.k_min_descending
    assert report.recommended_k > report.k_min_descending
    assert report.threshold == cs.recommend_threshold(30, 0.9, 0.01)
    assert close(cs.expected_liar_per_round(0.9, 329.0, 30), -0.1)
    assert abs(cs.escape_probability(30, 0.9, 100) - 0.7161) < 5e-5
    try:
        cs.calibrate(100, 30, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("p = 1 should be rejected")


def test_game():
    params = cs.GameParams(100, 30, 0.9, 329.0)
    assert params.is_lying_dominated()
    assert not cs.GameParams(100, 30, 0.9, 290.0).is_lying_dominated()
    matrix = params.matrix()
    requester, responder = matrix.cell("R", "L")
    assert responder < 0 < matrix.cell("BT", "T")[0]
    # Pure strategies alone leave lying optimal; only the mixed strategy deters it.
    assert matrix.eliminate() == ("BT", "L"), matrix.eliminate()
    print(matrix)


def test_oracles():
    payoff = cs.mc_liar_payoff(0.9, 329.0, 30, trials=200_000, seed=5)
    assert payoff.agrees_with(-0.1), payoff
    escape = cs.mc_escape_frequency(30, 0.9, 100, trials=20_000, seed=5)
    assert escape.agrees_with(cs.escape_probability(30, 0.9, 100)), escape
    assert close(cs.enumerate_escape_probability(3, 0.5, 10), cs.escape_probability(3, 0.5, 10), 1e-12)


def test_ledger():
    ledger = cs.TrustLedger(0.0, 2.0, 5.0)
    a, b = ledger.register(), ledger.register()
    ledger.credit(a)
    ledger.credit(a)
    ledger.penalize(b)
    assert ledger.scores() == [2.0, 0.0]
    assert ledger.passes_threshold(a) and not ledger.passes_threshold(b)


def test_simulation():
    config = "\n".join(
        [
            "good = 60",
            "bad = 10",
            "liar = 10",
            "newcomers = 5:5:good",
            "catalog_size = 100",
            "n = 10",
            "p = 0.9",
            "j = 8",
            "threshold = 5",
            "total_cycles = 20",
        ]
    )
    first = cs.simulate(config, seed=4)
    again = cs.simulate(config, seed=4)
    other = cs.simulate(config, seed=5)
    assert len(first) == 20
    assert first.to_csv() == again.to_csv()
    assert first.to_csv() != other.to_csv()
    rows = first.rows()
    good = cs.MetricsSeries.columns.index("avg_trust_good")
    assert rows[-1][good] > rows[0][good]
    assert cs.MetricsSeries.from_csv(first.to_csv()).to_csv() == first.to_csv()
    assert "<svg" in first.to_svg()
    assert "good = 1400" in cs.desk_scale_config()


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
    print("python smoke test passed")
