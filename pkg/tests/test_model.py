import numpy as np
import pytest

from toaloc.errors import ConfigError
from toaloc.model import (MeasurementSet, Scenario, observe_distance, pair_key, perturb_anchor,
                          substream, synthesize_measurements, true_links)


def test_perturb_zero_delta_is_identity():
    rng = np.random.default_rng(0)
    assert np.array_equal(perturb_anchor((134, 103), 0.0, rng), [134.0, 103.0])


def test_perturb_moments():
    rng = np.random.default_rng(1)
    draws = np.array([perturb_anchor((0, 0), 3.0, rng) for _ in range(100_000)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.05)
    assert np.all((draws.std(axis=0) > 2.95) & (draws.std(axis=0) < 3.05))


def test_perturb_reproducible():
    a = perturb_anchor((35, 264), 3.0, np.random.default_rng(7))
    b = perturb_anchor((35, 264), 3.0, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_perturb_rejects_negative():
    with pytest.raises(ValueError):
        perturb_anchor((0, 0), -1.0, np.random.default_rng(0))


def test_observe_distance_exact():
    rng = np.random.default_rng(0)
    assert observe_distance((0, 0), (3, 4), 0.0, rng) == 5.0
    assert observe_distance((600, 450), (431, 232), 0.0, rng) == pytest.approx(np.sqrt(169**2 + 218**2), abs=1e-9)


def test_observe_distance_unbiased():
    rng = np.random.default_rng(2)
    draws = [observe_distance((0, 0), (100, 0), 5.0, rng) for _ in range(100_000)]
    assert abs(np.mean(draws) - 100) < 0.1


def test_links_follow_radius(sc9):
    links = true_links(sc9)
    assert pair_key("n1", "a1") in links  # ~323.8 m apart
    assert pair_key("t", "a1") not in links  # ~580.4 m apart


def test_noiseless_measurements(sc9):
    sc = sc9.with_noise(sigma=0.0, delta=0.0)
    ms = synthesize_measurements(sc, np.random.default_rng(0))
    pos = sc.positions()
    for (a, b), r in ms.ranges.items():
        assert r == pytest.approx(np.hypot(*(pos[a] - pos[b])), abs=1e-12)
    for a, p in ms.observed_anchor_pos.items():
        assert np.array_equal(p, pos[a])


def test_measurements_deterministic(sc9):
    a = synthesize_measurements(sc9, substream(3, 0, 1))
    b = synthesize_measurements(sc9, substream(3, 0, 1))
    assert a.to_dict() == b.to_dict()
    c = synthesize_measurements(sc9, substream(3, 1, 1))
    assert a.to_dict() != c.to_dict()


def test_measurement_set_symmetric_lookup():
    ms = MeasurementSet({}, {pair_key("x", "a"): 4.0})
    assert ms.range("x", "a") == ms.range("a", "x") == 4.0
    assert ms.has_link("a", "x") and not ms.has_link("a", "y")


def test_scenario_round_trip(sc9):
    assert Scenario.from_dict(sc9.to_dict()) == sc9


@pytest.mark.parametrize("patch, field", [
    ({"comm_radius": 0}, "comm_radius"),
    ({"sigma": -1}, "sigma"),
    ({"delta": -0.5}, "delta"),
])
def test_scenario_validation(sc9, patch, field):
    d = {**sc9.to_dict(), **patch}
    with pytest.raises(ConfigError) as exc:
        Scenario.from_dict(d)
    assert exc.value.field == field


def test_scenario_needs_three_bases(sc9):
    d = sc9.to_dict()
    d["nodes"] = [n for n in d["nodes"] if n["id"] not in ("a1", "a2")]
    with pytest.raises(ConfigError):
        Scenario.from_dict(d)
