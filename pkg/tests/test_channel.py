import numpy as np
import pytest

from irsnoma.channel import ChannelConfig, pathloss_linear, realize, sample_rician, substream
from irsnoma.errors import ConfigError, DomainError
from irsnoma.model import SystemConfig


def _cfg(n=4, m=2):
    return SystemConfig(num_antennas=m, num_elements=n, p_circuit_override=0.01)


# ---------------------------------------------------------------------------
# path loss
# ---------------------------------------------------------------------------

def test_pathloss_reference_distance():
    assert pathloss_linear(1.0, 2.2, -30.0) == pytest.approx(1e-3, rel=1e-12)
    assert pathloss_linear(1.0, 3.7, -30.0) == pytest.approx(1e-3, rel=1e-12)


def test_pathloss_reference_values():
    assert pathloss_linear(40.0, 2.2, -30.0) == pytest.approx(2.9885e-7, rel=1e-4)
    assert pathloss_linear(10.0, 2.5, -30.0) == pytest.approx(3.1623e-6, rel=1e-4)


def test_pathloss_domain_and_monotonicity():
    with pytest.raises(DomainError):
        pathloss_linear(0.5, 2.2, -30.0)
    d = np.linspace(1.0, 100.0, 25)
    vals = [pathloss_linear(x, 2.2, -30.0) for x in d]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert pathloss_linear(10.0, 2.2, -30.0) > pathloss_linear(10.0, 2.5, -30.0)


# ---------------------------------------------------------------------------
# small-scale fading
# ---------------------------------------------------------------------------

def test_rician_rayleigh_normalization():
    rng = substream(123, 0)
    h = sample_rician(350, 300, 0.0, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("k", [0.5, 2.0, 8.0])
def test_rician_unit_power_all_k(k):
    rng = substream(7, 0)
    h = sample_rician(350, 300, k, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_rician_los_limit():
    rng = substream(5, 0)
    h = sample_rician(16, 16, 1e9, rng)
    assert np.max(np.abs(np.abs(h) - 1.0)) <= 1e-4


def test_rician_determinism():
    h1 = sample_rician(6, 3, 2.0, substream(42, 1))
    h2 = sample_rician(6, 3, 2.0, substream(42, 1))
    assert np.array_equal(h1, h2)


def test_rician_rejects_negative_k():
    with pytest.raises(ConfigError):
        sample_rician(2, 2, -1.0, substream(0, 0))


# ---------------------------------------------------------------------------
# realizations
# ---------------------------------------------------------------------------

def test_realize_los_scalar_magnitude():
    cfg = SystemConfig(num_antennas=1, num_elements=1, p_circuit_override=0.01)
    ccfg = ChannelConfig(rician_k=1e9)
    ch = realize(cfg, ccfg, substream(3, 0))
    assert abs(ch.g[0, 0]) == pytest.approx(5.467e-4, rel=1e-3)


def test_realize_average_user_link_power():
    cfg = _cfg(n=40, m=1)
    ccfg = ChannelConfig()
    total, count = 0.0, 0
    for i in range(2500):  # 1e5 element samples
        ch = realize(cfg, ccfg, substream(1000 + i, 0))
        total += np.sum(np.abs(ch.h_r[0]) ** 2)
        count += cfg.num_elements
    assert total / count == pytest.approx(3.1623e-6, rel=0.02)


def test_realize_determinism_and_substream_isolation():
    ccfg = ChannelConfig()
    a = realize(_cfg(n=4, m=2), ccfg, substream(9, 0))
    b = realize(_cfg(n=4, m=2), ccfg, substream(9, 0))
    assert np.array_equal(a.g, b.g)
    assert np.array_equal(a.h_r[0], b.h_r[0])
    # growing the antenna count must not perturb the user links
    c = realize(_cfg(n=4, m=6), ccfg, substream(9, 0))
    assert np.array_equal(a.h_r[0], c.h_r[0])
    assert np.array_equal(a.h_r[1], c.h_r[1])


def test_realize_prefix_stability_in_elements():
    ccfg = ChannelConfig()
    small = realize(_cfg(n=4, m=2), ccfg, substream(11, 0))
    big = realize(_cfg(n=9, m=2), ccfg, substream(11, 0))
    assert np.array_equal(big.g[:4, :], small.g)
    assert np.array_equal(big.h_r[0][:4], small.h_r[0])


def test_shared_angle_mode_aligns_user_links():
    cfg = _cfg(n=16, m=2)
    ch = realize(cfg, ChannelConfig(rician_k=1e9, user_angle_mode="shared"), substream(2, 0))
    # line of sight on a common ray: the two user links are parallel up to
    # the sqrt(1/(K+1)) scattering residue
    ratio = ch.h_r[1] / ch.h_r[0]
    assert np.max(np.abs(ratio - ratio[0])) <= 1e-4
    ch2 = realize(cfg, ChannelConfig(rician_k=1e9), substream(2, 0))
    ratio2 = ch2.h_r[1] / ch2.h_r[0]
    assert np.max(np.abs(ratio2 - ratio2[0])) > 1e-3


def test_channel_config_validation():
    with pytest.raises(ConfigError):
        ChannelConfig(d_bi=0.0)
    with pytest.raises(ConfigError):
        ChannelConfig(alpha_iu=-1.0)
    with pytest.raises(ConfigError):
        ChannelConfig(rician_k=-0.5)
    with pytest.raises(ConfigError):
        ChannelConfig(user_angle_mode="both")
