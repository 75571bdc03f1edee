import numpy as np
import pytest

from gkdv.spectral import make_grid


def random_smooth_field(g, rng, kfrac=1.0 / 6.0, amp=1.0):
    """Band-limited random field: white noise low-passed to |k| <= kfrac*kmax."""
    noise = rng.standard_normal(g.N)
    nh = np.fft.rfft(noise)
    cut = int(kfrac * (g.N // 2))
    nh[cut:] = 0.0
    u = np.fft.irfft(nh, n=g.N)
    return amp * u / np.abs(u).max()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid64():
    return make_grid(np.pi, 64)


@pytest.fixture
def grid128():
    return make_grid(2.0 * np.pi, 128)
