"""Independent reference computations shared by several test modules."""

import math

import numpy as np

from pairedlab import distributions as dist


def _moment_cov(mu, j, k, n):
    """Asymptotic Cov(m_j, m_k) of sample central moments (mean estimated)."""
    return (mu[j + k] - mu[j] * mu[k]
            - j * mu[j - 1] * mu[k + 1] - k * mu[k - 1] * mu[j + 1]
            + j * k * mu[j - 1] * mu[k - 1] * mu[2]) / n


def shape_standard_errors(spec, n):
    """Delta-method SEs of sample skewness and excess kurtosis for n draws.

    Needs central moments up to order 8 (6 for skewness alone); raises
    DivergedMomentError from the distribution module when they do not exist.
    """
    _, mu = dist.raw_central_moments(spec, 8)
    mu = [float(v) for v in mu]
    s2, m3, m4 = mu[2], mu[3], mu[4]
    idx = (2, 3, 4)
    cov = np.array([[_moment_cov(mu, a, b, n) for b in idx] for a in idx])
    g_skew = np.array([-1.5 * m3 / s2**2.5, 1 / s2**1.5, 0.0])
    g_kurt = np.array([-2 * m4 / s2**3, 0.0, 1 / s2**2])
    return math.sqrt(g_skew @ cov @ g_skew), math.sqrt(g_kurt @ cov @ g_kurt)


def sample_shape(x):
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    m2 = np.mean(c**2)
    return np.mean(c**3) / m2**1.5, np.mean(c**4) / m2**2 - 3
