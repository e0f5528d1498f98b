"""Closed-form link analysis of a precoded OTFS frame.

Everything here is plain numpy and accepts arbitrary leading batch
dimensions. The tape-differentiable twin of analytic_fer lives in
otfslab.link.objective and must agree with these values.

Shapes: channels (..., MN, MN), precoders (..., MN, K), equalizers
(..., K, MN), per-symbol quantities (..., K).
"""
from collections import namedtuple

import numpy as np
from scipy import special

from otfslab.autodiff.complex import gauss_jordan_inverse
from otfslab.core.errors import ConfigurationError, DimensionError
from otfslab.modem.qam import SUPPORTED_ORDERS

ZF, MMSE = 0, 1
EQUALIZER_KINDS = {'zf': ZF, 'mmse': MMSE}

SINR_CAP = 1e12
DENOMINATOR_FLOOR = 1e-30
ERFC_ARGUMENT_FLOOR = 1e-30

GRAY_BIT = 'gray-bit'
NEAREST_NEIGHBOUR = 'nearest-neighbour'
SER_RULES = (GRAY_BIT, NEAREST_NEIGHBOUR)

LinkMetrics = namedtuple('LinkMetrics', 'sinr ser fer')


def equalizer_kind(kind):
    """Accepts 0/1 or 'zf'/'mmse'."""
    if isinstance(kind, str):
        try:
            return EQUALIZER_KINDS[kind.lower()]
        except KeyError:
            raise ConfigurationError("Unknown equalizer %r" % kind)
    if kind not in (ZF, MMSE):
        raise ConfigurationError("Equalizer kind must be 0 (ZF) or 1 (MMSE), got %r" % kind)
    return kind


def ser_coefficients(order, rule=None):
    """(alpha, beta) of the erfc term alpha erfc(sqrt(beta SINR)) for
    Gray-coded square QAM.

    'gray-bit' is alpha = (2 - 2/sqrt(M))/log2(M), beta = 3/(2 sqrt(M) - 2),
    and the SER is the erfc term itself. It is the default when no rule is given.
    'nearest-neighbour' is alpha = 2 (1 - 1/sqrt(M)), beta = 3/(2 (M - 1)).
    Half the erfc term is then the probability p that one axis of the
    nearest-point detector errs under Gaussian interference plus noise, and
    the SER is 1 - (1 - p)^2, which is what the simulated detector sees;
    OTFSLAB_SER_RULE selects it for experiments and training."""
    rule = rule or GRAY_BIT
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError("No SER approximation for %r-QAM" % order)
    root = np.sqrt(order)
    if rule == GRAY_BIT:
        return (2.0 - 2.0 / root) / np.log2(order), 3.0 / (2.0 * root - 2.0)
    if rule == NEAREST_NEIGHBOUR:
        return 2.0 * (1.0 - 1.0 / root), 3.0 / (2.0 * (order - 1))
    raise ConfigurationError("Unknown SER rule %r (expected one of %s)" % (rule, ', '.join(SER_RULES)))


def conj_t(a):
    return np.conj(np.swapaxes(a, -1, -2))


def identity_precoder(mn, k, power_budget):
    """sqrt(P_0/K) times the first K columns of I_MN; ||P||_F^2 = P_0."""
    if not 1 <= k <= mn:
        raise ConfigurationError("K=%d must lie in [1, MN=%d]" % (k, mn))
    return np.sqrt(power_budget / k) * np.eye(mn, k, dtype=np.complex128)


def build_equalizer(p, h_est, noise_variance, kind):
    """E = (kind sigma^2 I_K + P^H H^H H P)^-1 P^H H^H, built from the
    estimated channel. ZF on a rank-deficient link raises
    SingularMatrixError."""
    kind = equalizer_kind(kind)
    p = np.asarray(p, dtype=np.complex128)
    h_est = np.asarray(h_est, dtype=np.complex128)
    if h_est.shape[-1] != p.shape[-2]:
        raise DimensionError("Precoder %s doesn't fit channel %s" % (p.shape, h_est.shape))
    a = h_est @ p
    gram = conj_t(a) @ a
    if kind == MMSE:
        gram = gram + noise_variance * np.eye(p.shape[-1])
    return gauss_jordan_inverse(gram) @ conj_t(a)


def sinr_per_symbol(e, h_true, p, noise_variance):
    """SINR_k = |G_kk|^2 / (sum_{j != k} |G_kj|^2 + sigma^2 ||E_k,:||^2)
    with G = E H P on the true channel. Capped at SINR_CAP."""
    g = np.asarray(e) @ np.asarray(h_true) @ np.asarray(p)
    power = np.abs(g) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    interference = power.sum(axis=-1) - signal
    noise = noise_variance * (np.abs(e) ** 2).sum(axis=-1)
    denominator = np.maximum(interference + noise, DENOMINATOR_FLOOR)
    return np.minimum(signal / denominator, SINR_CAP)


def ser_from_erfc(erfc, alpha, rule=None):
    if (rule or GRAY_BIT) == NEAREST_NEIGHBOUR:
        axis = 0.5 * alpha * erfc
        return 1.0 - (1.0 - axis) ** 2
    return alpha * erfc


def ser_from_sinr(sinr, order, rule=None):
    alpha, beta = ser_coefficients(order, rule)
    if np.any(np.asarray(sinr) < 0):
        raise ValueError("SINR must be non-negative")
    argument = np.sqrt(np.maximum(beta * np.asarray(sinr, dtype=np.float64), ERFC_ARGUMENT_FLOOR))
    return np.clip(ser_from_erfc(special.erfc(argument), alpha, rule), 0.0, 1.0)


def fer_from_sers(sers):
    """FER = 1 - prod_k (1 - SER_k) over the last axis."""
    return 1.0 - np.prod(1.0 - np.asarray(sers, dtype=np.float64), axis=-1)


def link_metrics(h_true, h_est, p, noise_variance, order, kind, rule=None):
    e = build_equalizer(p, h_est, noise_variance, kind)
    sinr = sinr_per_symbol(e, h_true, p, noise_variance)
    ser = ser_from_sinr(sinr, order, rule)
    return LinkMetrics(sinr, ser, fer_from_sers(ser))


def analytic_fer(h_true, h_est, p, noise_variance, order, kind, rule=None):
    return link_metrics(h_true, h_est, p, noise_variance, order, kind, rule).fer


def zero_sinr_fer(k, order, rule=None):
    """FER when every SINR is zero, 1 - (1 - SER_0)^K with erfc(0) = 1
    (SER_0 = alpha under the gray-bit rule)."""
    alpha, _ = ser_coefficients(order, rule)
    return 1.0 - (1.0 - ser_from_erfc(1.0, alpha, rule)) ** k


def reliability(fer):
    """Reliability in percent."""
    return 100.0 * (1.0 - fer)
