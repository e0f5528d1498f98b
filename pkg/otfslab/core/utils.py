from functools import wraps

import numpy as np

import logging
logger = logging.getLogger(__name__)


def memoize_property(target):
    """Caches the result of a method that takes no arguments."""

    cacheattr = '_cache_' + target.__name__

    @wraps(target)
    def wrapped(self):
        if not hasattr(self, cacheattr):
            setattr(self, cacheattr, target(self))
        return getattr(self, cacheattr)
    return wrapped


def rng_stream(master_seed, *indices):
    """Returns an independent numpy Generator for (master_seed, *indices).

    Streams are PCG64 generators seeded through numpy's SeedSequence, with
    the indices used as the spawn key. Two calls with the same arguments
    always give the same stream; different index tuples give statistically
    independent streams. This is how every worker, record and sweep cell
    gets its randomness."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.PCG64(seq))


def snr_to_noise_variance(snr_db, power_budget, k):
    """Receive SNR is the average received power per data symbol over the
    noise power, SNR = P_0 / (K sigma^2), so the identity precoder at
    P_0 = K sees SNR = 1/sigma^2 whatever the frame size."""
    return power_budget / (k * 10.0 ** (snr_db / 10.0))


def noise_variance_to_snr(noise_variance, power_budget, k):
    return 10.0 * np.log10(power_budget / (k * noise_variance))
