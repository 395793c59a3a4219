import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k)


def stream(seed, *keys):
    """Independent generator for ``(seed, *keys)``.

    The same key path always gives the same stream regardless of call
    order, so parallel and serial generation agree.
    """
    return np.random.default_rng(np.random.SeedSequence([_key(seed), *map(_key, keys)]))


def log_uniform(rng, low, high, size=None):
    return np.exp(rng.uniform(np.log(low), np.log(high), size))
