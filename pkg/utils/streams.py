import enum

import numpy as np


# Random stream tags, one per kind of Monte Carlo draw
class Stream(enum.IntEnum):
    BRANCHES = 1
    CPP = 2
    FORWARD = 3
    GRAFT = 4
    LOWER = 5
    DESCENT = 6
    YULE = 7
    LIMIT = 8
    CONVERGE = 9
    ASYMPTOTIC = 10
    RESIDUAL = 11


def replica_rng(seed, replica, stream=Stream.CPP, substream=0):
    """Counter-based generator for one replica.

    The Philox key is (seed, replica) and the counter's high words carry the stream
    and substream tags, so every (seed, replica, stream, substream) owns an independent
    sequence no matter which worker draws it.
    """
    key = (int(seed) << 64) | int(replica)
    counter = (int(stream) << 192) | (int(substream) << 128)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
