"""BPSK over the real BI-AWGN channel, channel LLRs and de-puncturing."""

from __future__ import annotations

import numpy as np

from .ratematch import PuncturingPattern

FILLER_LLR = 1e9


def snr_db_to_sigma2(snr_db: float) -> float:
    """Noise variance for ``SNR = 1 / sigma2`` given in dB."""
    return 10.0 ** (-snr_db / 10.0)


def sigma2_to_snr_db(sigma2: float) -> float:
    return -10.0 * np.log10(sigma2)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one Monte-Carlo trial.

    Philox keyed by ``seed`` with the trial index in the upper counter word,
    so the stream depends only on ``(seed, trial)``.
    """
    counter = np.array([0, 0, trial, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


class TrialStreams:
    """Reusable equivalent of :func:`trial_rng` for many trials of one seed.

    Rewinding a single Philox instance is several times cheaper than
    constructing a new one and yields the identical stream.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.Philox(key=seed)
        self._key = self._bitgen.state["state"]["key"]
        self._gen = np.random.Generator(self._bitgen)

    def __call__(self, trial: int) -> np.random.Generator:
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([0, 0, trial, 0], dtype=np.uint64), "key": self._key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._gen


def modulate(c) -> np.ndarray:
    c = np.asarray(c)
    return 1.0 - 2.0 * c


def transmit(x, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = np.asarray(x, dtype=np.float64)
    return x + np.sqrt(sigma2) * rng.standard_normal(x.shape)


def llr(y, sigma2: float) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma2


def depuncture(llrs_n, p: PuncturingPattern, sat: float = FILLER_LLR) -> np.ndarray:
    """Scatter ``n`` received LLRs into the ``n_L`` lifted positions.

    Punctured positions get 0 and filler positions ``+sat``.
    """
    llrs_n = np.asarray(llrs_n, dtype=np.float64)
    if llrs_n.shape[-1] != p.n:
        raise ValueError(f"expected {p.n} LLRs, got {llrs_n.shape[-1]}")
    out = np.zeros(llrs_n.shape[:-1] + (p.n_L,))
    out[..., p.mask] = llrs_n
    out[..., p.filler[0]:p.filler[1]] = sat
    return out

