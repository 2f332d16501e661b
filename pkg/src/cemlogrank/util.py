"""Small numeric and hashing helpers shared across the package."""

import hashlib
import json
import math


def pinv(x: float) -> float:
    """Total reciprocal: 1/x for nonzero x, 0.0 for x == 0.

    Every ratio in the test statistics is routed through this, so empty risk
    sets produce zero contributions instead of division errors.
    """
    return 0.0 if x == 0.0 else 1.0 / x


class KahanSum:
    """Compensated accumulator; keeps long event-grid sums reproducible."""

    __slots__ = ("value", "_carry")

    def __init__(self, value: float = 0.0):
        self.value = value
        self._carry = 0.0

    def add(self, term: float) -> float:
        y = term - self._carry
        t = self.value + y
        self._carry = (t - self.value) - y
        self.value = t
        return self.value


def canonical_json(obj) -> str:
    """Stable serialization used for fingerprints: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def fingerprint(obj) -> str:
    """sha256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def norm_cdf(x: float) -> float:
    """Standard normal CDF, exact to double precision via erfc."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_sf(x: float) -> float:
    """Standard normal survival function P(Z >= x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))
