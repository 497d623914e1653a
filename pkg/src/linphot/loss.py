"""Bernoulli photodetection channel with overall efficiency eta.

Each photon is independently detected with probability eta, so the
detected-count PMF is the binomial mixture of the source PMF.  The channel
is provided both analytically (exact PMF convolution) and as a sampler
(binomial thinning of drawn photon numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, UndefinedStatisticError
from .moments import pmf_moments
from .sources import PhotonNumberDistribution, _finalize, sample_n


@dataclass(frozen=True, eq=False)
class DetectedPhotonDistribution:
    """PMF of the number of detected photons after the loss channel."""

    pmf: np.ndarray
    m_max: int
    mean_m: float
    central_moments: tuple  # mu_2(m)..mu_5(m)
    eta: float
    source_ref: str
    tail_mass: float

    def __post_init__(self):
        self.pmf.setflags(write=False)


def _check_eta(eta) -> float:
    eta = float(eta)
    if not (math.isfinite(eta) and 0.0 <= eta <= 1.0):
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    return eta


def apply_bernoulli(
    source: PhotonNumberDistribution, eta
) -> DetectedPhotonDistribution:
    """Propagate a photon-number PMF through the loss channel.

    For each detected count m the binomial kernel over n is built by the
    term recurrence B(n+1) = B(n) (1-eta) (n+1)/(n+1-m) starting from
    B(m) = eta^m, which never touches a factorial; each column is then
    accumulated with exact (compensated) summation.
    """
    eta = _check_eta(eta)
    pn = source.pmf
    n_max = source.n_max
    if eta == 1.0:
        pm = pn.copy()
    elif eta == 0.0:
        pm = np.zeros(n_max + 1)
        pm[0] = math.fsum(pn)
    else:
        pm = np.empty(n_max + 1)
        ns = np.arange(n_max + 1, dtype=float)
        one_minus = 1.0 - eta
        factors = np.empty(n_max + 1)
        for m in range(n_max + 1):
            # every partial product is the binomial pmf value B(n) <= 1, so
            # the running product can neither overflow nor blow up even when
            # the bare binomial coefficient would
            factors[0] = eta**m
            upper = ns[m + 1 :]
            np.multiply(one_minus * upper, 1.0 / (upper - m), out=factors[1 : n_max + 1 - m])
            kernel = np.cumprod(factors[: n_max + 1 - m])
            pm[m] = math.fsum(kernel * pn[m:])
    mean_m, central = pmf_moments(pm, order=5)
    return DetectedPhotonDistribution(
        pmf=pm,
        m_max=n_max,
        mean_m=mean_m,
        central_moments=central,
        eta=eta,
        source_ref=source.label,
        tail_mass=source.tail_mass,
    )


def sample_m(
    source: PhotonNumberDistribution, eta, rng: np.random.Generator, size=None
):
    """Draw detected counts: sample n, then binomial-thin with probability eta."""
    eta = _check_eta(eta)
    n = sample_n(source, rng, size=size)
    if size is None:
        return int(rng.binomial(n, eta))
    return rng.binomial(n, eta)


def detected_fano(dist: DetectedPhotonDistribution) -> float:
    """Variance-to-mean ratio mu_2(m)/<m> of the detected counts."""
    if dist.mean_m <= 0:
        raise UndefinedStatisticError("fano ratio undefined for <m> = 0")
    return dist.central_moments[0] / dist.mean_m


def detected_as_source(dist: DetectedPhotonDistribution) -> PhotonNumberDistribution:
    """View detected counts as a source PMF, e.g. for cascading loss stages.

    The PMF is taken as-is (not renormalized), so truncation mass keeps
    propagating unchanged.
    """
    return _finalize(
        dist.pmf.copy(), f"detected({dist.source_ref}, eta={dist.eta:g})"
    )
