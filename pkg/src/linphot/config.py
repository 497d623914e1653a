"""Run configuration: a versioned JSON document describing one experiment."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import default_eta_series
from .detector import DarkNoiseModel, GainModel, make_gain
from .errors import ConfigError
from .sources import (
    DEFAULT_TAIL_EPS,
    PhotonNumberDistribution,
    from_pmf,
    make_fock,
    make_multimode_thermal,
    make_poisson,
    make_thermal,
)

SCHEMA_VERSION = 1

SOURCE_KINDS = ("poisson", "thermal", "multimode_thermal", "fock", "pmf")


def _require(cond: bool, field_path: str, message: str):
    if not cond:
        raise ConfigError(f"{field_path}: {message}")


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    mean: float | None = None
    modes: int | None = None
    n: int | None = None
    pmf: tuple | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.mean is not None:
            out["mean"] = self.mean
        if self.modes is not None:
            out["modes"] = self.modes
        if self.n is not None:
            out["n"] = self.n
        if self.pmf is not None:
            out["pmf"] = list(self.pmf)
        return out


@dataclass(frozen=True)
class GainSpec:
    gamma_bar: float
    sigma: float
    family: str = "gaussian"

    def to_dict(self) -> dict:
        return {"family": self.family, "gamma_bar": self.gamma_bar, "sigma": self.sigma}


@dataclass(frozen=True)
class DarkSpec:
    sigma0: float

    def to_dict(self) -> dict:
        return {"sigma0": self.sigma0}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one experiment end to end."""

    source: SourceSpec
    gain: GainSpec
    dark: DarkSpec
    eta_series: tuple
    n_samples: int
    seed: int
    schema_version: int = SCHEMA_VERSION
    gain_scale_factors: tuple = ()
    moment_order: int = 5
    tail_epsilon: float = DEFAULT_TAIL_EPS
    reconstruct_eta: float = field(default=None)
    reconstruction_n_samples: int = field(default=None)
    out_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "source": self.source.to_dict(),
            "gain": self.gain.to_dict(),
            "dark": self.dark.to_dict(),
            "eta_series": list(self.eta_series),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "gain_scale_factors": list(self.gain_scale_factors),
            "moment_order": self.moment_order,
            "tail_epsilon": self.tail_epsilon,
            "reconstruct_eta": self.reconstruct_eta,
            "reconstruction_n_samples": self.reconstruction_n_samples,
            "out_dir": self.out_dir,
        }


def _parse_source(raw: dict) -> SourceSpec:
    _require(isinstance(raw, dict), "source", "must be an object")
    kind = raw.get("kind")
    _require(kind in SOURCE_KINDS, "source.kind", f"must be one of {SOURCE_KINDS}, got {kind!r}")
    spec = SourceSpec(
        kind=kind,
        mean=raw.get("mean"),
        modes=raw.get("modes"),
        n=raw.get("n"),
        pmf=tuple(raw["pmf"]) if raw.get("pmf") is not None else None,
    )
    if kind in ("poisson", "thermal", "multimode_thermal"):
        _require(spec.mean is not None, "source.mean", f"required for kind {kind!r}")
        _require(
            isinstance(spec.mean, (int, float)) and math.isfinite(spec.mean) and spec.mean >= 0,
            "source.mean",
            f"must be a nonnegative finite number, got {spec.mean!r}",
        )
    if kind == "multimode_thermal":
        _require(
            isinstance(spec.modes, int) and spec.modes >= 1,
            "source.modes",
            f"must be a positive integer, got {spec.modes!r}",
        )
    if kind == "fock":
        _require(
            isinstance(spec.n, int) and spec.n >= 0,
            "source.n",
            f"must be a nonnegative integer, got {spec.n!r}",
        )
    if kind == "pmf":
        _require(
            spec.pmf is not None and len(spec.pmf) > 0,
            "source.pmf",
            "required nonempty table for kind 'pmf'",
        )
    return spec


def from_dict(raw: dict) -> RunConfig:
    """Parse and validate a config document; errors name the field."""
    _require(isinstance(raw, dict), "config", "must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version!r}")

    source = _parse_source(raw.get("source"))

    g = raw.get("gain")
    _require(isinstance(g, dict), "gain", "must be an object")
    family = g.get("family", "gaussian")
    _require(
        family in ("gaussian", "gamma"),
        "gain.family",
        f"must be 'gaussian' or 'gamma', got {family!r}",
    )
    gamma_bar = g.get("gamma_bar")
    _require(
        isinstance(gamma_bar, (int, float)) and math.isfinite(gamma_bar) and gamma_bar > 0,
        "gain.gamma_bar",
        f"must be a positive finite number, got {gamma_bar!r}",
    )
    sigma = g.get("sigma", 0.0)
    _require(
        isinstance(sigma, (int, float)) and math.isfinite(sigma) and sigma >= 0,
        "gain.sigma",
        f"must be a nonnegative finite number, got {sigma!r}",
    )
    gain = GainSpec(gamma_bar=float(gamma_bar), sigma=float(sigma), family=family)

    d = raw.get("dark", {})
    _require(isinstance(d, dict), "dark", "must be an object")
    sigma0 = d.get("sigma0", 0.1 * gain.gamma_bar)
    _require(
        isinstance(sigma0, (int, float)) and math.isfinite(sigma0) and sigma0 >= 0,
        "dark.sigma0",
        f"must be a nonnegative finite number, got {sigma0!r}",
    )
    dark = DarkSpec(sigma0=float(sigma0))

    if "eta_series" in raw:
        etas = raw["eta_series"]
        _require(
            isinstance(etas, (list, tuple)) and len(etas) >= 1,
            "eta_series",
            "must be a nonempty list",
        )
        for i, e in enumerate(etas):
            _require(
                isinstance(e, (int, float)) and 0.0 < e <= 1.0,
                f"eta_series[{i}]",
                f"must be in (0, 1], got {e!r}",
            )
        eta_series = tuple(float(e) for e in etas)
    else:
        eta_max = raw.get("eta_max")
        _require(
            isinstance(eta_max, (int, float)) and 0.0 < eta_max <= 1.0,
            "eta_max",
            "required when eta_series is absent; must be in (0, 1]",
        )
        eta_series = tuple(default_eta_series(float(eta_max), int(raw.get("eta_count", 10))))

    n_samples = raw.get("n_samples")
    _require(
        isinstance(n_samples, int) and n_samples >= 1,
        "n_samples",
        f"must be a positive integer, got {n_samples!r}",
    )
    seed = raw.get("seed")
    _require(
        isinstance(seed, int) and 0 <= seed < 2**64,
        "seed",
        f"must be an integer in [0, 2^64), got {seed!r}",
    )

    factors = raw.get("gain_scale_factors", [])
    _require(isinstance(factors, (list, tuple)), "gain_scale_factors", "must be a list")
    for i, f in enumerate(factors):
        _require(
            isinstance(f, (int, float)) and math.isfinite(f) and f > 0,
            f"gain_scale_factors[{i}]",
            f"must be positive, got {f!r}",
        )

    order = raw.get("moment_order", 5)
    _require(
        isinstance(order, int) and 2 <= order <= 5,
        "moment_order",
        f"must be an integer in [2, 5], got {order!r}",
    )
    tail_eps = raw.get("tail_epsilon", DEFAULT_TAIL_EPS)
    _require(
        isinstance(tail_eps, float) and 0 < tail_eps < 1,
        "tail_epsilon",
        f"must be a float in (0, 1), got {tail_eps!r}",
    )

    rec_eta = raw.get("reconstruct_eta", max(eta_series))
    _require(
        isinstance(rec_eta, (int, float)) and 0.0 < rec_eta <= 1.0,
        "reconstruct_eta",
        f"must be in (0, 1], got {rec_eta!r}",
    )
    rec_n = raw.get("reconstruction_n_samples", n_samples)
    _require(
        isinstance(rec_n, int) and rec_n >= 1,
        "reconstruction_n_samples",
        f"must be a positive integer, got {rec_n!r}",
    )
    out_dir = raw.get("out_dir")
    _require(
        out_dir is None or (isinstance(out_dir, str) and out_dir),
        "out_dir",
        f"must be a nonempty string when given, got {out_dir!r}",
    )

    return RunConfig(
        source=source,
        gain=gain,
        dark=dark,
        eta_series=eta_series,
        n_samples=n_samples,
        seed=seed,
        gain_scale_factors=tuple(float(f) for f in factors),
        moment_order=order,
        tail_epsilon=tail_eps,
        reconstruct_eta=float(rec_eta),
        reconstruction_n_samples=rec_n,
        out_dir=out_dir,
    )


def load(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config: file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    return from_dict(raw)


def save(config: RunConfig, path) -> None:
    Path(path).write_text(canonical_json(config.to_dict()))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form; ties artifacts to their parameters."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_source(config: RunConfig) -> PhotonNumberDistribution:
    s = config.source
    eps = config.tail_epsilon
    if s.kind == "poisson":
        return make_poisson(s.mean, tail_eps=eps)
    if s.kind == "thermal":
        return make_thermal(s.mean, tail_eps=eps)
    if s.kind == "multimode_thermal":
        return make_multimode_thermal(s.mean, s.modes, tail_eps=eps)
    if s.kind == "fock":
        return make_fock(s.n)
    return from_pmf(list(s.pmf))


def build_gain(config: RunConfig) -> GainModel:
    return make_gain(config.gain.family, config.gain.gamma_bar, config.gain.sigma)


def build_dark(config: RunConfig) -> DarkNoiseModel:
    return DarkNoiseModel(sigma0=config.dark.sigma0)
