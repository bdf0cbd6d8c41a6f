"""Experiment configuration, read from INI files with flag overrides."""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

from ..exceptions import ConfigError, RelabcError
from ..models import EXPONENTIAL, MODELS, NORMAL, GammaParams, NormalGammaParams, NormalTheta, RateTheta

#: overrides the output directory when set
OUTPUT_ENV = "RELABC_OUTPUT_DIR"

DEFAULT_TOLS = (0.05, 0.25, 0.5, 1.0)
DEFAULT_NS = (100, 300, 600, 1000)
DEFAULT_SEED = 20240917
GEOMETRIES = ("ball", "ellipse")


class Cell(NamedTuple):
    tol_index: int
    n_index: int
    tol: float
    n: int


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = NORMAL
    prior: object = field(default_factory=lambda: NormalGammaParams(0.0, 1.0, 1.0, 1.0))
    true_theta: object = field(default_factory=lambda: NormalTheta(0.0, 1.0))
    tols: tuple = DEFAULT_TOLS
    ns: tuple = DEFAULT_NS
    K: int = 1000
    master_seed: int = DEFAULT_SEED
    geometry: tuple = GEOMETRIES
    output_dir: str = "results"
    max_proposals: int = 10 ** 9
    workers: int = 1
    legacy_coefficients: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        want = NormalGammaParams if self.model == NORMAL else GammaParams
        if not isinstance(self.prior, want):
            raise ConfigError(f"{self.model} model needs a {want.__name__} prior")
        if int(self.K) < 1:
            raise ConfigError("K must be at least 1")
        if not self.tols or not self.ns:
            raise ConfigError("at least one tolerance and one sample size are required")
        if any(t <= 0 for t in self.tols):
            raise ConfigError("tolerances must be positive")
        min_n = 2 if self.model == NORMAL else 1
        if any(int(n) != n or n < min_n for n in self.ns):
            raise ConfigError(f"every sample size must be an integer >= {min_n}")
        bad = set(self.geometry) - set(GEOMETRIES)
        if bad or not self.geometry:
            raise ConfigError(f"geometry must be a nonempty subset of {GEOMETRIES}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master seed must fit in 64 bits")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        if int(self.max_proposals) < int(self.K):
            raise ConfigError("max_proposals must be at least K")

    @property
    def cells(self):
        return [Cell(i, j, float(t), int(n)) for i, t in enumerate(self.tols) for j, n in enumerate(self.ns)]

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except (TypeError, ValueError, RelabcError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        out = asdict(self)
        out["prior"] = asdict(self.prior)
        out["true_theta"] = self.true_theta._asdict()
        return out


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def default_config(model=NORMAL):
    if model == EXPONENTIAL:
        return ExperimentConfig(model=EXPONENTIAL, prior=GammaParams(1.0, 1.0), true_theta=RateTheta(1.0),
                                geometry=("ball",))
    return ExperimentConfig()


def load_config(path=None, model=None):
    """Read an INI file with sections ``experiment``, ``prior``, ``truth`` and ``cells``.

    Missing keys fall back to the defaults for the chosen model.
    """
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    model = model or exp.get("model", NORMAL)
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    base = default_config(model)
    try:
        kw = {}
        if "K" in exp or "k" in exp:
            kw["K"] = int(exp.get("k") or exp.get("K"))
        if "master_seed" in exp:
            kw["master_seed"] = int(exp["master_seed"])
        if "output_dir" in exp:
            kw["output_dir"] = exp["output_dir"]
        if "max_proposals" in exp:
            kw["max_proposals"] = int(float(exp["max_proposals"]))
        if "workers" in exp:
            kw["workers"] = int(exp["workers"])
        if "geometry" in exp:
            kw["geometry"] = tuple(exp["geometry"].replace(",", " ").split())
        if "legacy_coefficients" in exp:
            kw["legacy_coefficients"] = parser.getboolean("experiment", "legacy_coefficients")
        if parser.has_section("prior"):
            p = parser["prior"]
            if model == NORMAL:
                d = base.prior
                kw["prior"] = NormalGammaParams(float(p.get("mu0", d.mu0)), float(p.get("kappa", d.kappa)),
                                                float(p.get("alpha", d.alpha)), float(p.get("beta", d.beta)))
            else:
                d = base.prior
                kw["prior"] = GammaParams(float(p.get("alpha", d.alpha)), float(p.get("beta", d.beta)))
        if parser.has_section("truth"):
            t = parser["truth"]
            if model == NORMAL:
                sigma2 = float(t.get("sigma2", 1.0 / base.true_theta.lam))
                kw["true_theta"] = NormalTheta(float(t.get("mu", base.true_theta.mu)), 1.0 / sigma2)
            else:
                kw["true_theta"] = RateTheta(float(t.get("rate", base.true_theta.rate)))
        if parser.has_section("cells"):
            c = parser["cells"]
            if "tols" in c:
                kw["tols"] = _floats(c["tols"])
            if "ns" in c:
                kw["ns"] = _ints(c["ns"])
    except (ValueError, KeyError, RelabcError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return base.with_overrides(**kw)
