"""Run configuration: YAML ingestion, validation and rapidity sampling.

Complex numbers are written as ``[re, im]`` pairs.  Random rapidities come
from ``numpy.random.default_rng(seed)`` (PCG64); one generator per run,
consumed set by set in order, so a seed fixes every sampled number.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, SeqBetheError
from .sequential import DEFAULT_DELTAS
from .tensor_core import ChargeSector, Rapidities

COMMANDS = ("spectrum", "sequential", "semiclassical", "verify")
REGIONS = ("generic", "semiclassical")

# default tolerances, overridable per check name
DEFAULT_TOLERANCES = {
    "eigvec_residual": 1e-9,
    "dense_match": 1e-8,
    "closed_form": 1e-12,
    "convergence_slope": 0.1,        # |slope − 1|
    "reduced_residual": 1e-9,
    "z_match": 1e-2,
    "tau_compat": 1e-7,
    "residue_support": 1e-8,
    "residue_ratio": 1e-6,
    "leading_order_slope": 0.95,     # lower bound
    "expansion": 1e-4,
    "commutator": 1e-12,
    "root_slope": 0.1,               # |slope − 2|
    "eigen_expansion_slope": 2.8,    # lower bound
    "classical_f": 1e-3,
    "classical_residue": 1e-6,
    "c0_stability": 1e-4,
    "last_factor": 1e-10,
    "limit_commutativity": 1e-6,
    "psi_identity": 1e-8,
    "r_identity": 1e-7,
    "exchange": 1e-8,
    "ybe": 1e-12,
}


def complex_to_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def pair_to_complex(x):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"complex numbers are [re, im] pairs, got {x!r}")


@dataclass
class RunConfig:
    command: str = "spectrum"
    n_sites: int = 4
    charge: int | None = None          # default: the largest Λ ≤ N/2 sector
    hbar: float = 1.0
    theta: list | None = None          # explicit rapidities (site 1 first)
    seed: int = 0
    region: str = "generic"
    n_sets: int = 1
    n_theta0: int = 5
    all_sectors: bool = True           # spectrum: every sector, not only ``charge``
    pinch_bond: int | None = None      # default: middle bond
    pinch_signs: list = field(default_factory=lambda: [1, -1])
    deltas: list = field(default_factory=lambda: list(DEFAULT_DELTAS))   # multiples of ħ
    homotopy_steps: int = 20
    hbar_start: float | None = None
    residue_max_sites: int = 4
    expansion_hbar: float = 1e-3
    root_scaling_hbars: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    eigen_expansion_hbars: list = field(default_factory=lambda: [1e-2, 3e-3, 1e-3])
    classical_f_hbar: float = 1e-3
    verify_max_sites: int = 6
    tolerances: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}")
        if not isinstance(self.n_sites, int) or self.n_sites < 1:
            raise ConfigError("n_sites must be a positive integer")
        if self.charge is not None:
            try:
                ChargeSector(self.n_sites, int(self.charge))
            except (ValueError, TypeError) as e:
                raise ConfigError(f"invalid charge sector: {e}") from None
        if not self.hbar > 0:
            raise ConfigError("hbar must be positive")
        if self.region not in REGIONS:
            raise ConfigError(f"region must be one of {REGIONS}")
        if self.n_sets < 1 or self.n_theta0 < 1:
            raise ConfigError("n_sets and n_theta0 must be >= 1")
        if self.theta is not None:
            th = [pair_to_complex(x) for x in self.theta]
            if len(th) != self.n_sites:
                raise ConfigError(f"theta has {len(th)} entries, n_sites = {self.n_sites}")
            self._check_rapidities(th)
            self.theta = [complex_to_pair(z) for z in th]
        if self.pinch_bond is not None and not 1 <= self.pinch_bond < self.n_sites:
            raise ConfigError("pinch_bond must lie in 1..N-1")
        if any(s not in (1, -1) for s in self.pinch_signs):
            raise ConfigError("pinch_signs entries must be +1 or -1")
        d = [float(x) for x in self.deltas]
        if len(d) < 2 or any(x <= 0 for x in d) or any(a <= b for a, b in zip(d, d[1:])):
            raise ConfigError("deltas must be >= 2 positive, strictly decreasing values")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")

    def _check_rapidities(self, th):
        try:
            Rapidities(tuple(th), self.hbar)
        except (ValueError, SeqBetheError) as e:
            raise ConfigError(f"invalid rapidities: {e}") from None

    # -- derived quantities -------------------------------------------------
    @property
    def magnons(self) -> int:
        if self.charge is None:
            return self.n_sites // 2
        return (self.n_sites - int(self.charge)) // 2

    @property
    def bond(self) -> int:
        return self.pinch_bond or max(1, self.n_sites // 2)

    def tol(self, name) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def with_overrides(self, tol=None, seed=None) -> "RunConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = int(seed)
        if tol is not None:
            # a global override replaces every small-is-good tolerance
            d["tolerances"] = dict(d["tolerances"]) | {
                k: float(tol) for k, v in DEFAULT_TOLERANCES.items() if v < 0.5}
        return RunConfig.from_dict(d)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["deltas"] = [float(x) for x in self.deltas]
        return d

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True)

    @classmethod
    def from_yaml(cls, text) -> "RunConfig":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"YAML parse error: {e}") from None
        return cls.from_dict(d or {})

    @classmethod
    def load(cls, path, command=None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        try:
            d = yaml.safe_load(text) if text.strip() else {}
        except yaml.YAMLError as e:
            raise ConfigError(f"YAML parse error: {e}") from None
        if command is not None:
            d = dict(d or {})
            d.setdefault("command", command)
            if d["command"] != command:
                raise ConfigError(f"config is for '{d['command']}', not '{command}'")
        return cls.from_dict(d or {})


# ---------------------------------------------------------------------------
# sampling

def _region_ok(im, min_gap):
    return all(abs(a - b) >= min_gap for a, b in itertools.combinations(im, 2))


def sample_rapidities(rng: np.random.Generator, n: int, hbar: float, region="generic",
                      hbar_region=None, max_tries=10000) -> Rapidities:
    """Real parts uniform in [−5, 5].

    ``generic``: imaginary parts uniform in [−1, 1].
    ``semiclassical``: imaginary parts uniform in [10ħ_r, 10ħ_r(2N+1)],
    redrawn until min_{k≠l} |Im θ_kl| ≥ 10ħ_r, with ħ_r = ``hbar_region``
    (default ``hbar``), the largest ħ the set will be used at.
    """
    if region not in REGIONS:
        raise ConfigError(f"region must be one of {REGIONS}")
    hr = hbar_region or hbar
    for _ in range(max_tries):
        re = rng.uniform(-5.0, 5.0, n)
        if region == "generic":
            im = rng.uniform(-1.0, 1.0, n)
        else:
            im = rng.uniform(10 * hr, 10 * hr * (2 * n + 1), n)
            if not _region_ok(im, 10 * hr):
                continue
        try:
            return Rapidities(tuple(re + 1j * im), hbar)
        except (ValueError, SeqBetheError):
            continue
    raise ConfigError("could not sample admissible rapidities")


def rapidity_sets(cfg: RunConfig, hbar_region=None) -> list:
    """Explicit θ (one set) or ``cfg.n_sets`` sampled sets."""
    if cfg.theta is not None:
        return [Rapidities(tuple(pair_to_complex(x) for x in cfg.theta), cfg.hbar)]
    rng = np.random.default_rng(cfg.seed)
    return [sample_rapidities(rng, cfg.n_sites, cfg.hbar, cfg.region, hbar_region)
            for _ in range(cfg.n_sets)]


def theta0_samples(cfg: RunConfig, rap: Rapidities, salt=0) -> list:
    """θ₀ sample points (deterministic in seed and salt), kept away from θ_j, θ_j − iħ."""
    rng = np.random.default_rng([cfg.seed, 7919, salt])
    out = []
    while len(out) < cfg.n_theta0:
        z = complex(rng.uniform(-3, 3), rng.uniform(-2, 2))
        if all(abs(z - th) > 0.05 and abs(z - th + 1j * rap.hbar) > 0.05 for th in rap.values):
            out.append(z)
    return out
