"""Run configurations: strict JSON parsing, canonical hashing.

One config file describes one experiment.  Parsing is fail-closed: unknown
keys, wrong types and out-of-range values are rejected before any output is
produced.  Every physical quantity carries its unit in the key name
(``_ghz``, ``_ns``, ``_rad``).  The effective configuration (after CLI
overrides such as ``--seed`` or ``--quick``) is hashed and the hash is
embedded in every output file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import FluxoniumParams
from .disorder import ChainTemplate, DisorderSpec, EvolutionOptions
from .errors import ConfigError, ParameterError

SCHEMA_VERSION = 1
COMMANDS = ("solve", "evolve", "ensemble", "sweep", "analyze")
QUICK_N_REALIZATIONS = 200


def config_hash(effective: dict) -> str:
    blob = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return raw


def _check_keys(d: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _number(d: dict, key: str, where: str, default=None):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _integer(d: dict, key: str, where: str, default=None):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    return v


def _int_list(d: dict, key: str, where: str, default=None):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
        raise ConfigError(f"{where}.{key} must be a list of integers, got {v!r}")
    return list(v)


def _parse_circuit(d, where: str) -> FluxoniumParams:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    _check_keys(d, {"e_c_ghz", "e_l_ghz", "e_j_ghz", "phi_rad"},
                {"e_c_ghz", "e_l_ghz", "e_j_ghz", "phi_rad"}, where)
    try:
        return FluxoniumParams(
            e_c=_number(d, "e_c_ghz", where),
            e_l=_number(d, "e_l_ghz", where),
            e_j=_number(d, "e_j_ghz", where),
            phi=_number(d, "phi_rad", where),
        )
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ChainConfig:
    length: int
    circuit: FluxoniumParams
    coupling: float
    site_phi: dict[int, float]   # per-site flux overrides
    site_e_j: dict[int, float]   # per-site E_J overrides

    def site_params(self) -> list[FluxoniumParams]:
        out = []
        for l in range(self.length):
            p = self.circuit
            if l in self.site_e_j:
                p = p.replace(e_j=self.site_e_j[l])
            if l in self.site_phi:
                p = p.replace(phi=self.site_phi[l])
            out.append(p)
        return out


def _parse_site_map(d, key: str, length: int, where: str) -> dict[int, float]:
    if key not in d:
        return {}
    raw = d[key]
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}.{key} must be an object of site -> value")
    out = {}
    for k, v in raw.items():
        try:
            site = int(k)
        except ValueError:
            raise ConfigError(f"{where}.{key}: site index {k!r} is not an integer") from None
        if not 0 <= site < length:
            raise ConfigError(f"{where}.{key}: site {site} outside 0..{length - 1}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.{key}[{k}] must be a number")
        out[site] = float(v)
    return out


def _parse_chain(d, where: str, allow_overrides: bool = True) -> ChainConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {"length", "circuit", "coupling_ghz"}
    if allow_overrides:
        allowed |= {"site_phi_rad", "site_e_j_ghz"}
    _check_keys(d, allowed, {"length", "circuit", "coupling_ghz"}, where)
    length = _integer(d, "length", where)
    if length is None or length < 1:
        raise ConfigError(f"{where}.length must be a positive integer")
    return ChainConfig(
        length=length,
        circuit=_parse_circuit(d["circuit"], f"{where}.circuit"),
        coupling=_number(d, "coupling_ghz", where),
        site_phi=_parse_site_map(d, "site_phi_rad", length, where),
        site_e_j=_parse_site_map(d, "site_e_j_ghz", length, where),
    )


def _parse_time(d, where: str) -> tuple[float, float]:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    _check_keys(d, {"t_max_ns", "dt_ns"}, {"t_max_ns", "dt_ns"}, where)
    t_max = _number(d, "t_max_ns", where)
    dt = _number(d, "dt_ns", where)
    if t_max <= 0 or dt <= 0 or dt > t_max:
        raise ConfigError(f"{where}: need 0 < dt_ns <= t_max_ns")
    return t_max, dt


def _parse_grid(d, key: str, where: str) -> np.ndarray:
    """Detuning grids may be explicit lists or {start, stop, num} ranges."""
    if key not in d:
        raise ConfigError(f"missing keys in {where}: ['{key}']")
    raw = d[key]
    if isinstance(raw, list):
        if len(raw) == 0:
            raise ConfigError(f"{where}.{key} must not be empty")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in raw):
            raise ConfigError(f"{where}.{key} must contain numbers")
        return np.asarray(raw, dtype=float)
    if isinstance(raw, dict):
        _check_keys(raw, {"start", "stop", "num"}, {"start", "stop", "num"},
                    f"{where}.{key}")
        num = _integer(raw, "num", f"{where}.{key}")
        if num is None or num < 1:
            raise ConfigError(f"{where}.{key}.num must be a positive integer")
        return np.linspace(_number(raw, "start", where), _number(raw, "stop", where), num)
    raise ConfigError(f"{where}.{key} must be a list or a start/stop/num object")


@dataclass(frozen=True)
class HistogramConfig:
    low: float = 1e-4
    high: float = 1.0
    n_bins: int = 40


def _parse_histogram(d, where: str) -> HistogramConfig:
    if "histogram_bins" not in d:
        return HistogramConfig()
    raw = d["histogram_bins"]
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}.histogram_bins must be an object")
    _check_keys(raw, {"low", "high", "n"}, {"low", "high", "n"},
                f"{where}.histogram_bins")
    n = _integer(raw, "n", f"{where}.histogram_bins")
    if n is None or n < 1:
        raise ConfigError(f"{where}.histogram_bins.n must be a positive integer")
    return HistogramConfig(low=_number(raw, "low", where),
                           high=_number(raw, "high", where), n_bins=n)


@dataclass(frozen=True)
class SolveConfig:
    circuit: FluxoniumParams
    k_levels: int
    tol: float
    effective: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.effective)


@dataclass(frozen=True)
class EvolveConfig:
    chain: ChainConfig
    excited_sites: list[int]
    t_max: float
    dt: float
    t_star: float
    tol: float
    record_energy: bool
    effective: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.effective)


@dataclass(frozen=True)
class EnsembleConfig:
    template: ChainTemplate
    disorder: DisorderSpec
    evo: EvolutionOptions
    histogram_sites: list[int]
    histogram: HistogramConfig
    fit_l_max: int
    effective: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.effective)


@dataclass(frozen=True)
class SweepConfig:
    mode: str                      # "single_site" | "uniform_chain"
    circuit: FluxoniumParams | None
    chain: ChainConfig | None
    delta_phi_grid: np.ndarray
    sites: list[int]
    t_max: float
    dt: float
    t_star: float
    tol: float
    effective: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.effective)


@dataclass(frozen=True)
class AnalyzeConfig:
    checkpoint: Path
    histogram_sites: list[int]
    histogram: HistogramConfig
    fit_l_max: int
    effective: dict

    @property
    def sha256(self) -> str:
        return config_hash(self.effective)


def _common_head(raw: dict, command: str) -> None:
    schema = _integer(raw, "schema", "config")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"config.schema must be {SCHEMA_VERSION}, got {schema!r}")
    if raw.get("command") != command:
        raise ConfigError(
            f"config.command is {raw.get('command')!r} but the {command!r} "
            f"command was invoked")


def parse_solve(raw: dict) -> SolveConfig:
    _common_head(raw, "solve")
    _check_keys(raw, {"schema", "command", "circuit", "k_levels", "tol_ghz"},
                {"schema", "command", "circuit"}, "config")
    k = _integer(raw, "k_levels", "config", default=3)
    tol = _number(raw, "tol_ghz", "config", default=1e-9)
    if k < 2 or tol <= 0:
        raise ConfigError("config: need k_levels >= 2 and tol_ghz > 0")
    return SolveConfig(circuit=_parse_circuit(raw["circuit"], "config.circuit"),
                       k_levels=k, tol=tol, effective=raw)


def parse_evolve(raw: dict) -> EvolveConfig:
    _common_head(raw, "evolve")
    _check_keys(raw, {"schema", "command", "chain", "initial_excited_sites",
                      "time", "t_star_ns", "tol", "record_energy"},
                {"schema", "command", "chain", "time"}, "config")
    chain = _parse_chain(raw["chain"], "config.chain")
    t_max, dt = _parse_time(raw["time"], "config.time")
    t_star = _number(raw, "t_star_ns", "config", default=t_max)
    tol = _number(raw, "tol", "config", default=1e-10)
    excited = _int_list(raw, "initial_excited_sites", "config", default=[0])
    record_energy = raw.get("record_energy", False)
    if not isinstance(record_energy, bool):
        raise ConfigError("config.record_energy must be a boolean")
    if not 0 < t_star <= t_max:
        raise ConfigError("config: need 0 < t_star_ns <= time.t_max_ns")
    if any(not 0 <= s < chain.length for s in excited):
        raise ConfigError("config.initial_excited_sites outside the chain")
    return EvolveConfig(chain=chain, excited_sites=excited, t_max=t_max, dt=dt,
                        t_star=t_star, tol=tol, record_energy=record_energy,
                        effective=raw)


def parse_ensemble(raw: dict, seed_override: int | None = None,
                   quick: bool = False) -> EnsembleConfig:
    _common_head(raw, "ensemble")
    _check_keys(raw, {"schema", "command", "chain", "disorder", "time",
                      "t_star_ns", "tol", "seed", "histogram_sites",
                      "histogram_bins", "fit_l_max"},
                {"schema", "command", "chain", "disorder", "time", "seed"}, "config")
    chain = _parse_chain(raw["chain"], "config.chain", allow_overrides=False)

    d = raw["disorder"]
    if not isinstance(d, dict):
        raise ConfigError("config.disorder must be an object")
    kind = d.get("kind")
    if kind == "ej_gaussian":
        _check_keys(d, {"kind", "sigma_ghz", "mean_ghz", "n_realizations"},
                    {"kind", "sigma_ghz", "n_realizations"}, "config.disorder")
        sigma = _number(d, "sigma_ghz", "config.disorder")
        mean = _number(d, "mean_ghz", "config.disorder", default=chain.circuit.e_j)
    elif kind == "flux_gaussian":
        _check_keys(d, {"kind", "sigma_rad", "mean_rad", "n_realizations"},
                    {"kind", "sigma_rad", "n_realizations"}, "config.disorder")
        sigma = _number(d, "sigma_rad", "config.disorder")
        mean = _number(d, "mean_rad", "config.disorder", default=chain.circuit.phi)
    else:
        raise ConfigError(f"config.disorder.kind must be ej_gaussian or "
                          f"flux_gaussian, got {kind!r}")
    n = _integer(d, "n_realizations", "config.disorder")
    if n is None or n < 1:
        raise ConfigError("config.disorder.n_realizations must be a positive integer")
    if quick:
        n = min(n, QUICK_N_REALIZATIONS)
    seed = seed_override if seed_override is not None else _integer(raw, "seed", "config")
    if seed is None or seed < 0:
        raise ConfigError("config.seed must be a non-negative integer")

    t_max, dt = _parse_time(raw["time"], "config.time")
    t_star = _number(raw, "t_star_ns", "config", default=t_max)
    tol = _number(raw, "tol", "config", default=1e-10)
    if not 0 < t_star <= t_max:
        raise ConfigError("config: need 0 < t_star_ns <= time.t_max_ns")

    sites = _int_list(raw, "histogram_sites", "config",
                      default=[chain.length - 1])
    if any(not 0 <= s < chain.length for s in sites):
        raise ConfigError("config.histogram_sites outside the chain")
    fit_l_max = _integer(raw, "fit_l_max", "config", default=chain.length // 2)
    if not 1 <= fit_l_max < chain.length:
        raise ConfigError("config.fit_l_max outside the chain")

    # effective config reflects overrides so the hash identifies the real run
    effective = json.loads(json.dumps(raw))
    effective["seed"] = seed
    effective["disorder"]["n_realizations"] = n

    try:
        template = ChainTemplate(length=chain.length, circuit=chain.circuit,
                                 coupling=chain.coupling)
        disorder = DisorderSpec(kind=kind, mean=mean, sigma=sigma,
                                n_realizations=n, base_seed=seed)
        evo = EvolutionOptions(t_max=t_max, dt=dt, t_star=t_star, tol=tol)
    except ParameterError as exc:
        raise ConfigError(f"config: {exc}") from exc
    return EnsembleConfig(template=template, disorder=disorder, evo=evo,
                          histogram_sites=sites,
                          histogram=_parse_histogram(raw, "config"),
                          fit_l_max=fit_l_max, effective=effective)


def parse_sweep(raw: dict) -> SweepConfig:
    _common_head(raw, "sweep")
    mode = raw.get("mode")
    if mode == "single_site":
        _check_keys(raw, {"schema", "command", "mode", "circuit", "delta_phi_rad"},
                    {"schema", "command", "mode", "circuit"}, "config")
        return SweepConfig(
            mode=mode, circuit=_parse_circuit(raw["circuit"], "config.circuit"),
            chain=None, delta_phi_grid=_parse_grid(raw, "delta_phi_rad", "config"),
            sites=[], t_max=0.0, dt=0.0, t_star=0.0, tol=0.0, effective=raw)
    if mode == "uniform_chain":
        _check_keys(raw, {"schema", "command", "mode", "chain", "delta_phi_rad",
                          "sites", "time", "t_star_ns", "tol"},
                    {"schema", "command", "mode", "chain", "sites", "time"}, "config")
        chain = _parse_chain(raw["chain"], "config.chain", allow_overrides=False)
        t_max, dt = _parse_time(raw["time"], "config.time")
        t_star = _number(raw, "t_star_ns", "config", default=t_max)
        tol = _number(raw, "tol", "config", default=1e-10)
        sites = _int_list(raw, "sites", "config")
        if not sites:
            raise ConfigError("config.sites must list at least one site")
        if any(not 0 <= s < chain.length for s in sites):
            raise ConfigError("config.sites outside the chain")
        if not 0 < t_star <= t_max:
            raise ConfigError("config: need 0 < t_star_ns <= time.t_max_ns")
        return SweepConfig(mode=mode, circuit=None, chain=chain,
                           delta_phi_grid=_parse_grid(raw, "delta_phi_rad", "config"),
                           sites=sites, t_max=t_max, dt=dt, t_star=t_star,
                           tol=tol, effective=raw)
    raise ConfigError(f"config.mode must be single_site or uniform_chain, got {mode!r}")


def parse_analyze(raw: dict) -> AnalyzeConfig:
    _common_head(raw, "analyze")
    _check_keys(raw, {"schema", "command", "checkpoint", "histogram_sites",
                      "histogram_bins", "fit_l_max"},
                {"schema", "command", "checkpoint"}, "config")
    cp = raw["checkpoint"]
    if not isinstance(cp, str):
        raise ConfigError("config.checkpoint must be a path string")
    sites = _int_list(raw, "histogram_sites", "config", default=None)
    fit_l_max = _integer(raw, "fit_l_max", "config", default=None)
    return AnalyzeConfig(checkpoint=Path(cp),
                         histogram_sites=sites if sites is not None else [],
                         histogram=_parse_histogram(raw, "config"),
                         fit_l_max=fit_l_max if fit_l_max is not None else 0,
                         effective=raw)
