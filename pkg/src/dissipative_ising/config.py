"""TOML run configuration.

Example::

    base_coupling = 1.0          # J; all energies and rates below are in units of J

    [lattice]
    kind = "chain"               # "chain" or "square"
    extent = [10]
    periodic = true
    range = 1
    coupling = [1.0]             # total Z_j Z_k coefficient at distance 1..range

    [[jumps]]
    site = "all"                 # int, list of ints, or "all"
    preset = "dephasing_xy"      # or matrix = [re00, im00, re01, im01, re10, im10, re11, im11]
    theta = 0.0
    rate = 0.25

    [fields]
    delta = 0.0                  # number or one value per site

    [initial_state]
    sites = "+y"                 # label, list of labels, or list of Bloch triples

    [run]
    t_max = 5.0
    n_times = 101
    rtol = 1e-9
    atol = 1e-12
    seed = 1234

Explicit couplings may replace the lattice law via ``[lattice] couplings =
[[j, k, h], ...]`` (with ``n_sites`` when no extent is given).
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
    NAMED_STATES,
    InitialProductState,
    Jump,
    LatticeSpec,
    ModelError,
    SpinModel,
    jump_preset,
)


class ConfigError(ValueError):
    """Unreadable or invalid configuration; message names the offending field."""


@dataclass(frozen=True)
class RunParameters:
    t_max: float = 5.0
    n_times: int = 101
    rtol: float = 1e-9
    atol: float = 1e-12
    seed: int = 0
    base_coupling: float = 1.0
    observables: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_times)


@dataclass(frozen=True)
class ModelConfig:
    model: SpinModel
    initial_state: InitialProductState
    run: RunParameters
    lattice: LatticeSpec | None = None


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return table[key]


def _real(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, list)):
        raise ConfigError(f"{where}: expected a real number, got {value!r}")
    if isinstance(value, list):
        if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: expected a number or [re, im], got {value!r}")
        if value[1] != 0:
            raise ConfigError(f"{where}: Hamiltonian must be Hermitian; imaginary part {value[1]} given")
        return float(value[0])
    return float(value)


def _sites(spec: Any, n: int, where: str) -> list[int]:
    if spec == "all":
        return list(range(n))
    if isinstance(spec, int) and not isinstance(spec, bool):
        spec = [spec]
    if not isinstance(spec, list) or not all(isinstance(s, int) for s in spec):
        raise ConfigError(f"{where}: site must be an int, a list of ints, or \"all\"")
    for s in spec:
        if not 0 <= s < n:
            raise ConfigError(f"{where}: site index {s} out of range 0..{n - 1}")
    return spec


def _lattice(doc: dict, scale: float):
    table = _need(doc, "lattice", "config")
    if "couplings" in table:
        n = int(_need(table, "n_sites", "[lattice]")) if "extent" not in table else int(np.prod(table["extent"]))
        couplings = []
        for i, entry in enumerate(table["couplings"]):
            where = f"[lattice].couplings[{i}]"
            if not isinstance(entry, list) or len(entry) != 3:
                raise ConfigError(f"{where}: expected [j, k, h]")
            j, k = entry[0], entry[1]
            if not (isinstance(j, int) and isinstance(k, int)):
                raise ConfigError(f"{where}: site indices must be integers")
            for s in (j, k):
                if not 0 <= s < n:
                    raise ConfigError(f"{where}: site index {s} out of range 0..{n - 1}")
            couplings.append((j, k, scale * _real(entry[2], where)))
        return n, tuple(couplings), None
    try:
        coupling = table.get("coupling", [1.0])
        if not isinstance(coupling, list):
            coupling = [coupling]
        spec = LatticeSpec(
            kind=str(_need(table, "kind", "[lattice]")),
            extent=tuple(int(e) for e in _need(table, "extent", "[lattice]")),
            periodic=bool(table.get("periodic", False)),
            range=int(table.get("range", 1)),
            coupling=tuple(scale * _real(c, f"[lattice].coupling[{i}]") for i, c in enumerate(coupling)),
        )
    except ModelError as exc:
        raise ConfigError(f"[lattice]: {exc}") from None
    return spec.n_sites, spec.couplings(), spec


def _jump_matrix(entry: dict, where: str) -> tuple[np.ndarray, str]:
    if "preset" in entry and "matrix" in entry:
        raise ConfigError(f"{where}: give either 'preset' or 'matrix', not both")
    if "preset" in entry:
        theta = float(entry.get("theta", 0.0))
        try:
            return jump_preset(str(entry["preset"]), theta), str(entry["preset"])
        except ModelError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raw = _need(entry, "matrix", where)
    if not isinstance(raw, list) or len(raw) != 8:
        raise ConfigError(f"{where}.matrix: expected 8 reals (row-major re/im pairs)")
    vals = np.asarray(raw, dtype=float)
    return (vals[0::2] + 1j * vals[1::2]).reshape(2, 2), "custom"


def _initial(doc: dict, n: int) -> InitialProductState:
    table = doc.get("initial_state", {"sites": "+z"})
    spec = table.get("sites", table.get("bloch", "+z"))
    if isinstance(spec, str) or (isinstance(spec, list) and spec and isinstance(spec[0], (int, float))):
        spec = [spec] * n
    if not isinstance(spec, list) or len(spec) != n:
        raise ConfigError(f"[initial_state]: need one entry per site ({n})")
    vecs = []
    for i, s in enumerate(spec):
        where = f"[initial_state].sites[{i}]"
        if isinstance(s, str):
            if s not in NAMED_STATES:
                raise ConfigError(f"{where}: unknown state {s!r}; use one of {', '.join(NAMED_STATES)}")
            vecs.append(NAMED_STATES[s])
        elif isinstance(s, list) and len(s) == 3:
            vecs.append(tuple(float(x) for x in s))
        else:
            raise ConfigError(f"{where}: expected a label or a Bloch triple")
    try:
        return InitialProductState(tuple(vecs))
    except ModelError as exc:
        raise ConfigError(f"[initial_state]: {exc}") from None


def parse_model(text: str) -> ModelConfig:
    """Parse and validate a TOML configuration string."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None

    scale = _real(doc.get("base_coupling", 1.0), "base_coupling")
    n, couplings, lattice = _lattice(doc, scale)

    jumps = []
    for i, entry in enumerate(doc.get("jumps", [])):
        where = f"[[jumps]][{i}]"
        matrix, label = _jump_matrix(entry, where)
        rate = scale * _real(_need(entry, "rate", where), f"{where}.rate")
        if rate < 0:
            raise ConfigError(f"{where}.rate: rates must be non-negative, got {rate}")
        for s in _sites(entry.get("site", "all"), n, f"{where}.site"):
            jumps.append(Jump(s, matrix, rate, label))

    fields = None
    if "fields" in doc:
        delta = doc["fields"].get("delta", 0.0)
        if isinstance(delta, list):
            if len(delta) != n:
                raise ConfigError(f"[fields].delta: expected {n} per-site values, got {len(delta)}")
            fields = tuple(scale * _real(d, f"[fields].delta[{i}]") for i, d in enumerate(delta))
        else:
            fields = (scale * _real(delta, "[fields].delta"),) * n

    try:
        model = SpinModel(n, couplings, fields, tuple(jumps))
    except ModelError as exc:
        raise ConfigError(f"model validation: {exc}") from None

    run_table = doc.get("run", {})
    known = {"t_max", "n_times", "rtol", "atol", "seed", "observables"}
    try:
        run = RunParameters(
            t_max=float(run_table.get("t_max", 5.0)),
            n_times=int(run_table.get("n_times", 101)),
            rtol=float(run_table.get("rtol", 1e-9)),
            atol=float(run_table.get("atol", 1e-12)),
            seed=int(run_table.get("seed", 0)),
            base_coupling=scale,
            observables=tuple(run_table.get("observables", ())),
            extra={k: v for k, v in run_table.items() if k not in known},
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[run]: {exc}") from None
    if run.t_max < 0 or run.n_times < 1:
        raise ConfigError("[run]: t_max must be >= 0 and n_times >= 1")
    return ModelConfig(model, _initial(doc, n), run, lattice)


def load_config(path) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
