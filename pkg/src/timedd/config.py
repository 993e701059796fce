"""Run configuration: INI sections with a fixed schema.

Example::

    [problem]
    nu = 0.1
    gamma = 0
    T = 1
    alpha = 0.5
    theta = 1

    [algorithms]
    select = all

    [spectrum]
    source = laplacian        ; laplacian | matrix | eigenvalues
    n = 16
    length = 1

    [sweep]
    d_min = 1e-2
    d_max = 1e2
    d_count = 400
    thetas = 1, 0.5, opt

    [solver]
    nt = 1000
    scheme = trapezoidal      ; trapezoidal | implicit-euler
    tol = 1e-10
    k_max = 100
    error_equations = true
    initial_guess = zero      ; zero | random
    initial_state = mode1     ; mode1 | ones | zero (ignored for error equations)
    target = zero             ; zero | ones

Every key is optional except ``problem.nu``. Unknown sections or keys are
errors, and so are values of the wrong type.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import parse_algorithms
from .errors import ConfigError, ParameterError, TimeDDError
from .spectral_model import ProblemParams, SpectralModel, build_laplacian_1d, load_matrix

SCHEMA = {
    "problem": {"nu": float, "gamma": float, "T": float, "alpha": float, "theta": float},
    "algorithms": {"select": str},
    "spectrum": {"source": str, "n": int, "length": float, "matrix_file": str, "eigenvalues": str},
    "sweep": {"d_min": float, "d_max": float, "d_count": int, "thetas": str},
    "solver": {"nt": int, "scheme": str, "tol": float, "k_max": int, "error_equations": bool,
               "initial_guess": str, "initial_state": str, "target": str},
}

CHOICES = {
    ("spectrum", "source"): ("laplacian", "matrix", "eigenvalues"),
    ("solver", "scheme"): ("trapezoidal", "implicit-euler"),
    ("solver", "initial_guess"): ("zero", "random"),
    ("solver", "initial_state"): ("mode1", "ones", "zero"),
    ("solver", "target"): ("zero", "ones"),
}

_BOOL = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


@dataclass(frozen=True)
class SpectrumSpec:
    source: str = "laplacian"
    n: int = 16
    length: float = 1.0
    matrix_file: Path | None = None
    eigenvalues: tuple = ()

    def build(self) -> SpectralModel:
        if self.source == "laplacian":
            return build_laplacian_1d(self.n, self.length)
        if self.source == "matrix":
            return load_matrix(self.matrix_file)
        return SpectralModel.from_eigenvalues(self.eigenvalues)


@dataclass(frozen=True)
class SweepSpec:
    d_min: float = 1e-2
    d_max: float = 1e2
    d_count: int = 400
    thetas: tuple = ()

    def grid(self) -> np.ndarray:
        if self.d_count == 1:
            return np.array([self.d_min])
        return np.logspace(np.log10(self.d_min), np.log10(self.d_max), self.d_count)


@dataclass(frozen=True)
class SolverSpec:
    nt: int = 1000
    scheme: str = "trapezoidal"
    tol: float = 1e-10
    k_max: int = 100
    error_equations: bool = True
    initial_guess: str = "zero"
    initial_state: str = "mode1"
    target: str = "zero"


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams
    algorithms: tuple
    spectrum: SpectrumSpec
    sweep: SweepSpec
    solver: SolverSpec
    source_path: Path | None = None
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def thetas(self) -> tuple:
        return self.sweep.thetas or (self.params.theta,)


def _convert(section, key, text, kind):
    text = text.strip()
    try:
        if kind is bool:
            return _BOOL[text.lower()]
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            return float(text)
    except (KeyError, ValueError):
        raise ConfigError(f"[{section}] {key} = {text!r}: expected {kind.__name__}", field=f"{section}.{key}") from None
    choices = CHOICES.get((section, key))
    if choices and text.lower() not in choices:
        raise ConfigError(f"[{section}] {key} = {text!r}: expected one of {', '.join(choices)}",
                          field=f"{section}.{key}")
    return text.lower() if choices else text


def _parse_thetas(text):
    out = []
    for item in text.replace(",", " ").split():
        if item.lower() == "opt":
            out.append("opt")
            continue
        try:
            th = float(item)
        except ValueError:
            raise ConfigError(f"[sweep] thetas: {item!r} is neither a number nor 'opt'", field="sweep.thetas") from None
        if not 0 < th < 2:
            raise ConfigError(f"[sweep] thetas: {th} outside (0, 2)", field="sweep.thetas")
        out.append(th)
    return tuple(dict.fromkeys(out))


def _parse_floats(text, fld):
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{fld}: expected a list of numbers, got {text!r}", field=fld) from None


def parse_config(text: str, source_path: Path | None = None) -> RunConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source_path or "<config>"))
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc

    values = {}
    lower_keys = {s: {k.lower(): k for k in keys} for s, keys in SCHEMA.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", field=section)
        for key, text_value in cp.items(section):
            canonical = lower_keys[section].get(key.lower())
            if canonical is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]", field=f"{section}.{key}")
            values[(section, canonical)] = _convert(section, canonical, text_value,
                                                    SCHEMA[section][canonical])

    def get(section, key, default=None):
        return values.get((section, key), default)

    if get("problem", "nu") is None:
        raise ConfigError("[problem] nu is required", field="problem.nu")
    T = get("problem", "T", 1.0)
    try:
        params = ProblemParams(nu=get("problem", "nu"), gamma=get("problem", "gamma", 0.0), T=T,
                               alpha=get("problem", "alpha", 0.5 * T), theta=get("problem", "theta", 1.0))
    except ParameterError as exc:
        raise ConfigError(f"[problem] {exc}", field=f"problem.{str(exc).split()[0]}") from exc

    try:
        algorithms = parse_algorithms(get("algorithms", "select", "all"))
    except TimeDDError as exc:
        raise ConfigError(f"[algorithms] select: {exc}", field="algorithms.select") from exc

    source = get("spectrum", "source", "laplacian")
    matrix_file = get("spectrum", "matrix_file")
    if source == "matrix":
        if not matrix_file:
            raise ConfigError("[spectrum] matrix_file is required for source = matrix", field="spectrum.matrix_file")
        matrix_file = Path(matrix_file)
        if not matrix_file.is_absolute() and source_path is not None:
            matrix_file = Path(source_path).parent / matrix_file
    eigenvalues = ()
    if source == "eigenvalues":
        raw = get("spectrum", "eigenvalues")
        if not raw:
            raise ConfigError("[spectrum] eigenvalues is required for source = eigenvalues",
                              field="spectrum.eigenvalues")
        eigenvalues = _parse_floats(raw, "spectrum.eigenvalues")
        if not eigenvalues or any(d < 0 or not np.isfinite(d) for d in eigenvalues):
            raise ConfigError("[spectrum] eigenvalues must be a non-empty list of finite values >= 0",
                              field="spectrum.eigenvalues")
    n = get("spectrum", "n", 16)
    if source == "laplacian" and n < 2:
        raise ConfigError(f"[spectrum] n must be >= 2, got {n}", field="spectrum.n")
    length = get("spectrum", "length", 1.0)
    if not length > 0:
        raise ConfigError(f"[spectrum] length must be > 0, got {length}", field="spectrum.length")
    spectrum = SpectrumSpec(source, n, length, matrix_file, eigenvalues)

    sweep = SweepSpec(get("sweep", "d_min", 1e-2), get("sweep", "d_max", 1e2), get("sweep", "d_count", 400),
                      _parse_thetas(get("sweep", "thetas", "")))
    if not 0 < sweep.d_min <= sweep.d_max or not np.isfinite(sweep.d_max):
        raise ConfigError("[sweep] need 0 < d_min <= d_max < inf", field="sweep.d_min")
    if sweep.d_count < 1:
        raise ConfigError("[sweep] d_count must be >= 1", field="sweep.d_count")

    solver = SolverSpec(**{k: v for (s, k), v in values.items() if s == "solver"})
    if solver.nt < 2:
        raise ConfigError("[solver] nt must be >= 2", field="solver.nt")
    if not solver.tol > 0:
        raise ConfigError("[solver] tol must be > 0", field="solver.tol")
    if solver.k_max < 1:
        raise ConfigError("[solver] k_max must be >= 1", field="solver.k_max")

    return RunConfig(params, algorithms, spectrum, sweep, solver, source_path,
                     {f"{s}.{k}": v for (s, k), v in values.items()})


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})", field="--config") from exc
    return parse_config(text, source_path=path)

