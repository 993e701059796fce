"""Semi-discrete optimality system: problem data, spatial operator, modes.

After a spatial discretization ``-Laplace -> A`` the optimality system of the
heat-control problem reads

    y' + A y - lam / nu = 0,            y(0) = y0,
    lam' - y - A lam    = -yhat,        lam(T) + gamma y(T) = gamma yhat(T).

With ``A = P diag(d) P^T`` every mode ``(z, mu)`` decouples into a 2x2 system
whose solutions are combinations of ``cosh(sigma t)`` and ``sinh(sigma t)``
with ``sigma = sqrt(d**2 + 1/nu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    InvalidDimensionError,
    MatrixFileError,
    ParameterError,
    SymmetryError,
    UnsupportedSpectrumError,
)

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Scalar data of the control problem.

    Parameters
    ----------
    nu : float
        Control cost weight, ``> 0``.
    gamma : float
        Weight of the final-time target, ``>= 0``.
    T : float
        Final time.
    alpha : float
        Interface time, strictly inside ``(0, T)``.
    theta : float
        Relaxation parameter in ``(0, 2)``. The analysed range is ``(0, 1]``;
        see :attr:`theta_is_canonical`.
    alpha_margin : float
        ``alpha`` must keep a distance ``alpha_margin * T`` from both ends.
    """

    nu: float
    gamma: float = 0.0
    T: float = 1.0
    alpha: float = 0.5
    theta: float = 1.0
    alpha_margin: float = 1e-8

    def __post_init__(self):
        for name in ("nu", "gamma", "T", "alpha", "theta", "alpha_margin"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real number, got {value!r}")
        if self.nu <= 0:
            raise ParameterError(f"nu must be > 0, got {self.nu}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.T <= 0:
            raise ParameterError(f"T must be > 0, got {self.T}")
        eps = self.alpha_margin * self.T
        if not (eps <= self.alpha <= self.T - eps) or not (0 < self.alpha < self.T):
            raise ParameterError(
                f"alpha must lie in [{eps:g}, {self.T - eps:g}] (inside (0, T)), got {self.alpha}")
        if not 0 < self.theta < 2:
            raise ParameterError(f"theta must lie in (0, 2), got {self.theta}")

    @property
    def nu_inv(self) -> float:
        return 1.0 / self.nu

    @property
    def theta_is_canonical(self) -> bool:
        """True when theta lies in the analysed range (0, 1]."""
        return 0 < self.theta <= 1

    def replace(self, **changes) -> "ProblemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModalTriple:
    """Per-eigenvalue coefficients used by every convergence formula."""

    d: float
    sigma: float
    omega: float
    beta: float
    a: float
    b: float
    sigma_minus_d: float

    @property
    def sigma_plus_d(self) -> float:
        return self.sigma + self.d


def modal_coefficients(d: float, params: ProblemParams) -> ModalTriple:
    """Return ``sigma, omega, beta`` and the interface arguments ``a, b``.

    ``sigma - d`` is also returned, computed as ``(1/nu) / (sigma + d)`` so it
    keeps full relative accuracy when ``d`` is large.
    """
    d = float(d)
    if not math.isfinite(d):
        raise UnsupportedSpectrumError(f"eigenvalue must be finite, got {d}")
    if d < 0:
        raise UnsupportedSpectrumError(f"negative eigenvalue {d} is not supported")
    nu_inv = params.nu_inv
    sigma = math.hypot(d, math.sqrt(nu_inv))
    return ModalTriple(
        d=d,
        sigma=sigma,
        omega=params.gamma * nu_inv + d,
        beta=1.0 - params.gamma * d,
        a=sigma * params.alpha,
        b=sigma * (params.T - params.alpha),
        sigma_minus_d=nu_inv / (sigma + d),
    )


@dataclass(frozen=True)
class ModalBvpSolution:
    """A scalar solution of ``f'' = sigma**2 f`` in overflow-safe form.

    The function is stored as

        growth * exp(sigma (t - t_growth)) + decay * exp(-sigma (t - t_decay))

    with the anchors chosen at the ends of the interval of interest, so both
    exponentials stay below one there whatever the size of ``sigma t``.
    ``A_coef`` and ``B_coef`` give the equivalent ``cosh``/``sinh``
    coefficients about ``t = 0``; they can overflow for large ``sigma T``
    and are meant for inspection only.
    """

    growth: float
    decay: float
    sigma: float
    t_growth: float = 0.0
    t_decay: float = 0.0
    kind: str = ""

    def _terms(self, t, gfac=1.0, dfac=1.0):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        with np.errstate(over="ignore", invalid="ignore"):
            if self.growth != 0.0:
                out = out + (self.growth * gfac) * np.exp(self.sigma * (t - self.t_growth))
            if self.decay != 0.0:
                out = out + (self.decay * dfac) * np.exp(-self.sigma * (t - self.t_decay))
        return out if out.ndim else float(out)

    def value(self, t):
        return self._terms(t)

    def derivative(self, t):
        return self._terms(t, self.sigma, -self.sigma)

    def second_derivative(self, t):
        s2 = self.sigma * self.sigma
        return self._terms(t, s2, s2)

    def __call__(self, t):
        return self.value(t)

    def apply(self, growth_factor: float, decay_factor: float, kind: str | None = None) -> "ModalBvpSolution":
        """Scale the two exponential components independently.

        Any linear combination of ``f`` and ``f'`` is again a solution of the
        same ODE and is obtained this way without differencing large terms.
        """
        return replace(self, growth=self.growth * growth_factor,
                       decay=self.decay * decay_factor,
                       kind=self.kind if kind is None else kind)

    def scaled(self, c: float) -> "ModalBvpSolution":
        return self.apply(c, c)

    @property
    def A_coef(self) -> float:
        g = self.growth * math.exp(min(-self.sigma * self.t_growth, 709.0))
        q = self.decay * math.exp(min(self.sigma * self.t_decay, 709.0))
        return g + q

    @property
    def B_coef(self) -> float:
        g = self.growth * math.exp(min(-self.sigma * self.t_growth, 709.0))
        q = self.decay * math.exp(min(self.sigma * self.t_decay, 709.0))
        return g - q


def modal_general_solution(c1: float, c2: float, sigma: float, kind: str = "") -> ModalBvpSolution:
    """``c1 cosh(sigma t) + c2 sinh(sigma t)`` as an evaluator."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    if not (math.isfinite(c1) and math.isfinite(c2) and math.isfinite(sigma)):
        raise ParameterError("coefficients must be finite")
    return ModalBvpSolution(growth=0.5 * (c1 + c2), decay=0.5 * (c1 - c2), sigma=sigma, kind=kind)


@dataclass(frozen=True)
class SpectralModel:
    """Spatial matrix with its orthogonal eigendecomposition."""

    A: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    h: float | None = None
    length: float | None = None
    source: str = "matrix"
    _frozen: bool = field(default=True, repr=False)

    def __post_init__(self):
        for arr in (self.A, self.eigenvalues, self.eigenvectors):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d_min(self) -> float:
        return float(self.eigenvalues[0])

    def reconstruction_error(self) -> float:
        P, d = self.eigenvectors, self.eigenvalues
        return float(np.max(np.abs(self.A - (P * d) @ P.T)))

    @classmethod
    def from_matrix(cls, A, source: str = "matrix") -> "SpectralModel":
        A = np.array(A, dtype=float)
        d, P = eigendecompose(A)
        return cls(A=A, eigenvalues=d, eigenvectors=P, source=source)

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "SpectralModel":
        """Diagonal operator with the given spectrum (sorted ascending)."""
        d = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
        if d.size == 0:
            raise InvalidDimensionError("eigenvalue list is empty")
        return cls(A=np.diag(d), eigenvalues=d, eigenvectors=np.eye(d.size), source="eigenvalues")


def build_laplacian_1d(n: int, length: float = 1.0) -> SpectralModel:
    """Three-point finite-difference ``-d^2/dx^2`` on ``(0, length)``.

    Homogeneous Dirichlet conditions, ``n`` interior nodes, ``h = length/(n+1)``.
    Eigenpairs are the closed-form sine modes, in ascending order.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidDimensionError(f"Laplacian needs n >= 2 interior nodes, got {n!r}")
    if not length > 0:
        raise InvalidDimensionError(f"length must be > 0, got {length}")
    h = length / (n + 1)
    A = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h**2
    i = np.arange(1, n + 1)
    d = 4.0 / h**2 * np.sin(i * np.pi * h / (2 * length)) ** 2
    P = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(i, i) * np.pi / (n + 1))
    return SpectralModel(A=A, eigenvalues=d, eigenvectors=P, h=h, length=length, source="laplacian")


def check_symmetric(A: np.ndarray) -> None:
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise SymmetryError(f"matrix is not symmetric: max|A - A^T| = {asym:.3e} (max|A| = {scale:.3e})")


def eigendecompose(A) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthogonal eigenvectors of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidDimensionError(f"expected a non-empty square matrix, got shape {A.shape}")
    check_symmetric(A)
    d, P = np.linalg.eigh(0.5 * (A + A.T))
    return d, P


def load_matrix(path) -> SpectralModel:
    """Read a matrix file: ``n`` on the first line, then ``n`` rows of ``n`` reals."""
    path = Path(path)
    try:
        lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise MatrixFileError(f"{path}: cannot read matrix file ({exc.strerror})") from exc
    try:
        if not lines or len(lines[0]) != 1:
            raise ValueError("first line must hold the dimension n")
        n = int(lines[0][0])
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        rows = lines[1:]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"expected {n} rows of {n} values")
        A = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise MatrixFileError(f"{path}: malformed matrix file: {exc}") from exc
    if not np.all(np.isfinite(A)):
        raise MatrixFileError(f"{path}: matrix has non-finite entries")
    try:
        return SpectralModel.from_matrix(A, source=str(path))
    except SymmetryError as exc:
        raise SymmetryError(f"{path}: {exc}") from exc
