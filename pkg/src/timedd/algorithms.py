"""The six time-decomposition algorithms and their transmission data.

Every algorithm splits ``(0, T)`` at ``alpha``. One subdomain receives a
datum ``f`` at the interface, the other is coupled to it by continuity of a
second interface quantity, and the relaxed update uses a trace taken from the
subdomain solved last.

Interface quantities are expressed through four functionals of the pair
``(y, lam)``. Derivatives are never differenced; they are read off the ODEs:

    STATE         y
    ADJOINT       lam
    STATE_RATE    y'   = lam / nu - A y
    ADJOINT_RATE  lam' = y + A lam - yhat
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InvalidInputError


class AlgorithmId(str, enum.Enum):
    DN1 = "DN1"
    ND1 = "ND1"
    DN2 = "DN2"
    ND2 = "ND2"
    DN3 = "DN3"
    ND3 = "ND3"

    def __str__(self):
        return self.value

    @property
    def category(self) -> int:
        return {"1": 1, "2": 2, "3": 3}[self.value[-1]]

    @classmethod
    def parse(cls, tag) -> "AlgorithmId":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().upper())
        except ValueError:
            raise InvalidInputError(
                f"unknown algorithm {tag!r}; expected one of {', '.join(a.value for a in cls)}") from None


ALL_ALGORITHMS = tuple(AlgorithmId)


class Functional(enum.Enum):
    STATE = "y"
    ADJOINT = "lambda"
    STATE_RATE = "dy/dt"
    ADJOINT_RATE = "dlambda/dt"


@dataclass(frozen=True)
class Transmission:
    """Interface data of one algorithm.

    ``first`` is the subdomain that receives the datum ``f``; the other side
    imposes continuity of ``coupling`` with the first and returns ``trace``.
    ``carried`` names the modal unknown used in the scalar analysis.
    """

    first: int
    datum: Functional
    coupling: Functional
    trace: Functional
    carried: str

    @property
    def second(self) -> int:
        return 3 - self.first


TRANSMISSION = {
    AlgorithmId.DN1: Transmission(1, Functional.ADJOINT, Functional.STATE_RATE, Functional.ADJOINT, "z"),
    AlgorithmId.ND1: Transmission(2, Functional.STATE, Functional.ADJOINT_RATE, Functional.STATE, "mu"),
    AlgorithmId.DN2: Transmission(1, Functional.STATE, Functional.STATE_RATE, Functional.STATE, "z"),
    AlgorithmId.ND2: Transmission(1, Functional.STATE_RATE, Functional.STATE, Functional.STATE_RATE, "z"),
    AlgorithmId.DN3: Transmission(1, Functional.ADJOINT, Functional.ADJOINT_RATE, Functional.ADJOINT, "mu"),
    AlgorithmId.ND3: Transmission(1, Functional.ADJOINT_RATE, Functional.ADJOINT, Functional.ADJOINT_RATE, "mu"),
}


# Category, formulation and the equivalent single-state readings of each algorithm.
CATALOGUE = (
    ("I", "(z, mu)", "mu", "z'", "DN", AlgorithmId.DN1),
    ("I", "z", "z' + d z", "z'", "RN", AlgorithmId.DN1),
    ("I", "mu", "mu", "mu'' - d mu'", "DR", AlgorithmId.DN1),
    ("I", "(z, mu)", "mu'", "z", "ND", AlgorithmId.ND1),
    ("I", "z", "z'' + d z'", "z", "RD", AlgorithmId.ND1),
    ("I", "mu", "mu'", "mu' - d mu", "NR", AlgorithmId.ND1),
    ("II", "(z, mu)", "z", "z'", "DN", AlgorithmId.DN2),
    ("II", "z", "z", "z'", "DN", AlgorithmId.DN2),
    ("II", "mu", "mu' - d mu", "mu'' - d mu'", "RR", AlgorithmId.DN2),
    ("II", "(z, mu)", "z'", "z", "ND", AlgorithmId.ND2),
    ("II", "z", "z'", "z", "ND", AlgorithmId.ND2),
    ("II", "mu", "mu'' - d mu'", "mu' - d mu", "RR", AlgorithmId.ND2),
    ("III", "(z, mu)", "mu", "mu'", "DN", AlgorithmId.DN3),
    ("III", "z", "z' + d z", "z'' + d z'", "RR", AlgorithmId.DN3),
    ("III", "mu", "mu", "mu'", "DN", AlgorithmId.DN3),
    ("III", "(z, mu)", "mu'", "mu", "ND", AlgorithmId.ND3),
    ("III", "z", "z'' + d z'", "z' + d z", "RR", AlgorithmId.ND3),
    ("III", "mu", "mu'", "mu", "ND", AlgorithmId.ND3),
)


def parse_algorithms(spec) -> tuple[AlgorithmId, ...]:
    """``"all"``, a comma-separated string, or an iterable of tags."""
    if isinstance(spec, str):
        if spec.strip().lower() == "all":
            return ALL_ALGORITHMS
        spec = [s for s in spec.replace(",", " ").split() if s]
    algs = tuple(dict.fromkeys(AlgorithmId.parse(s) for s in spec))
    if not algs:
        raise InvalidInputError("no algorithm selected")
    return algs
