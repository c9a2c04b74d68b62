"""
Module defining the enumerations shared across antipt_spdc.

Mode labels, solver schemes, engines and the small option sets used by the
Fock-space and Gaussian modules live here.
"""

from enum import Enum
from typing import Tuple


class Mode(Enum):
    """Waveguide mode labels: arm (a, b, c) and frequency (s, i)."""
    A_S = "a_s"
    A_I = "a_i"
    B_S = "b_s"
    B_I = "b_i"
    C_S = "c_s"
    C_I = "c_i"

    @property
    def arm(self) -> str:
        return self.value[0]

    @property
    def frequency(self) -> str:
        return self.value[2]

    @classmethod
    def of(cls, arm: str, frequency: str) -> "Mode":
        return cls(f"{arm}_{frequency}")


FREQUENCIES: Tuple[str, str] = ("s", "i")
WAVEGUIDE_MODES: Tuple[Mode, ...] = (Mode.A_S, Mode.A_I, Mode.B_S, Mode.B_I)
THREE_MODE_MODES: Tuple[Mode, ...] = WAVEGUIDE_MODES + (Mode.C_S, Mode.C_I)


class LadderKind(Enum):
    """Kinds of single-mode ladder operators."""
    ANNIHILATE = "annihilate"
    CREATE = "create"
    NUMBER = "number"


class Direction(Enum):
    """Direction of the bright/dark basis change."""
    TO_BD = "to_bd"
    TO_WAVEGUIDE = "to_waveguide"


class Supermode(Enum):
    """Bright (a+b)/sqrt(2) and dark (a-b)/sqrt(2) supermodes."""
    BRIGHT = "B"
    DARK = "D"


class Scheme(Enum):
    """Physical model the solvers propagate."""
    ANTIPT_MASTER = "antipt_master"
    ANTIPT_NHH = "antipt_nhh"
    COHERENT = "coherent"
    THREE_MODE = "three_mode"


class Engine(Enum):
    """Solver used to produce correlation records."""
    ME = "me"
    NHH = "nhh"
    GAUSSIAN = "gaussian"
    COHERENT = "coherent"


class TransferFamily(Enum):
    """Closed-form transfer matrix families plus the numeric fallback."""
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    NUMERIC = "numeric"


class ThetaCase(Enum):
    """Pump phases with closed-form anti-PT solutions."""
    ZERO = 0
    PI = 1
