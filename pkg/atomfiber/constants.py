"""Physical constants and atomic species data shared by all modules.

All values are SI. Species entries are defaults; a scenario document may
override any of them.
"""
from dataclasses import dataclass, replace
from typing import Dict

from scipy import constants as _codata


class NotWeakFieldSeekingError(ValueError):
    """Raised when an atomic state is not attracted to field minima."""
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    mu0: float = _codata.mu_0
    muB: float = _codata.physical_constants["Bohr magneton"][0]
    hbar: float = _codata.hbar
    kB: float = _codata.k
    g: float = _codata.g

    def __post_init__(self):
        for name in ("mu0", "muB", "hbar", "kB"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Physical constant '{name}' must be positive")


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class AtomState:
    """Hyperfine ground state of a species, as far as magnetic trapping cares."""
    name: str
    mass: float
    F: int
    mF: int
    gF: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"Species '{self.name}': mass must be positive, got {self.mass}")
        if abs(self.mF) > self.F:
            raise ValueError(f"Species '{self.name}': |mF|={abs(self.mF)} exceeds F={self.F}")

    @property
    def weak_field_seeking(self) -> bool:
        return self.gF * self.mF > 0


# |gF| = 1/2 for the F=2 ground manifold of both alkalis. The sign convention is
# chosen so that |F=2, mF=2> is weak-field seeking (gF*mF > 0).
SPECIES: Dict[str, AtomState] = {
    "Li7": AtomState(name="Li7", mass=7.0160034366 * _codata.atomic_mass, F=2, mF=2, gF=0.5),
    "Rb87": AtomState(name="Rb87", mass=86.909180527 * _codata.atomic_mass, F=2, mF=2, gF=0.5),
}


def species(name: str, **overrides) -> AtomState:
    """Look up a default species, optionally replacing fields (mass, F, mF, gF)."""
    try:
        base = SPECIES[name]
    except KeyError:
        known = ", ".join(sorted(SPECIES))
        raise KeyError(f"Unknown species '{name}' (known: {known})") from None
    if overrides:
        return replace(base, **overrides)
    return base


def magnetic_moment(state: AtomState, constants: PhysicalConstants = CODATA) -> float:
    """Effective moment mu_eff = gF*mF*muB (J/T), so that U = mu_eff*|B|.

    Only weak-field seekers are trappable; anything else is rejected.
    """
    product = state.gF * state.mF
    if product <= 0:
        raise NotWeakFieldSeekingError(
            f"State {state.name} |F={state.F}, mF={state.mF}> with gF={state.gF} "
            f"is not weak-field-seeking (gF*mF={product:g})"
        )
    return product * constants.muB
