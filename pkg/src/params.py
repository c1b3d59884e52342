from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field

from src.constants import DEFAULT_N_TRUNC, MIN_N_TRUNC

# Every rate, detuning and coupling is a multiple of one reference rate
# (kappa = 1 by default). hbar = 1 throughout.
Rate = Annotated[float, Field(ge=0.0, allow_inf_nan=False)]
Detuning = Annotated[float, Field(allow_inf_nan=False)]


class SystemParams(BaseModel):
    """Physical parameters of the driven four-level atom in a single-mode cavity."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    g1: Rate = Field(..., description="Atom-cavity coupling on the 1-2 transition.")
    g2: Rate = Field(..., description="Atom-cavity coupling on the 3-4 transition.")
    omega_c: Rate = Field(
        ..., description="Rabi frequency of the classical field on the 2-3 transition."
    )
    delta: Detuning = Field(0.0, description="Detuning of level 2.")
    big_delta: Detuning = Field(0.0, description="Detuning of level 4.")
    gamma1: Rate = Field(0.0, description="Spontaneous emission rate 2 -> 1.")
    gamma2: Rate = Field(0.0, description="Spontaneous emission rate 2 -> 3.")
    gamma3: Rate = Field(0.0, description="Spontaneous emission rate 4 -> 3.")
    kappa: Rate = Field(1.0, description="Cavity decay rate.")
    ep: Rate = Field(0.0, description="Cavity drive amplitude.")
    n_trunc: Annotated[int, Field(ge=MIN_N_TRUNC)] = Field(
        DEFAULT_N_TRUNC, description="Number of photon-number states kept (0..N-1)."
    )

    @property
    def coupling_ratio(self) -> float:
        """g1 / omega_c, the photon/atom mixing of the resonant polariton."""
        if self.omega_c == 0:
            raise ValueError("coupling ratio undefined for omega_c = 0")
        return self.g1 / self.omega_c

    def replace(self, **changes: float | int) -> "SystemParams":
        # model_copy(update=...) would skip validation
        return SystemParams(**{**self.model_dump(), **changes})

    def with_drive(self, ep: float) -> "SystemParams":
        return self.replace(ep=float(ep))

    def with_truncation(self, n_trunc: int) -> "SystemParams":
        return self.replace(n_trunc=n_trunc)
