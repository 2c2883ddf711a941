import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tcdl.errors import InputError

__all__ = [
    "FamilyType",
    "parse_utility",
    "UtilitySpec",
]

FamilyType = Literal["log", "power"]


class UtilitySpec(BaseModel):
    """U(x) = ln x, or U(x) = x^alpha / alpha + shift with alpha < 1, alpha != 0.

    For alpha < 0 the power family is negative everywhere; `shift` moves it so
    that U(2) = 1, which makes U(infinity) = shift positive.
    """

    model_config = ConfigDict(frozen=True)

    family: FamilyType
    alpha: float | None = Field(default=None, description="Power exponent, power family only.")

    @model_validator(mode="after")
    def validate_alpha(self) -> "UtilitySpec":
        if self.family == "log" and self.alpha is not None:
            raise ValueError("the log family takes no alpha")
        if self.family == "power":
            if self.alpha is None or not math.isfinite(self.alpha):
                raise ValueError("the power family needs a finite alpha")
            if not self.alpha < 1.0 or self.alpha == 0.0:
                raise ValueError(f"alpha must satisfy alpha < 1 and alpha != 0, got {self.alpha}")

        return self

    @property
    def shift(self) -> float:
        if self.family == "power" and self.alpha is not None and self.alpha < 0.0:
            return 1.0 - 2.0**self.alpha / self.alpha

        return 0.0

    @property
    def unbounded_above(self) -> bool:
        "True iff U(infinity) = infinity."
        return self.family == "log" or (self.alpha is not None and self.alpha > 0.0)

    def __str__(self) -> str:
        if self.family == "log":
            return "log"

        return f"power:{self.alpha:g}"


def parse_utility(text: str) -> UtilitySpec:
    "Parse `log` or `power:<alpha>`."
    family, _, alpha = text.strip().partition(":")

    try:
        if family == "log" and not alpha:
            return UtilitySpec(family="log")
        if family == "power" and alpha:
            return UtilitySpec(family="power", alpha=float(alpha))
    except ValueError as e:
        raise InputError(f"invalid utility {text!r}: {e}") from e

    raise InputError(f"invalid utility {text!r}, expected 'log' or 'power:<alpha>'")


if __name__ == "__main__":
    print("result:", parse_utility(text="power:-1"), parse_utility(text="power:-1").shift)
