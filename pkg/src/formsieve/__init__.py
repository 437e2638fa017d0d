"""formsieve: constructive dyadic elimination for fractional parts of linear
forms, with exact-arithmetic runtime verification and checkable certificates."""

__version__ = "0.1.0"
