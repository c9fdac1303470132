"""Perturbation errors shared by both operator families."""

from __future__ import annotations


class PerturbationError(Exception):
    """Base class for operator failures."""


class UnknownOperator(PerturbationError):
    def __init__(self, op_name: str) -> None:
        self.op_name = op_name
        super().__init__(f"unknown perturbation operator {op_name!r}")


class InvalidParams(PerturbationError):
    def __init__(self, op_name: str, reason: str) -> None:
        self.op_name = op_name
        super().__init__(f"{op_name}: {reason}")


class InapplicableOperator(PerturbationError):
    """The operator has no valid target in this artifact; skip and log."""

    def __init__(self, op_name: str, reason: str) -> None:
        self.op_name = op_name
        self.reason = reason
        super().__init__(f"{op_name} not applicable: {reason}")
