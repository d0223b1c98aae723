"""
Common models for lqgraph
"""
from enum import Enum

from pydantic import BaseModel, ConfigDict

__all__ = ["ProtoModel", "ProblemKind"]


class ProtoModel(BaseModel):
    """
    Base for every lqgraph value type: immutable, strict about unknown fields, numpy-aware.
    """
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True, validate_default=True)


class ProblemKind(str, Enum):
    """
    The optimization problem a system description is posed for.
    """
    state_feedback = 'state_feedback'
    feedforward = 'feedforward'
    estimation = 'estimation'
    weighted_estimation = 'weighted_estimation'
    correlated_feedback = 'correlated_feedback'

    @property
    def is_control(self) -> bool:
        return self in (ProblemKind.state_feedback, ProblemKind.feedforward, ProblemKind.correlated_feedback)

    @property
    def is_weighted(self) -> bool:
        return self in (ProblemKind.weighted_estimation, ProblemKind.correlated_feedback)
