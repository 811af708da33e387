"""Typed command-rejection errors.

Every rejected kernel command raises a subclass of KernelError. The class
name doubles as the stable machine-readable code surfaced over the API
and in simulator scripts, so renaming a class is a wire-format change.
"""


class KernelError(Exception):
    """Base class for all command rejections."""

    @property
    def code(self) -> str:
        return type(self).__name__


# ledger
class DuplicateParticipant(KernelError): pass
class InsufficientCredits(KernelError): pass
class UnknownTask(KernelError): pass
class EscrowAlreadyExists(KernelError): pass
class EscrowNotOpen(KernelError): pass
class TaskNotTerminal(KernelError): pass
class UnknownSkill(KernelError): pass
class InvocationNotValidated(KernelError): pass


# task lifecycle
class UnknownParticipant(KernelError): pass
class BudgetExceeded(KernelError): pass
class NotClaimant(KernelError): pass
class ParentNotClaimed(KernelError): pass
class TaskNotClaimable(KernelError): pass
class SelfClaim(KernelError): pass
class TaskNotClaimed(KernelError): pass
class UnknownAssetId(KernelError): pass
class NotAuthorizedReviewer(KernelError): pass
class TaskNotInReview(KernelError): pass
class NotRequester(KernelError): pass
class TaskNotCancellable(KernelError): pass


# asset registry
class TaskNotAccepted(KernelError): pass
class NotParticipant(KernelError): pass
class UnknownDependency(KernelError): pass
class AssetNotCandidate(KernelError): pass
class ValidatorUnavailable(KernelError): pass
class ValidationIncomplete(KernelError): pass
class AssetNotAdmitted(KernelError): pass
class EmptyCandidateSet(KernelError): pass


# service / persistence
class MalformedCommand(KernelError): pass
class CorruptLog(KernelError): pass
class BindFailure(KernelError): pass
class DataDirLocked(KernelError): pass


# simulator
class ScenarioParseError(KernelError): pass
class PolicyPreconditionViolation(KernelError): pass
class IoFailure(KernelError): pass
