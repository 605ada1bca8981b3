"""Domain error hierarchy with stable machine-readable codes.

Every error that can cross a module boundary (and ultimately the HTTP
boundary) carries a stable ``code`` string.  The API layer maps codes to
HTTP statuses; the CLI maps them to exit messages.  Raise these instead of
bare ValueErrors anywhere a caller is expected to branch on the failure.
"""

from __future__ import annotations

from typing import Any, Optional


class DomainError(Exception):
    code = "DOMAIN_ERROR"

    def __init__(self, message: str = "", detail: Optional[Any] = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


def _make(name: str, code: str) -> type:
    return type(name, (DomainError,), {"code": code})


# ---- ledger ----------------------------------------------------------------
UnknownChain = _make("UnknownChain", "UNKNOWN_CHAIN")
BadSignature = _make("BadSignature", "BAD_SIGNATURE")
DuplicateTx = _make("DuplicateTx", "DUPLICATE_TX")
EmptyPool = _make("EmptyPool", "EMPTY_POOL")
QuorumNotReached = _make("QuorumNotReached", "QUORUM_NOT_REACHED")
HeightOutOfRange = _make("HeightOutOfRange", "HEIGHT_OUT_OF_RANGE")
NothingToAnchor = _make("NothingToAnchor", "NOTHING_TO_ANCHOR")
NoAnchorAvailable = _make("NoAnchorAvailable", "NO_ANCHOR_AVAILABLE")
StaleState = _make("StaleState", "CONFLICT")

# ---- registry ---------------------------------------------------------------
DuplicateOrg = _make("DuplicateOrg", "DUPLICATE_ORG")
UnknownOrg = _make("UnknownOrg", "UNKNOWN_ORG")
UnknownUser = _make("UnknownUser", "UNKNOWN_USER")
UnknownProject = _make("UnknownProject", "UNKNOWN_PROJECT")
UnknownContract = _make("UnknownContract", "UNKNOWN_CONTRACT")
UnknownPayment = _make("UnknownPayment", "UNKNOWN_PAYMENT")
NotOrgAdmin = _make("NotOrgAdmin", "NOT_ORG_ADMIN")
BadChecksum = _make("BadChecksum", "BAD_CHECKSUM")
Forbidden = _make("Forbidden", "FORBIDDEN")
BadBudget = _make("BadBudget", "BAD_BUDGET")
AlreadyCompleted = _make("AlreadyCompleted", "ALREADY_COMPLETED")
ParentCapExceeded = _make("ParentCapExceeded", "PARENT_CAP_EXCEEDED")
ParentNotActive = _make("ParentNotActive", "PARENT_NOT_ACTIVE")
WrongState = _make("WrongState", "WRONG_STATE")
PaymentsInFlight = _make("PaymentsInFlight", "PAYMENTS_IN_FLIGHT")

# ---- fundflow ---------------------------------------------------------------
ContractNotActive = _make("ContractNotActive", "CONTRACT_NOT_ACTIVE")
StageMismatch = _make("StageMismatch", "STAGE_MISMATCH")
BadAmount = _make("BadAmount", "BAD_AMOUNT")
RosterSumMismatch = _make("RosterSumMismatch", "ROSTER_SUM_MISMATCH")
ChallengeFailed = _make("ChallengeFailed", "CHALLENGE_FAILED")
ChallengeRequired = _make("ChallengeRequired", "CHALLENGE_REQUIRED")
MissingPlan = _make("MissingPlan", "MISSING_PLAN")
WrongRole = _make("WrongRole", "WRONG_ROLE")
SelfApproval = _make("SelfApproval", "SELF_APPROVAL")
EmptyPlan = _make("EmptyPlan", "EMPTY_PLAN")
BadPlan = _make("BadPlan", "BAD_PLAN")
UnallocatablePlan = _make("UnallocatablePlan", "UNALLOCATABLE_PLAN")
ApprovalChainBroken = _make("ApprovalChainBroken", "APPROVAL_CHAIN_BROKEN")
NoAccount = _make("NoAccount", "NO_ACCOUNT")
UnknownInstruction = _make("UnknownInstruction", "UNKNOWN_INSTRUCTION")

# ---- bankgate ----------------------------------------------------------------
UnknownBank = _make("UnknownBank", "UNKNOWN_BANK")
UnknownBatch = _make("UnknownBatch", "UNKNOWN_BATCH")
DuplicateBatchDifferentContent = _make(
    "DuplicateBatchDifferentContent", "DUPLICATE_BATCH_DIFFERENT_CONTENT"
)
TransientBankError = _make("TransientBankError", "TRANSIENT_BANK_ERROR")
RetriesExhausted = _make("RetriesExhausted", "RETRIES_EXHAUSTED")

# ---- keymgr ------------------------------------------------------------------
NoKey = _make("NoKey", "NO_KEY")
BadKeyFile = _make("BadKeyFile", "BAD_KEY_FILE")

# ---- datahub / api / cli -----------------------------------------------------
BadFilter = _make("BadFilter", "BAD_FILTER")
UnknownKind = _make("UnknownKind", "UNKNOWN_KIND")
BadCredential = _make("BadCredential", "BAD_CREDENTIAL")
TokenExpired = _make("TokenExpired", "TOKEN_EXPIRED")
ValidationFailed = _make("ValidationFailed", "VALIDATION_FAILED")
StoreNotEmpty = _make("StoreNotEmpty", "STORE_NOT_EMPTY")


def _collect_codes():
    out = {}
    for value in list(globals().values()):
        if isinstance(value, type) and issubclass(value, DomainError) and value is not DomainError:
            out[value.code] = value
    return out


CODE_TO_ERROR = _collect_codes()


def error_for_code(code: str, message: str = "", detail=None) -> DomainError:
    cls = CODE_TO_ERROR.get(code, DomainError)
    return cls(message or code, detail)
