"""Credit accounts, bounty escrow, and reuse-reward accrual.

Credits are whole non-negative integers. Value lives in exactly one
container at a time: a participant's free balance or an open escrow.
Every mutation appends a double-entry record moving an amount between two
containers, with two intentional exceptions: `endowment` entries source
from the external "mint" container, and `hold` entries are earmarks that
move nothing (the matching `release` entry performs the transfer).

Escrow value is split into a liquid `balance` and an earmarked `held`
amount. Holding an escrow freezes its current balance for a beneficiary;
any value refunded into a held escrow joins the earmark so that a later
release or unwind moves the whole pot in one entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateParticipant,
    EscrowAlreadyExists,
    EscrowNotOpen,
    InsufficientCredits,
    MalformedCommand,
    UnknownParticipant,
)

MINT = "mint"

PARTICIPANT_FUNDED = "participant-funded"
PARENT_ADVANCE = "parent-advance"

OPEN = "open"
SETTLED = "settled"
REFUNDED = "refunded"

ENTRY_KINDS = ("endowment", "lock", "settle", "refund", "reuse_fee", "hold", "release")


def as_credits(value, what: str = "amount") -> int:
    """Validate a credit amount: an int >= 0, never a bool or float."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedCommand(f"{what} must be an integer number of credits")
    if value < 0:
        raise MalformedCommand(f"{what} must be non-negative")
    return value


@dataclass
class RewardSchedule:
    """Per-skill reuse fee schedule, fixed at admission.

    `constant` pays `alpha` on every paid reuse; `decaying` pays
    round(alpha0 * ratio**(j-1)) on the j-th paid reuse.
    """

    kind: str = "constant"
    alpha: int = 0
    alpha0: int = 0
    ratio: float = 0.0

    def fee_for(self, j: int) -> int:
        if j < 1:
            raise ValueError("reuse ordinal starts at 1")
        if self.kind == "constant":
            return self.alpha
        return int(round(self.alpha0 * self.ratio ** (j - 1)))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "alpha": self.alpha}
        return {"kind": "decaying", "alpha0": self.alpha0, "ratio": self.ratio}

    @staticmethod
    def from_dict(raw) -> "RewardSchedule":
        if raw is None:
            return RewardSchedule("constant", alpha=0)
        if not isinstance(raw, dict):
            raise MalformedCommand("reward_schedule must be an object")
        kind = raw.get("kind", "constant")
        if kind == "constant":
            return RewardSchedule("constant", alpha=as_credits(raw.get("alpha", 0), "alpha"))
        if kind == "decaying":
            ratio = raw.get("ratio", 0.0)
            if isinstance(ratio, bool) or not isinstance(ratio, (int, float)) or ratio < 0:
                raise MalformedCommand("ratio must be a non-negative number")
            return RewardSchedule(
                "decaying",
                alpha0=as_credits(raw.get("alpha0", 0), "alpha0"),
                ratio=float(ratio),
            )
        raise MalformedCommand(f"unknown reward schedule kind {kind!r}")


@dataclass
class Account:
    participant: str
    kind: str  # human | agent
    free: int = 0


@dataclass
class Escrow:
    escrow_id: str
    task: str
    funder: str
    source: str  # participant-funded | parent-advance
    amount: int  # original bounty, immutable
    balance: int  # liquid value currently inside
    held: int = 0  # value earmarked for `beneficiary`
    beneficiary: str | None = None
    status: str = OPEN

    @property
    def value(self) -> int:
        return self.balance + self.held


@dataclass
class LedgerEntry:
    seq: int
    kind: str
    debit: str  # participant id, escrow id, or "mint"
    credit: str
    amount: int
    task: str | None = None
    skill: str | None = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "debit": self.debit,
            "credit": self.credit,
            "amount": self.amount,
            "task": self.task,
            "skill": self.skill,
        }


@dataclass
class ReuseState:
    """Per-skill reuse accounting: paid fee ordinal and totals."""

    paid_count: int = 0
    total_paid: int = 0
    unpaid_count: int = 0


class Ledger:
    """Single-writer credit ledger with strict conservation.

    In fee mode the economy is closed: total value always equals the sum
    of endowments. In mint mode reuse rewards are created out of thin air
    and tracked in `minted_total` so conservation remains checkable.
    """

    def __init__(self, mode: str = "fee"):
        if mode not in ("fee", "mint"):
            raise MalformedCommand(f"unknown ledger mode {mode!r}")
        self.mode = mode
        self.accounts: dict[str, Account] = {}
        self.escrows: dict[str, Escrow] = {}
        self.escrow_by_task: dict[str, str] = {}
        self.entries: list[LedgerEntry] = []
        self.reuse: dict[str, ReuseState] = {}
        self.endowment_total = 0
        self.minted_total = 0
        self._escrow_seq = 0

    # -- entry plumbing ----------------------------------------------------

    def _record(self, kind: str, debit: str, credit: str, amount: int,
                task: str | None = None, skill: str | None = None) -> LedgerEntry:
        entry = LedgerEntry(len(self.entries) + 1, kind, debit, credit, amount, task, skill)
        self.entries.append(entry)
        return entry

    def entries_since(self, seq: int) -> list[LedgerEntry]:
        return self.entries[seq:]

    # -- accounts ----------------------------------------------------------

    def open_account(self, participant: str, kind: str, endowment: int) -> Account:
        as_credits(endowment, "endowment")
        if participant in self.accounts:
            raise DuplicateParticipant(participant)
        if kind not in ("human", "agent"):
            raise MalformedCommand(f"participant kind must be human or agent, got {kind!r}")
        account = Account(participant, kind, free=endowment)
        self.accounts[participant] = account
        self.endowment_total += endowment
        self._record("endowment", MINT, participant, endowment)
        return account

    def account(self, participant: str) -> Account:
        try:
            return self.accounts[participant]
        except KeyError:
            raise UnknownParticipant(participant) from None

    def locked_of(self, participant: str) -> int:
        """Value of open escrows this participant funded from free balance."""
        return sum(
            e.value for e in self.escrows.values()
            if e.status == OPEN and e.source == PARTICIPANT_FUNDED and e.funder == participant
        )

    # -- escrow lifecycle --------------------------------------------------

    def escrow_for_task(self, task: str) -> Escrow | None:
        eid = self.escrow_by_task.get(task)
        return self.escrows[eid] if eid else None

    def lock_bounty(self, funder: str, task: str, amount: int, source: str,
                    parent_escrow_id: str | None = None) -> Escrow:
        as_credits(amount, "bounty")
        if task in self.escrow_by_task:
            raise EscrowAlreadyExists(task)
        account = self.account(funder)
        if source == PARTICIPANT_FUNDED:
            if account.free < amount:
                raise InsufficientCredits(f"{funder} has {account.free} free, needs {amount}")
            account.free -= amount
            debit = funder
        elif source == PARENT_ADVANCE:
            parent = self.escrows.get(parent_escrow_id or "")
            if parent is None or parent.status != OPEN:
                raise EscrowNotOpen(f"parent escrow for advance on {task}")
            if parent.balance < amount:
                raise InsufficientCredits(
                    f"parent escrow {parent.escrow_id} holds {parent.balance}, needs {amount}")
            parent.balance -= amount
            debit = parent.escrow_id
        else:
            raise MalformedCommand(f"unknown escrow source {source!r}")
        self._escrow_seq += 1
        escrow = Escrow(f"esc-{self._escrow_seq}", task, funder, source, amount, balance=amount)
        self.escrows[escrow.escrow_id] = escrow
        self.escrow_by_task[task] = escrow.escrow_id
        self._record("lock", debit, escrow.escrow_id, amount, task=task)
        return escrow

    def _require_open(self, escrow: Escrow) -> None:
        if escrow.status != OPEN:
            raise EscrowNotOpen(escrow.escrow_id)

    def hold(self, escrow: Escrow, beneficiary: str) -> int:
        """Earmark the escrow's balance for `beneficiary`; no value moves."""
        self._require_open(escrow)
        escrow.held += escrow.balance
        escrow.balance = 0
        escrow.beneficiary = beneficiary
        self._record("hold", escrow.escrow_id, beneficiary, escrow.held, task=escrow.task)
        return escrow.held

    def settle(self, escrow: Escrow, recipient: str) -> int:
        """Pay out the escrow's liquid balance and close it."""
        self._require_open(escrow)
        amount = escrow.balance + escrow.held
        escrow.balance = 0
        escrow.held = 0
        escrow.status = SETTLED
        self.account(recipient).free += amount
        self._record("settle", escrow.escrow_id, recipient, amount, task=escrow.task)
        return amount

    def release(self, escrow: Escrow) -> int:
        """Transfer a held escrow's earmark to its beneficiary and close it."""
        self._require_open(escrow)
        if escrow.beneficiary is None:
            raise EscrowNotOpen(f"{escrow.escrow_id} has no hold to release")
        amount = escrow.balance + escrow.held
        escrow.balance = 0
        escrow.held = 0
        escrow.status = SETTLED
        self.account(escrow.beneficiary).free += amount
        self._record("release", escrow.escrow_id, escrow.beneficiary, amount, task=escrow.task)
        return amount

    def refund_to_participant(self, escrow: Escrow, recipient: str) -> int:
        self._require_open(escrow)
        amount = escrow.balance + escrow.held
        escrow.balance = 0
        escrow.held = 0
        escrow.status = REFUNDED
        self.account(recipient).free += amount
        self._record("refund", escrow.escrow_id, recipient, amount, task=escrow.task)
        return amount

    def refund_to_escrow(self, escrow: Escrow, parent: Escrow) -> int:
        """Return an advance to the escrow it was drawn from.

        A held parent absorbs the refund into its earmark so the eventual
        release or unwind moves the full pot.
        """
        self._require_open(escrow)
        self._require_open(parent)
        amount = escrow.balance + escrow.held
        escrow.balance = 0
        escrow.held = 0
        escrow.status = REFUNDED
        if parent.beneficiary is not None:
            parent.held += amount
        else:
            parent.balance += amount
        self._record("refund", escrow.escrow_id, parent.escrow_id, amount, task=escrow.task)
        return amount

    # -- reuse rewards -----------------------------------------------------

    def reuse_state(self, skill: str) -> ReuseState:
        return self.reuse.setdefault(skill, ReuseState())

    def accrue_reuse_reward(self, skill: str, creator: str, payer: str,
                            schedule: RewardSchedule, task: str | None = None) -> int:
        """Charge the fee for the next paid reuse of `skill`.

        Raises InsufficientCredits without consuming a fee ordinal; the
        caller records the invocation as unpaid in that case.
        """
        state = self.reuse_state(skill)
        fee = schedule.fee_for(state.paid_count + 1)
        creator_account = self.account(creator)
        if self.mode == "fee":
            payer_account = self.account(payer)
            if payer_account.free < fee:
                raise InsufficientCredits(
                    f"{payer} has {payer_account.free} free, reuse fee is {fee}")
            payer_account.free -= fee
            debit = payer
        else:
            self.minted_total += fee
            debit = MINT
        creator_account.free += fee
        state.paid_count += 1
        state.total_paid += fee
        self._record("reuse_fee", debit, creator, fee, task=task, skill=skill)
        return fee

    def note_unpaid_reuse(self, skill: str) -> None:
        self.reuse_state(skill).unpaid_count += 1

    # -- reporting ---------------------------------------------------------

    def conservation_totals(self) -> dict:
        free = sum(a.free for a in self.accounts.values())
        locked = sum(
            e.value for e in self.escrows.values()
            if e.status == OPEN and e.source == PARTICIPANT_FUNDED)
        advanced = sum(
            e.value for e in self.escrows.values()
            if e.status == OPEN and e.source == PARENT_ADVANCE)
        return {
            "free": free,
            "locked": locked,
            "open_escrow": advanced,
            "total": free + locked + advanced,
            "endowments": self.endowment_total,
            "minted": self.minted_total,
            "conserved": free + locked + advanced == self.endowment_total + self.minted_total,
        }

    def balance_report(self) -> dict:
        accounts = {
            pid: {"kind": a.kind, "free": a.free, "locked": self.locked_of(pid)}
            for pid, a in sorted(self.accounts.items())
        }
        open_escrows = [
            {
                "escrow_id": e.escrow_id,
                "task": e.task,
                "funder": e.funder,
                "source": e.source,
                "amount": e.amount,
                "balance": e.balance,
                "held": e.held,
                "beneficiary": e.beneficiary,
            }
            for e in self.escrows.values() if e.status == OPEN
        ]
        report = {"accounts": accounts, "open_escrows": open_escrows, "mode": self.mode}
        report.update(self.conservation_totals())
        return report

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "accounts": {
                pid: {"kind": a.kind, "free": a.free}
                for pid, a in sorted(self.accounts.items())
            },
            "escrows": {
                eid: {
                    "task": e.task, "funder": e.funder, "source": e.source,
                    "amount": e.amount, "balance": e.balance, "held": e.held,
                    "beneficiary": e.beneficiary, "status": e.status,
                }
                for eid, e in sorted(self.escrows.items())
            },
            "entries": [e.to_dict() for e in self.entries],
            "reuse": {
                skill: {"paid_count": s.paid_count, "total_paid": s.total_paid,
                        "unpaid_count": s.unpaid_count}
                for skill, s in sorted(self.reuse.items())
            },
            "endowment_total": self.endowment_total,
            "minted_total": self.minted_total,
        }
