"""Credits-native task marketplace kernel.

Participants post bounty-backed tasks, solvers claim and optionally
delegate them under a strict budget bound, reviewers settle escrowed
bounties on acceptance, and accepted work seeds a validated, dependency
aware registry of reusable assets whose creators earn per-reuse fees.
All state flows through an append-only event log and replays
deterministically.
"""

from .errors import KernelError
from .kernel import Kernel, KernelConfig

__all__ = ["Kernel", "KernelConfig", "KernelError"]
__version__ = "0.1.0"
