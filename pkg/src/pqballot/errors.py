"""Exception hierarchy shared across the package.

Error names are stable and double as machine-readable problem codes on the
REST boundary (see service.problem_code).
"""

from __future__ import annotations


class PqBallotError(Exception):
    """Base class for all package errors."""


# -- signature scheme -------------------------------------------------------

class EntropyUnavailable(PqBallotError):
    """No seed was given and the system entropy source is unusable."""


class SigningFailure(PqBallotError):
    """The signer could not produce a bounded signature within the retry cap."""


class MalformedEncoding(PqBallotError):
    """Wrong-length or undecodable serialized input (distinct from a clean False)."""


# -- biometric ---------------------------------------------------------------

class DegenerateEmbedding(PqBallotError):
    """Zero or non-finite raw embedding cannot be normalized."""


class EmptyTemplateSet(PqBallotError):
    """Matching requested against an empty template collection."""


# -- ledger ------------------------------------------------------------------

class DuplicateCitizenship(PqBallotError):
    """A registration block with this citizenship number already exists."""


class DuplicateTxId(PqBallotError):
    """A vote block with this transaction id already exists."""


class PersistenceFailure(PqBallotError):
    """The ledger file could not be written or synced."""


class IndexOutOfRange(PqBallotError):
    """Requested block index is beyond the chain tip."""


# -- registry ----------------------------------------------------------------

class AlreadyRegistered(PqBallotError):
    """Duplicate citizenship number or address."""


class InvalidSignedEmbedding(PqBallotError):
    """The signed embedding does not verify against the presented template."""


class NotRegistered(PqBallotError):
    """No voter record for this address."""


class AlreadyVoted(PqBallotError):
    """The one-vote policy forbids a second vote for this address."""


class UnknownCandidate(PqBallotError):
    """candidate_id is not configured for this election."""


class DuplicateCandidate(PqBallotError):
    """candidate_id already configured."""


class ElectionAlreadyOpen(PqBallotError):
    """Candidate edits are only allowed during setup."""


class ElectionClosed(PqBallotError):
    """The requested operation requires an open (or not yet closed) election."""


# -- protocol ----------------------------------------------------------------

class SpoofDetected(PqBallotError):
    """Liveness gate classified the capture as a spoof; flow aborted."""


class UnknownVoter(PqBallotError):
    """Authentication attempted for an address that is not registered."""


class SignatureInvalid(PqBallotError):
    """Stored template failed signature verification (record corrupt)."""


class NoMatch(PqBallotError):
    """Probe similarity fell below the acceptance threshold."""


class SessionInvalid(PqBallotError):
    """Unknown or already-consumed authentication session."""


class SessionExpired(PqBallotError):
    """The authentication session TTL elapsed before the vote was cast."""


# -- node service -------------------------------------------------------------

class StartupError(PqBallotError):
    """The node refused to start (bad config, corrupt chain, port busy)."""


class TargetUnreachable(PqBallotError):
    """Bench harness could not reach the target node."""


class InsufficientIdentities(PqBallotError):
    """Bench harness ran out of pre-generated identities."""
