"""Domain error types shared across the pipeline."""


class VsrNavError(Exception):
    """Base class for all domain errors."""


# --- coverage ---

class OffsetInfeasible(VsrNavError):
    """Polygon offsetting left fewer than 3 usable vertices."""


class DisconnectedWorld(VsrNavError):
    """Some coverage node is unreachable from the start position."""


class TooLarge(VsrNavError):
    """Instance exceeds the exact solver's node limit."""


class Infeasible(VsrNavError):
    """Every closed tour would use an impassable edge."""


# --- scene representation ---

class InvalidDepth(VsrNavError):
    """Depth value is non-positive or non-finite."""


class DimensionMismatch(VsrNavError):
    """Embedding dimension disagrees with the scene dimension."""


class EmptyScene(VsrNavError):
    """Query against a scene with no objects."""


class NoMatch(VsrNavError):
    """Best similarity fell below the acceptance threshold."""

    def __init__(self, score: float):
        super().__init__(f"best similarity {score:.4f} below threshold")
        self.score = score


class CorruptFile(VsrNavError):
    """Scene file failed magic/version/checksum validation."""


# --- embedding providers ---

class EmptyText(VsrNavError):
    """Text to embed is empty."""


class UnknownLabel(VsrNavError):
    """Object label is not in the concept vocabulary."""


class EmbedTimeout(VsrNavError):
    """Remote embedding request exceeded its deadline."""


class BadResponse(VsrNavError):
    """Remote embedding response violated the protocol contract."""


class Unauthorized(VsrNavError):
    """Remote embedding endpoint rejected the credentials."""


# --- simulator ---

class Unreachable(VsrNavError):
    """No collision-free path to a standoff point near the target."""


class HandFull(VsrNavError):
    """Pick attempted while already holding an object."""


class HandEmpty(VsrNavError):
    """Place attempted with nothing in hand."""


class OutOfReach(VsrNavError):
    """Target outside the arm's reach radius."""


class NotGraspable(VsrNavError):
    """Object is not flagged graspable."""


class NoSurface(VsrNavError):
    """Place target is not on or adjacent to any supporting surface."""


# --- instruction planning ---

class EmptyInstruction(VsrNavError):
    """Instruction text is empty."""


class NoActionsFound(VsrNavError):
    """No parseable atomic action in the planner output."""


class InvalidPlan(VsrNavError):
    """Parsed action sequence violates a plan invariant."""

    def __init__(self, rule: str):
        super().__init__(rule)
        self.rule = rule


class UnrecognizedInstruction(VsrNavError):
    """No rule template matches the instruction."""


class ClientError(VsrNavError):
    """Language-model client transport failure."""
