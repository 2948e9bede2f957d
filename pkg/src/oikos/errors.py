"""Exception types raised by the kernel.

Every error carries enough context to name the offending entity; tests rely
on these attributes, not on message text.
"""

from __future__ import annotations


class KernelError(Exception):
    """Base class for all kernel errors."""


# --- taxonomy ---------------------------------------------------------------

class TaxonomyError(KernelError):
    pass


class CycleInHierarchy(TaxonomyError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"category hierarchy contains a cycle through {category!r}")


class MissingParent(TaxonomyError):
    def __init__(self, category: str, parent: str):
        self.category = category
        self.parent = parent
        super().__init__(f"category {category!r} names missing parent {parent!r}")


class DuplicateCategory(TaxonomyError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"category {category!r} declared more than once")


class MissingRequiredThreshold(TaxonomyError):
    def __init__(self, category: str, threshold: str):
        self.category = category
        self.threshold = threshold
        super().__init__(
            f"category {category!r} requires threshold {threshold!r} for its abilities"
        )


class MissingVirtualLink(TaxonomyError):
    def __init__(self, model: str, kind: str):
        self.model = model
        self.kind = kind
        super().__init__(f"model {model!r} needs a {kind} link for its category abilities")


class UnknownCategory(TaxonomyError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"unknown category {category!r}")


class UnknownModel(TaxonomyError):
    def __init__(self, model: str):
        self.model = model
        super().__init__(f"unknown model {model!r}")


# --- world ------------------------------------------------------------------

class WorldError(KernelError):
    pass


class UnknownInstance(WorldError):
    def __init__(self, instance: str):
        self.instance = instance
        super().__init__(f"unknown instance {instance!r}")


class NoSupportFound(WorldError):
    def __init__(self, instance: str):
        self.instance = instance
        super().__init__(f"nothing below {instance!r} to settle onto")


class PenetrationUnresolvable(WorldError):
    def __init__(self, instance: str, other: str, depth: float):
        self.instance = instance
        self.other = other
        self.depth = depth
        super().__init__(
            f"{instance!r} penetrates {other!r} by {depth:.6f} m after settling"
        )


class TargetOutsideRooms(WorldError):
    def __init__(self, target):
        self.target = target
        super().__init__(f"teleport target {target} lies outside every room")


# --- predicates ---------------------------------------------------------------

class PredicateError(KernelError):
    pass


class ArityMismatch(PredicateError):
    def __init__(self, name: str, expected: int, got: int):
        self.name = name
        self.expected = expected
        self.got = got
        super().__init__(f"{name} takes {expected} argument(s), got {got}")


class AbilityMissing(PredicateError):
    def __init__(self, name: str, instance: str, ability: str):
        self.name = name
        self.instance = instance
        self.ability = ability
        super().__init__(f"{name}({instance}): category lacks {ability}")


class UnknownPredicate(PredicateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown predicate {name!r}")


# --- sampling / population ----------------------------------------------------

class SamplingError(KernelError):
    pass


class UnsupportedSampler(SamplingError):
    def __init__(self, name: str, target: bool):
        self.name = name
        self.target = target
        super().__init__(f"no generative rule for {name}={str(target).lower()}")


class SamplingExhausted(SamplingError):
    def __init__(self, expr: str, attempts: int, line: int | None = None):
        self.expr = expr
        self.attempts = attempts
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"could not satisfy {expr} after {attempts} attempts{where}")


class SurfaceNotFound(SamplingError):
    def __init__(self, instance: str):
        self.instance = instance
        super().__init__(f"no surface points found on {instance!r}")


class UnknownCategoryInRules(SamplingError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"population rule names unknown category {category!r}")


# --- runtime ------------------------------------------------------------------

class RuntimeKernelError(KernelError):
    pass


class SessionFinished(RuntimeKernelError):
    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"session already finished at step {step_index}")


class ParseError(RuntimeKernelError):
    def __init__(self, text: str, line: int | None = None):
        self.text = text
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}cannot parse {text!r}")


class DigestMismatch(RuntimeKernelError):
    def __init__(self, step: int, expected: str, actual: str):
        self.step = step
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"digest mismatch at step {step}: expected {expected[:12]}.., got {actual[:12]}.."
        )


class LogCorrupt(RuntimeKernelError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"episode log corrupt: {reason}")


# --- bridge -------------------------------------------------------------------

class BridgeError(KernelError):
    pass


class PortInUse(BridgeError):
    def __init__(self, port: int):
        self.port = port
        super().__init__(f"port {port} already in use")


class ProtocolViolation(BridgeError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)
