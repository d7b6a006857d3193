"""Exception hierarchy shared by the macstab modules."""


class MacStabError(Exception):
    """Base class for all package errors."""


class DomainError(MacStabError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnreachableReliability(DomainError):
    """No codeword length reaches the target error probability."""

    def __init__(self, chi, pe):
        self.chi = chi
        self.pe = pe
        super().__init__(
            f"unreachable reliability: error bound is constant at {chi:.6g} > pe={pe:g}"
        )


class CapExceeded(DomainError):
    """Codeword length search passed the configured cap."""

    def __init__(self, cap):
        self.cap = cap
        super().__init__(f"cap exceeded: no codeword length <= {cap} meets the target")


class CatalogTooLarge(MacStabError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"schedule catalog would hold {size} schedules (limit {limit})")


class UnservedQueue(MacStabError):
    def __init__(self, queue):
        self.queue = queue
        super().__init__(f"unserved queue: no positive-weight schedule serves queue {queue}")


class OutsideRegion(MacStabError):
    """Target rate vector is not in the interior of the stability region."""

    def __init__(self, margin):
        self.margin = margin
        super().__init__(f"outside stability region (LP margin {margin:.3e})")


class KBudgetExceeded(MacStabError):
    def __init__(self, k_max, best_margin):
        self.k_max = k_max
        self.best_margin = best_margin
        super().__init__(
            f"K budget exceeded: no schedule with total <= {k_max} works "
            f"(best margin {best_margin:.3e})"
        )


class DriftViolation(MacStabError):
    """A message class has non-positive drift denominator p(s)s_j - E[A_js]N(s)."""

    def __init__(self, queue, schedule, denominator):
        self.queue = queue
        self.schedule = schedule
        self.denominator = denominator
        super().__init__(
            f"drift condition violated for class (j={queue}, s={schedule}): "
            f"p(s)s_j - E[A_js]N(s) = {denominator:.6g}"
        )
