"""Exception types shared across the package."""


class CapaxError(Exception):
    """Base class for all package-specific errors."""


class InsufficientImages(CapaxError):
    """A patient has fewer images than the requested selection count."""


class NonIntegralSplit(CapaxError):
    """A requested split fraction does not yield whole patients or images."""


class SizeExceedsRoot(CapaxError):
    """A requested subsample size is larger than the root dataset."""


class InsufficientGroups(CapaxError):
    """Fewer patient groups than folds in grouped fold assignment."""


class DegenerateImage(CapaxError):
    """An image with zero area cannot be preprocessed."""


class EmptyFactor(CapaxError):
    """A factor grid contains an empty level list."""


class RegistryCorrupt(CapaxError):
    """A run registry file contains an unreadable record."""

    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class ProtocolError(CapaxError):
    """A trainer violated the wire protocol."""


class UnknownLevel(CapaxError):
    """A run uses a factor level missing from the configured grid."""


class RankDeficient(CapaxError):
    """The design matrix does not have full column rank."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"rank-deficient design, offending columns: {', '.join(self.columns)}")


class IrlsDiverged(CapaxError):
    """Iteratively reweighted least squares failed to converge."""

    def __init__(self, trace):
        self.trace = list(trace)
        super().__init__(f"IRLS did not converge after {len(self.trace)} iterations "
                         f"(last deviances: {self.trace[-3:]})")


class QuantileNoConverge(CapaxError):
    """Root finding for a distribution quantile failed."""


class ConfigError(CapaxError):
    """A study configuration file failed validation."""
