"""Exception hierarchy shared by every pipeline stage."""


class FwscopeError(Exception):
    """Base class for all fwscope failures."""


class ValidationError(FwscopeError, ValueError):
    """Input or configuration violates a documented contract."""


class SchemaError(ValidationError):
    """A dataset file does not look like the declared format."""


class RuleLoadError(ValidationError):
    pass


class CatalogError(ValidationError):
    pass


class SourceError(FwscopeError):
    """The upstream scan source failed after all retries."""
