"""Exception types raised across the pipeline.

Every error carries the process exit code the CLI reports for it, so the
command line layer never has to guess.
"""


class HermesError(Exception):
    exit_code = 1


# -- data model -------------------------------------------------------------

class ModelError(HermesError, ValueError):
    pass


class ReservedTerm(ModelError):
    pass


class MalformedValue(ModelError):
    pass


class ParseError(ModelError):
    pass


class ContextMismatch(UserWarning):
    """Recorded (never raised) when a document carries a foreign @context."""


# -- configuration ----------------------------------------------------------

class ConfigError(HermesError):
    exit_code = 2


class ConfigFileNotFound(ConfigError, FileNotFoundError):
    pass


class TomlParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class EnumError(SchemaError):
    pass


# -- cache and phase ordering -----------------------------------------------

class PhaseOrderViolation(HermesError):
    exit_code = 3

    def __init__(self, phase, missing):
        self.phase = phase
        self.missing = missing
        super().__init__(
            f"cannot run {phase!s}: phase {missing!s} has not completed "
            f"(run 'hermes {missing!s}' first)"
        )


class CacheError(HermesError):
    pass


class ArtifactNotFound(CacheError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NameInvalid(CacheError, ValueError):
    pass


class StaleCache(CacheError):
    exit_code = 3


class PipelineLocked(CacheError):
    pass


# -- plugins ----------------------------------------------------------------

class PluginError(HermesError):
    pass


class DuplicatePlugin(PluginError):
    pass


class UnknownPlugin(PluginError, LookupError):
    exit_code = 2

    def __init__(self, group, name, available):
        self.group = group
        self.name = name
        self.available = sorted(available)
        listing = ", ".join(self.available) or "(none)"
        super().__init__(
            f"unknown {group} plugin {name!r}; available: {listing}"
        )


class PluginContractError(PluginError, TypeError):
    pass


class SettingsAccessError(PluginError, PermissionError):
    pass


class PluginFailure(HermesError):
    exit_code = 4

    def __init__(self, phase, failures):
        self.phase = phase
        self.failures = dict(failures)
        detail = "; ".join(f"{name}: {msg}" for name, msg in self.failures.items())
        super().__init__(f"{phase} failed for plugin(s) {detail}")


# -- harvesting -------------------------------------------------------------

class HarvestError(HermesError):
    exit_code = 4


class NotARepository(HarvestError):
    pass


class UnknownBranch(HarvestError):
    pass


class EmptyHistory(HarvestError):
    pass


class YamlParseError(HarvestError):
    pass


class CffValidationError(HarvestError):
    pass


class MissingProjectTable(HarvestError):
    pass


# -- processing and curation ------------------------------------------------

class CollationError(HermesError):
    exit_code = 4


class EmptyInput(CollationError):
    pass


class IncompatibleTypes(CollationError):
    def __init__(self, term, list_source, scalar_source):
        self.term = term
        super().__init__(
            f"term {term!r} is a list in {list_source!r} but a single value "
            f"in {scalar_source!r}"
        )


class IncompleteReport(CollationError):
    pass


class MissingProcessOutput(HermesError):
    exit_code = 3


# -- deposit ----------------------------------------------------------------

class DepositError(HermesError):
    exit_code = 5
    step = None


class AuthError(DepositError):
    pass


class HttpError(DepositError):
    def __init__(self, status, message, body=""):
        self.status = status
        self.body = body
        super().__init__(message)


class ProtocolError(DepositError):
    pass


class NetworkError(DepositError):
    pass


class ProjectError(DepositError):
    step = "project"


class CreateError(DepositError):
    step = "create"


class UploadError(DepositError, OSError):
    step = "upload"


class PublishError(DepositError):
    step = "publish"


# -- post-processing --------------------------------------------------------

class PostprocessError(HermesError):
    exit_code = 4


class ConfigEditError(PostprocessError):
    pass


class InvalidDoi(PostprocessError, ValueError):
    pass


class ReadOnlyFile(PostprocessError, PermissionError):
    pass
