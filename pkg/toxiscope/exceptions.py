from typing import Optional


class ToxiscopeError(Exception):
    pass


class InputError(ToxiscopeError):
    def __init__(self, message: str, record_id: Optional[str] = None):
        super().__init__(message)
        self.record_id = record_id


class EmptyCorpusError(InputError):
    pass


class ConfigError(ToxiscopeError):
    pass


class ProviderError(ToxiscopeError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class ProtocolError(ProviderError):
    pass


class UndefinedModularityError(ToxiscopeError):
    pass


class StageError(ToxiscopeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
