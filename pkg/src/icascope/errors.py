"""Exception hierarchy shared by all icascope modules."""


class IcascopeError(Exception):
    pass


class ParseError(IcascopeError, ValueError):
    pass


class MontageError(IcascopeError, KeyError):
    def __str__(self):
        # KeyError quotes its argument; keep messages readable
        return Exception.__str__(self)


class FilterDesignError(IcascopeError, ValueError):
    pass


class WindowError(IcascopeError, ValueError):
    pass


class DegenerateInputError(IcascopeError, ValueError):
    pass


class DegenerateComponentError(IcascopeError, ValueError):
    pass


class NumericError(IcascopeError, ValueError):
    pass


class RangeError(IcascopeError, ValueError):
    pass


class IoError(IcascopeError, OSError):
    pass


class ShapeError(IcascopeError, ValueError):
    pass


class StateError(IcascopeError, RuntimeError):
    pass


class DataError(IcascopeError, ValueError):
    pass


class RegistryError(IcascopeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class CompatibilityError(IcascopeError, ValueError):
    pass
