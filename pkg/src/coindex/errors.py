"""Exception types shared across the package."""


class CoindexError(Exception):
    pass


class LexError(CoindexError):
    def __init__(self, offset: int, character: str):
        self.offset = offset
        self.character = character
        super().__init__(f"unexpected character {character!r} at offset {offset}")


class ParseError(CoindexError):
    def __init__(self, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"parse error at offset {offset}: expected {expected}")


class ArityError(CoindexError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"map has {got} components, expected {expected}")


class EvalError(CoindexError):
    pass


class ShapeError(CoindexError):
    pass


class SingularError(CoindexError):
    pass


class RangeError(CoindexError):
    pass


class LinearPartMismatch(CoindexError):
    pass


class PeriodicityError(CoindexError):
    """A torus map whose remainder is not 1-periodic for its linear part."""


class InadmissibleInput(CoindexError):
    pass


class PerturbationFailure(CoindexError):
    def __init__(self, draws):
        self.draws = [tuple(float(v) for v in d) for d in draws]
        super().__init__(f"no nondegenerate perturbation found after {len(self.draws)} draws")
