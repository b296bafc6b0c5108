from __future__ import annotations


class RelationError(ValueError):
    """Base class for problems with the relation library or its evaluation."""


class DslSyntaxError(RelationError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class UndeclaredVariable(RelationError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"undeclared variable {name!r}{where}")


class DuplicateAssign(RelationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"more than one assign-relation for {name!r}")


class DuplicateDeclaration(RelationError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        super().__init__(f"variable {name!r} declared twice (line {line})")


class SelfReference(RelationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"relation for {name!r} references itself on the right-hand side")


class MissingBinding(RelationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no value bound for {name!r}")


class DomainError(RelationError):
    """Arithmetic outside a function's domain (log of <= 0, division by zero, ...)."""
