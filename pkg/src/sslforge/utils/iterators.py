import functools
from typing import Callable, Iterator, ParamSpec, TypeVar

_T = TypeVar("_T")
_P = ParamSpec("_P")


def listify(f: Callable[_P, Iterator[_T]]) -> Callable[_P, list[_T]]:
    """Collects a generator function's output into a list."""

    @functools.wraps(f)
    def wrapper(*args: _P.args, **kwargs: _P.kwargs) -> list[_T]:
        return list(f(*args, **kwargs))

    return wrapper
