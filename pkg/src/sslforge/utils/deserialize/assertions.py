from typing import Any, TypeGuard, TypeVar, get_origin

_T = TypeVar("_T")


def isinstance_or_raise(
    val: Any,
    class_or_tuple: type[_T] | tuple[type[_T], ...],
    message: str | None = None,
) -> TypeGuard[_T]:
    """Usage: `assert isinstance_or_raise(val, dict)`

    message placeholders: `{expected}`, `{actual}`, `{value}`
    """
    if not isinstance(class_or_tuple, tuple):
        class_or_tuple = (class_or_tuple,)
    # isinstance() rejects parametrized generics like dict[str, Any]
    origins = tuple(get_origin(t) or t for t in class_or_tuple)

    if not isinstance(val, origins):
        subs = {
            "expected": [getattr(t, "__name__", t) for t in class_or_tuple],
            "actual": type(val).__name__,
            "value": val,
        }
        template = message or "Expected any of {expected}, got {actual}: {value!r}"
        try:
            text = template.format(**subs)
        except (KeyError, IndexError):
            text = "Expected any of {expected}, got {actual}".format(**subs)
        raise TypeError(text)

    return True


def cast_or_raise(
    val: Any,
    class_or_tuple: type[_T] | tuple[type[_T], ...],
    message: str | None = None,
) -> _T:
    assert isinstance_or_raise(val, class_or_tuple, message)
    return val
