from __future__ import annotations

from collections.abc import Callable
from inspect import getmembers
from typing import Any, ClassVar, Generic, Self, TypeVar, cast

from .utils import MISSING

T = TypeVar("T")
ValidCls = Callable[[Any], Any]

__all__ = ("Base", "Record", "add_prop")


def _slots_of(cls: type) -> tuple[str, ...]:
    names: list[str] = []
    for klass in reversed(cls.__mro__):
        slots = klass.__dict__.get("__slots__", ())
        if isinstance(slots, str):
            slots = (slots,)
        names.extend(name for name in slots if not name.startswith("_"))
    return tuple(names)


class Base(Generic[T]):
    r"""A slotted value object that converts to and from plain JSON-ready dictionaries.

    Nested :class:`Base` objects, lists of them and tuples are converted recursively by :meth:`to_dict`.
    Subclasses whose constructor does not take every slot as a keyword argument override :meth:`from_dict`.
    """

    __slots__ = ()
    __option_names__: ClassVar[dict[str, str]] = {}

    def to_dict(self) -> T:
        names = self.__option_names__ or {}
        foo = {}
        for name in _slots_of(type(self)):
            item: Any = getattr(self, name)
            if isinstance(item, Base):
                item = item.to_dict()
            elif item and isinstance(item, list) and isinstance(item[0], Base):
                item = [child.to_dict() for child in cast("list[Base[Any]]", item)]
            elif isinstance(item, tuple):
                item = list(cast("tuple[Any, ...]", item))
            foo[names.get(name, name)] = item

        return cast("T", foo)

    @classmethod
    def from_dict(cls: type[Self], data: T) -> Self:
        names = {value: key for key, value in cls.__option_names__.items()}
        raw = cast("dict[str, Any]", data)
        return cls(**{names.get(key, key): value for key, value in raw.items()})

    def _values(self) -> tuple[Any, ...]:
        return tuple(getattr(self, name) for name in _slots_of(type(self)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Base) or type(other) is not type(self):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((type(self).__name__, repr(self.to_dict())))

    def __repr__(self) -> str:
        args = [f"{item}={getattr(self, item)!r}" for item in _slots_of(type(self))]
        return f"<{self.__class__.__name__} {' '.join(args)}>"


def _convert_cls(orig: ValidCls, is_list: bool) -> ValidCls:
    if orig is MISSING:
        return lambda x: x
    if orig is not MISSING and is_list is True:
        return lambda item: [orig(x) for x in item]
    return orig


def _get_prop_func(
    cls: ValidCls, name: str, *, default: Any = MISSING
) -> Callable[[Any], Any]:
    if default is MISSING:

        def func(self: Any) -> Any:
            return cls(self._data[name])

    else:

        def func(self: Any) -> Any:
            return cls(self._data.get(name, default))

    return func


def add_prop(
    name: str,
    *,
    default: Any = MISSING,
    cls: ValidCls = MISSING,
    is_list: bool = False,
) -> Any:
    """Builds a read-only property that pulls ``name`` out of ``self._data``, optionally converting it with ``cls``."""

    cls = _convert_cls(cls, is_list)
    func = _get_prop_func(cls, name, default=default)

    return property(func)


class Record:
    r"""A read-only view over a JSON object, with typed access through :func:`add_prop` properties."""

    __slots__ = ("__repr_attributes__", "_data")

    def __init__(self, data: dict[str, Any]) -> None:
        self._data = data
        self.__repr_attributes__ = [
            entry[0]
            for entry in getmembers(
                self.__class__, lambda other: isinstance(other, property)
            )
        ]

    def to_dict(self) -> dict[str, Any]:
        return dict(self._data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Record):
            return NotImplemented
        return self._data == other._data

    def __hash__(self) -> int:
        return hash(repr(sorted(self._data.items())))

    def __repr__(self) -> str:
        args = [f"{item}={getattr(self, item)!r}" for item in self.__repr_attributes__]
        return f"<{self.__class__.__name__} {' '.join(args)}>"
