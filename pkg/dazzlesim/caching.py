# ruff: noqa: ANN202

from __future__ import annotations

import logging
from collections import OrderedDict, defaultdict
from collections.abc import Callable, Hashable
from functools import _make_key as make_cached_key
from typing import TYPE_CHECKING, Any, Generic, ParamSpec, TypeVar, overload

from .utils import MISSING

if TYPE_CHECKING:
    from typing_extensions import ParamSpec, TypeVar  # noqa: TC004

    T = TypeVar("T", default=Any)
    P = ParamSpec("P", default=...)
else:
    T = TypeVar("T")
    P = ParamSpec("P")

log = logging.getLogger(__name__)

__all__ = ("cache_info", "cached_callable", "clear_cache")

__cached_objects__: defaultdict[Any, list[CachedCallable[Any, ...]]] = defaultdict(list)


def clear_cache(key: str | None = MISSING) -> None:
    r"""Clears the cache of callables wrapped with :func:`cached_callable`.

    Parameters
    ----------
    key: Optional[:class:`str` | ``None``]
        If :class:`str` is passed, every cached callable registered under that name is cleared. If ``None`` is passed, the unnamed ones are cleared. If the argument is omitted, every cache is cleared.
    """

    if key is MISSING:
        items: list[CachedCallable[Any, ...]] = []
        for section in __cached_objects__.values():
            items.extend(section)
    else:
        items = __cached_objects__[key]

    for cached_obj in items:
        cached_obj.clear_cache()


def cache_info(key: str | None = None) -> dict[str, int]:
    """Returns the number of cached entries per callable registered under ``key``."""

    return {obj.name: len(obj.cache) for obj in __cached_objects__[key]}


class CachedCallable(Generic[T, P]):
    def __init__(self, obj: Callable[P, T], name: str | None = None, *, maxsize: int | None = None) -> None:
        if maxsize is not None and maxsize < 1:
            raise ValueError("maxsize must be at least 1")
        self.obj = obj
        self.name = name or obj.__name__
        self.maxsize = maxsize
        self.cache: OrderedDict[Hashable, T] = OrderedDict()
        self.__doc__ = obj.__doc__
        self.__wrapped__ = obj
        __cached_objects__[name].append(self)

    def __call__(self, *args: P.args, **kwargs: P.kwargs) -> T:
        key = make_cached_key(args, kwargs, False)
        try:
            value = self.cache[key]
        except KeyError:
            log.debug("Cache miss for %s", self.name)
            value = self.cache[key] = self.obj(*args, **kwargs)
            if self.maxsize is not None and len(self.cache) > self.maxsize:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(key)
        return value

    def clear_cache(self) -> None:
        self.cache.clear()


CallableT = TypeVar("CallableT", bound=Callable[..., Any])


@overload
def cached_callable(obj: str | None = None, *, maxsize: int | None = None) -> Callable[[CallableT], CallableT]: ...


@overload
def cached_callable(obj: CallableT) -> CallableT: ...


def cached_callable(
    obj: str | CallableT | None = None,
    *,
    maxsize: int | None = None,
) -> CallableT | Callable[[CallableT], CallableT]:
    r"""A decorator to cache a callable's output based on the passed arguments. It can also be called with an optional positional argument acting as a ``name``, which lets :func:`clear_cache` target it.

    .. NOTE::
        The arguments passed to the callable must be hashable. Returned arrays are shared between callers and must be treated as read-only.

    ``maxsize`` bounds the number of entries; the least recently used one is dropped first. ``None`` keeps
    everything.

    Example
    --------
    .. code-block:: python3

        @cached_callable
        def foo(cfg):
            ...

    .. code-block:: python3

        @cached_callable("psf", maxsize=4)
        def foo(cfg):
            ...
    """

    if isinstance(obj, str) or obj is None:

        def inner(obj2: CallableT) -> CallableT:
            return CachedCallable(obj2, obj, maxsize=maxsize)  # pyright: ignore[reportReturnType]

        return inner
    return CachedCallable(obj, maxsize=maxsize)  # pyright: ignore[reportReturnType]
