"""轻量级线程安全事件发射器 - 变换过程中的诊断通知（残差、截断）"""

import threading
from collections.abc import Callable, Iterable, Iterator
from contextlib import contextmanager
from typing import Any


class EventEmitter:
    """
    线程安全的事件发射器，回调在 emit() 所在线程上同步执行。

    给定 names 时只接受这些事件名，拼错的名字在 on/emit 时直接报错。

    用法:
        emitter = EventEmitter({"stage_residual", "truncation"})
        emitter.on("stage_residual", my_callback)
        emitter.emit("stage_residual", 6, 1.2e-9)

        with emitter.record("stage_residual") as calls:
            transform.decompose(seq)
        # calls == [(6, 1.2e-9), ...]
    """

    def __init__(self, names: Iterable[str] | None = None):
        self._names = frozenset(names) if names is not None else None
        self._listeners: dict[str, list[Callable[..., None]]] = {}
        self._lock = threading.Lock()

    @property
    def names(self) -> frozenset[str] | None:
        return self._names

    def _check(self, event: str) -> None:
        if self._names is not None and event not in self._names:
            raise ValueError(f"unknown event {event!r}, expected one of {', '.join(sorted(self._names))}")

    def on(self, event: str, callback: Callable[..., None]) -> None:
        self._check(event)
        with self._lock:
            self._listeners.setdefault(event, []).append(callback)

    def off(self, event: str, callback: Callable[..., None]) -> None:
        with self._lock:
            remaining = [cb for cb in self._listeners.get(event, []) if cb is not callback]
            if remaining:
                self._listeners[event] = remaining
            else:
                self._listeners.pop(event, None)

    def emit(self, event: str, *args: Any) -> None:
        """按注册顺序调用回调；回调抛出的异常原样传给调用方"""
        self._check(event)
        with self._lock:
            listeners = list(self._listeners.get(event, ()))
        for cb in listeners:
            cb(*args)

    @contextmanager
    def record(self, event: str) -> Iterator[list[tuple]]:
        """在 with 块内收集某事件的全部位置参数，退出时自动注销"""
        calls: list[tuple] = []

        def _collect(*args: Any) -> None:
            calls.append(args)

        self.on(event, _collect)
        try:
            yield calls
        finally:
            self.off(event, _collect)
