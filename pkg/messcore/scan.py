"""Row tables shared by every scan, and the thread fan-out that fills them."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

OK_STATUSES = ("ok", "fuchsian")


@dataclass
class ScanTable:
    """Rows in scan order; `meta` carries run constants and derived thresholds."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def ok_rows(self) -> list[tuple]:
        if "status" not in self.columns:
            return list(self.rows)
        i = self.columns.index("status")
        return [row for row in self.rows if row[i] in OK_STATUSES]

    def failed(self) -> int:
        return len(self.rows) - len(self.ok_rows())


def map_rows(fn: Callable[[int, Any], tuple], items: Sequence[Any], threads: int) -> list[tuple]:
    """Apply `fn(index, item)` to every item; results keep input order whatever the thread count."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(len(items)), items))
    return [fn(i, item) for i, item in enumerate(items)]
