"""Resource budget profiles.

The active profile is read from ``POINTSCATTER_BUDGET`` (``desk`` or
``large``) each time :func:`active_budget` is called.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ResourceError

ENV_VAR = "POINTSCATTER_BUDGET"


@dataclass(frozen=True)
class Budget:
    name: str
    max_window: int  # shells materialized by one windowed enumeration
    table_cap_2d: int  # largest exact r2 table
    table_cap_3d: int  # largest exact r3 table
    scan_cap_3d: int  # largest hi for a 3D coordinate scan

    def check_window(self, size: int, what: str = "shell window") -> None:
        if size > self.max_window:
            raise ResourceError(
                f"{what} of {size} entries exceeds budget '{self.name}' "
                f"(max_window={self.max_window})"
            )


PROFILES = {
    "desk": Budget("desk", max_window=1 << 24, table_cap_2d=1 << 23,
                   table_cap_3d=1 << 22, scan_cap_3d=1 << 26),
    "large": Budget("large", max_window=1 << 27, table_cap_2d=1 << 26,
                    table_cap_3d=1 << 24, scan_cap_3d=1 << 30),
}


def active_budget() -> Budget:
    name = os.environ.get(ENV_VAR, "desk").strip().lower() or "desk"
    try:
        return PROFILES[name]
    except KeyError:
        raise ResourceError(
            f"unknown budget profile {name!r} in {ENV_VAR}; "
            f"expected one of {sorted(PROFILES)}"
        ) from None
