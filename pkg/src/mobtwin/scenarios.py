"""Bundled scenario files (the reconstructed two-route field)."""

from __future__ import annotations

from pathlib import Path

DATA = Path(__file__).parent / "data"
BUNDLED = {
    "two-route-map": DATA / "two_route_field.yaml",
    "congestion-off": DATA / "congestion_off.yaml",
    "congestion-on": DATA / "congestion_on.yaml",
}


def resolve(name_or_path: str | Path) -> Path:
    """Return a filesystem path, mapping bundled scenario names to their files."""
    p = Path(name_or_path)
    if not p.exists() and str(name_or_path) in BUNDLED:
        return BUNDLED[str(name_or_path)]
    return p
