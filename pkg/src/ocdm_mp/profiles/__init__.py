"""Delay-power profile config files.

Format: ``key = value`` lines, then a ``[taps]`` section of
``delay_s power_db`` rows. ``#`` starts a comment. Recognised keys:

``name``, ``carrier_hz``, ``bandwidth_hz`` (also the sample rate),
``n_chirps``, ``guard_interval_s``, ``m_trunc`` and either ``max_doppler_hz``
or the pair ``speed_mps`` / ``propagation_speed_mps`` (``v_max = f_c V / C``).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..channel import DelayPowerProfile

BUILTIN = ("eva300", "eva500", "uwa", "flat")

_FLOAT_KEYS = {
    "carrier_hz",
    "bandwidth_hz",
    "guard_interval_s",
    "max_doppler_hz",
    "speed_mps",
    "propagation_speed_mps",
}
_INT_KEYS = {"n_chirps", "m_trunc"}


def parse_profile(text: str, source: str = "<string>") -> DelayPowerProfile:
    keys: dict = {}
    taps = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section != "taps":
                raise ValueError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if section == "taps":
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{source}:{lineno}: expected 'delay_s power_db', got {raw!r}")
            taps.append((float(parts[0]), float(parts[1])))
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in _FLOAT_KEYS:
            keys[k] = float(v)
        elif k in _INT_KEYS:
            keys[k] = int(v)
        elif k == "name":
            keys[k] = v
        else:
            raise ValueError(f"{source}:{lineno}: unknown key {k!r}")

    for req in ("bandwidth_hz", "n_chirps", "guard_interval_s"):
        if req not in keys:
            raise ValueError(f"{source}: missing required key {req!r}")
    if not taps:
        raise ValueError(f"{source}: no [taps] rows")
    carrier = keys.get("carrier_hz", 0.0)
    if "max_doppler_hz" in keys:
        vmax = keys["max_doppler_hz"]
    elif "speed_mps" in keys and "propagation_speed_mps" in keys:
        vmax = carrier * keys["speed_mps"] / keys["propagation_speed_mps"]
    else:
        raise ValueError(f"{source}: give max_doppler_hz or speed_mps and propagation_speed_mps")
    meta = {k: keys[k] for k in ("speed_mps", "propagation_speed_mps", "m_trunc") if k in keys}
    return DelayPowerProfile(
        delays_s=tuple(t[0] for t in taps),
        powers_db=tuple(t[1] for t in taps),
        max_doppler_hz=vmax,
        bandwidth_hz=keys["bandwidth_hz"],
        n_chirps=keys["n_chirps"],
        guard_interval_s=keys["guard_interval_s"],
        carrier_hz=carrier,
        name=keys.get("name", ""),
        metadata=meta,
    )


def load_profile(name_or_path: str | Path) -> DelayPowerProfile:
    """Load a built-in profile by name (``eva500``, ``uwa``...) or a config file path."""
    s = str(name_or_path)
    if s in BUILTIN:
        text = resources.files(__package__).joinpath(f"{s}.cfg").read_text(encoding="utf-8")
        return parse_profile(text, source=f"{s}.cfg")
    p = Path(s)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read profile {p}: {exc}") from exc
    return parse_profile(text, source=str(p))


def default_m_trunc(profile: DelayPowerProfile, fallback: int = 5) -> int:
    return int(profile.metadata.get("m_trunc", fallback))
