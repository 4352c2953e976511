from .engine import (
    BACKEND_NAME,
    AbsorbedEnergyMap,
    BeamSpec,
    TransportConfig,
    read_mcvol,
    sample_hg,
    simulate,
    spin,
    write_mcvol,
)

__all__ = [
    "BACKEND_NAME",
    "AbsorbedEnergyMap",
    "BeamSpec",
    "TransportConfig",
    "read_mcvol",
    "sample_hg",
    "simulate",
    "spin",
    "write_mcvol",
]
