import functools
from pathlib import Path

from latticehom.harness import load_config, run_simulation

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@functools.lru_cache(maxsize=None)
def desk_run(name, delta):
    """Lattice and homogenized run of a shipped config at one period (cached per session)."""
    cfg = load_config(CONFIGS / f"{name}.cfg")
    hom = None
    if delta != 0.25:
        hom = desk_run(name, 0.25).homogenized
    return run_simulation(cfg, delta, hom)

