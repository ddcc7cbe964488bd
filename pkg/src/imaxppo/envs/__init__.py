from .chain import ChainGame, ChainGameSpec
from .gridminer import GridMiner, GridMinerSpec

__all__ = ["ChainGame", "ChainGameSpec", "GridMiner", "GridMinerSpec", "make_game"]


def make_game(name: str, **params):
    if name == "chain":
        return ChainGame(ChainGameSpec(**params))
    if name == "gridminer":
        return GridMiner(GridMinerSpec(**params))
    raise ValueError(f"unknown env {name!r}")
