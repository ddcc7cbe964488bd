from __future__ import annotations

import sys

import numpy as np
import pytest

from imaxppo.envs import ChainGame, ChainGameSpec
from imaxppo.game import marginalized_transition_matrix


@pytest.fixture(scope="session")
def chain():
    game = ChainGame()
    return game, marginalized_transition_matrix(game), game.initial_distribution()


@pytest.fixture(scope="session")
def chain_uniform():
    game = ChainGame(ChainGameSpec(enemy_script="uniform"))
    return game, marginalized_transition_matrix(game), game.initial_distribution()


def random_policy(rng, n_states, n_actions, concentration=1.0):
    return rng.dirichlet(np.full(n_actions, concentration), size=n_states)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
