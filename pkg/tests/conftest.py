import numpy as np
import pytest

from crossal.apprenticeship import CostBasis, EnvironmentBundle
from crossal.experiment import ExperimentConfig, build_expert

from helpers import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def benchmark_experts():
    """(world, policy, measure) for the four benchmark worlds under the default config."""
    cfg = ExperimentConfig()
    out = []
    for i, world in enumerate(cfg.worlds):
        policy, measure, _ = build_expert(world, cfg, i)
        out.append((world, policy, measure))
    return out


@pytest.fixture(scope="session")
def benchmark_bundles(benchmark_experts):
    """Expert bundles for the four benchmark worlds under the default config."""
    discount = ExperimentConfig().discount
    envs = [EnvironmentBundle(world.to_mdp(discount), measure, f"world{i + 1}")
            for i, (world, _, measure) in enumerate(benchmark_experts)]
    return envs, CostBasis.identity(envs[0].mdp.n_pairs)
