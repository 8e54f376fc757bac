import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from partmc import rng as rngmod
from partmc.errors import OutsideSupportError, RegionError
from partmc.mh import (GaussianProposal, RegionTarget, UniformProposal, build_proposal, mh_step,
                       run_chain, run_parallel_chains)
from partmc.persist import read_traces, write_traces
from partmc.targets import symmetric_mixture_1d


def std_normal(x):
    x = np.asarray(x, dtype=float)
    return float(-0.5 * x @ x)


def flat_box(x):
    return 0.0 if np.all(np.abs(x) <= 10) else -np.inf


class FixedProposal:
    """Always proposes the same point (symmetric in the MH sense for this test)."""

    symmetric = True

    def __init__(self, y):
        self.y = np.asarray(y, dtype=float)

    def sample(self, x, rng):
        return self.y.copy()


def test_flat_target_inside_support_always_accepts():
    g = rngmod.stream(0)
    x = np.zeros(2)
    for _ in range(200):
        x, acc = mh_step(x, flat_box, UniformProposal(0.5), g)
        assert acc


def test_restricted_target_rejects_moves_out_of_region():
    target = RegionTarget(std_normal, lambda x: int(x[0] > 0), 0)
    x, acc = mh_step(np.array([-0.1]), target, FixedProposal([0.5]), rngmod.stream(0))
    assert not acc and x[0] == -0.1


def test_acceptance_probability_of_fixed_move():
    g = rngmod.stream(1)
    n = 100000
    hits = sum(mh_step(np.array([0.0]), std_normal, FixedProposal([1.0]), g)[1] for _ in range(n))
    assert hits / n == pytest.approx(np.exp(-0.5), abs=0.01)


def test_start_outside_support_is_an_error():
    with pytest.raises(OutsideSupportError):
        mh_step(np.array([20.0, 0.0]), flat_box, UniformProposal(1.0), rngmod.stream(0))
    with pytest.raises(OutsideSupportError):
        run_chain(np.array([20.0, 0.0]), flat_box, UniformProposal(1.0), 5, 0)


def test_run_chain_zero_steps_and_determinism():
    t0 = run_chain(np.array([0.3]), std_normal, UniformProposal(1.0), 0, 5)
    assert t0.states.shape == (1, 1) and t0.states[0, 0] == 0.3
    a = run_chain(np.array([0.3]), std_normal, UniformProposal(1.0), 500, 5)
    b = run_chain(np.array([0.3]), std_normal, UniformProposal(1.0), 500, 5)
    assert np.array_equal(a.states, b.states)
    assert 0 <= a.acceptance_count <= len(a) - 1
    assert a.acceptance_count == a.accepted.sum()


def test_normal_target_long_run_mean():
    t = run_chain(np.array([0.0]), std_normal, UniformProposal(1.0), 100000, 123)
    assert abs(t.states.mean()) < 0.05


def test_detailed_balance_of_empirical_transitions():
    t = run_chain(np.array([0.0]), std_normal, UniformProposal(1.0), 200000, 9)
    bins = np.digitize(t.states[:, 0], np.linspace(-2, 2, 9))
    a, b = bins[:-1], bins[1:]
    for i in range(len(np.unique(bins)) - 1):
        n_ab = np.sum((a == i) & (b == i + 1))
        n_ba = np.sum((a == i + 1) & (b == i))
        # stationary flows match; count difference sd ~ sqrt(n_ab + n_ba) ignoring autocorrelation
        assert abs(n_ab - n_ba) <= 3 * np.sqrt(n_ab + n_ba) + 1


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.floats(0.05, 3))
def test_bundled_proposals_are_symmetric(x, y, s):
    for q in (UniformProposal(s), GaussianProposal(s)):
        assert q.log_density(x, y) == pytest.approx(q.log_density(y, x), abs=1e-12)


def test_proposal_draws_match_their_density():
    g = rngmod.stream(3)
    x = np.array([0.5, -1.0])
    U = np.array([UniformProposal(0.7).sample(x, g) for _ in range(4000)])
    G = np.array([GaussianProposal(0.3).sample(x, g) for _ in range(4000)])
    for j in range(2):
        assert stats.kstest(U[:, j], stats.uniform(x[j] - 0.7, 1.4).cdf).pvalue > 1e-3
        assert stats.kstest(G[:, j], stats.norm(x[j], 0.3).cdf).pvalue > 1e-3


def test_density_matrix_matches_pointwise_density():
    X = rngmod.stream(4).normal(size=(6, 2))
    for q in (UniformProposal(0.8), GaussianProposal(0.6)):
        M = q.density_matrix(X, X)
        for i in range(6):
            for j in range(6):
                assert M[i, j] == pytest.approx(np.exp(q.log_density(X[i], X[j])), rel=1e-12)


def test_build_proposal():
    assert build_proposal({"kind": "uniform", "tau": 0.2}).tau == 0.2
    assert build_proposal({"kind": "gaussian", "scale": 0.1}).scale == 0.1
    with pytest.raises(ValueError):
        build_proposal({"kind": "levy"})
    with pytest.raises(ValueError):
        UniformProposal(0)


# parallel restricted chains

def _split_at_zero():
    target = symmetric_mixture_1d(1.0, 0.4)
    region_of = lambda x: int(np.asarray(x).ravel()[0] > 0)
    return target, [RegionTarget(target, region_of, i) for i in (0, 1)]


def test_single_region_matches_run_chain():
    target = symmetric_mixture_1d()
    traces = run_parallel_chains(UniformProposal(0.2), [target], [np.array([0.5])], 300, 77)
    ref = run_chain(np.array([0.5]), target, UniformProposal(0.2), 300, 77)
    assert np.array_equal(traces[0].states, ref.states)


def test_restricted_chains_never_leave_their_region():
    _, rts = _split_at_zero()
    t0, t1 = run_parallel_chains(UniformProposal(0.2), rts, [np.array([-1.0]), np.array([1.0])], 5000, 3)
    assert np.all(t0.states <= 0) and np.all(t1.states > 0)
    assert t0.region_id == 0 and t1.region_id == 1


def test_results_do_not_depend_on_worker_count():
    target = symmetric_mixture_1d()
    rts = [target] * 4
    inits = [np.array([v]) for v in (-1.0, -0.5, 0.5, 1.0)]
    a = run_parallel_chains(UniformProposal(0.2), rts, inits, 400, 11, workers=1)
    b = run_parallel_chains(UniformProposal(0.2), rts, inits, 400, 11, workers=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.states, y.states)


def test_thread_cap_env_does_not_change_results(monkeypatch):
    target = symmetric_mixture_1d()
    inits = [np.array([v]) for v in (-1.0, 1.0)]
    monkeypatch.setenv("PARTMC_THREADS", "1")
    a = run_parallel_chains(UniformProposal(0.2), [target] * 2, inits, 300, 2)
    monkeypatch.setenv("PARTMC_THREADS", "8")
    b = run_parallel_chains(UniformProposal(0.2), [target] * 2, inits, 300, 2)
    assert all(np.array_equal(x.states, y.states) for x, y in zip(a, b))


def test_init_outside_region_names_region():
    _, rts = _split_at_zero()
    with pytest.raises(RegionError, match="region 1"):
        run_parallel_chains(UniformProposal(0.2), rts, [np.array([-1.0]), np.array([-0.5])], 10, 0)


def test_trace_csv_round_trip(tmp_path):
    _, rts = _split_at_zero()
    traces = run_parallel_chains(UniformProposal(0.2), rts, [np.array([-1.0]), np.array([1.0])], 50, 8)
    path = tmp_path / "traces.csv"
    write_traces(path, traces)
    header = path.read_text().splitlines()[0]
    assert header == "chain_id,region_id,step,x0,accepted"
    back = read_traces(path)
    for a, b in zip(traces, back):
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.accepted, b.accepted)
        assert a.region_id == b.region_id
