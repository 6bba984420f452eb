import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from heatchain import (
    AncillaSpec,
    ConsistencyError,
    ModelConfig,
    SamplerConfig,
    Spectrum,
    UnitarySpec,
    ancilla_post_state,
    average_entropy_production,
    empirical_joint,
    entropy_production,
    exact_forward_joint,
    heats_from_ancilla_path,
    heats_from_system_path,
    iter_augmented_paths,
    iter_trajectories,
    realize_model,
    sample_trajectory,
    summarize_samples,
    total_variation,
)
from heatchain.streams import substream

# Frozen from the brute-force post-collision sum over the jump tensor for
# theta = pi/4, system beta 1, ancilla beta 2, gap 1.
Q_POST_EXCITED = 0.19407217169605628
AVG_SIGMA_SINGLE = 0.07486924967393874


def qubit() -> Spectrum:
    return Spectrum.from_values(["0", "1"])


def resonant_model(betas, theta=math.pi / 4, beta_s=1.0, seed=0) -> ModelConfig:
    ancillas = tuple(
        AncillaSpec(qubit(), beta, UnitarySpec.partial_swap(theta)) for beta in betas
    )
    return ModelConfig(system=qubit(), system_beta=beta_s, ancillas=ancillas, master_seed=seed)


def identity_model(n=2) -> ModelConfig:
    ancillas = tuple(AncillaSpec(qubit(), 2.0, UnitarySpec.identity()) for _ in range(n))
    return ModelConfig(system=qubit(), system_beta=1.0, ancillas=ancillas, master_seed=0)


def haar_model(sys_levels, anc_levels, betas, beta_s=1.0, seed=0) -> ModelConfig:
    system = Spectrum.from_values(sys_levels)
    ancillas = tuple(
        AncillaSpec(Spectrum.from_values(anc_levels), beta, UnitarySpec.haar())
        for beta in betas
    )
    return ModelConfig(system=system, system_beta=beta_s, ancillas=ancillas, master_seed=seed)


class TestSampleTrajectory:
    def test_identity_freezes_everything(self):
        model = identity_model(3)
        rng = substream(5)
        for _ in range(50):
            traj = sample_trajectory(model, rng)
            assert len(set(traj.alphas)) == 1
            assert all(n_in == n_out for n_in, n_out in traj.ancilla_pairs)

    def test_full_swap_exchanges_levels(self):
        model = resonant_model([2.0, 0.7], theta=math.pi / 2)
        rng = substream(6)
        for _ in range(100):
            traj = sample_trajectory(model, rng)
            for i, (n_in, n_out) in enumerate(traj.ancilla_pairs):
                assert traj.alphas[i + 1] == n_in
                assert n_out == traj.alphas[i]

    def test_heat_bookkeeping_agrees_on_every_shot(self):
        model = haar_model(["0", "1", "2"], ["0", "1", "2"], betas=(0.5, 2.5), seed=3)
        spectra = [anc.spectrum for anc in model.ancillas]
        for record in iter_trajectories(model, SamplerConfig(shots=500, master_seed=9)):
            sys_heats = heats_from_system_path(record.trajectory.alphas, model.system)
            anc_heats = heats_from_ancilla_path(record.trajectory.ancilla_pairs, spectra)
            assert sys_heats == anc_heats == record.heats

    def test_log_path_probability_matches_tables(self):
        model = resonant_model([2.0])
        realized = realize_model(model)
        p0 = realized.system_state.populations
        q = realized.stages[0].ancilla_state.populations
        s2 = 0.5  # jump probability at theta = pi/4
        for record in iter_trajectories(model, SamplerConfig(shots=200, master_seed=4)):
            a0, a1 = record.trajectory.alphas
            n_in, n_out = record.trajectory.ancilla_pairs[0]
            jump = 1.0 if (a0, n_in) == (a1, n_out) and a0 == n_in else (
                s2 if (a0, n_in) != (a1, n_out) else 1.0 - s2
            )
            expected = math.log(p0[a0]) + math.log(q[n_in]) + math.log(jump)
            assert record.log_path_probability == pytest.approx(expected, abs=1e-12)


class TestHeatHelpers:
    def test_constant_path_is_zero(self):
        assert heats_from_system_path((1, 1, 1), qubit()) == (Fraction(0),) * 2

    def test_drop_releases_heat(self):
        assert heats_from_system_path((1, 0), qubit()) == (Fraction(1),)

    def test_round_trip_telescopes(self):
        assert heats_from_system_path((0, 1, 0), qubit()) == (Fraction(-1), Fraction(1))

    def test_ancilla_side(self):
        spectra = [qubit(), Spectrum.from_values(["0", "1/2"])]
        pairs = ((0, 1), (1, 0))
        assert heats_from_ancilla_path(pairs, spectra) == (Fraction(1), Fraction(-1, 2))


class TestEntropyProduction:
    def test_zero_heats(self):
        model = resonant_model([2.0, 3.0])
        assert entropy_production((0, 0, 0), ((0, 0), (0, 0)), model) == 0.0

    def test_single_quantum(self):
        model = resonant_model([2.0])
        sigma = entropy_production((1, 0), ((0, 1),), model)
        assert sigma == pytest.approx(1.0, abs=1e-12)  # (2 - 1) * 1

    def test_two_collision_arithmetic(self):
        model = resonant_model([2.0, 3.0])
        sigma = entropy_production((1, 0, 1), ((0, 1), (1, 0)), model)
        assert sigma == pytest.approx(-1.0, abs=1e-12)  # 1*1 + 2*(-1)

    def test_inconsistent_inputs_raise(self):
        model = resonant_model([2.0])
        with pytest.raises(ConsistencyError):
            entropy_production((0, 0), ((0, 1),), model)


class TestAncillaPostState:
    def test_identity_returns_thermal(self):
        model = identity_model(2)
        realized = realize_model(model)
        post = ancilla_post_state(model, 2)
        assert np.allclose(post, realized.stages[1].ancilla_state.populations, atol=1e-15)

    def test_full_swap_takes_system_populations(self):
        model = resonant_model([2.0], theta=math.pi / 2)
        realized = realize_model(model)
        post = ancilla_post_state(model, 1)
        assert np.allclose(post, realized.system_state.populations, atol=1e-15)

    def test_half_swap_value(self):
        post = ancilla_post_state(resonant_model([2.0]), 1)
        assert post[1] == pytest.approx(Q_POST_EXCITED, abs=1e-14)
        assert post.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force(self):
        model = haar_model(["0", "1"], ["0", "1", "2"], betas=(0.5, 2.0), seed=11)
        realized = realize_model(model)
        i = 2
        p = realized.system_state.populations
        p = realized.stages[0].propagator.matrix @ p
        stage = realized.stages[1]
        q = stage.ancilla_state.populations
        brute = np.zeros(stage.spectrum.dim)
        for n_out in range(stage.spectrum.dim):
            for a_in in range(2):
                for a_out in range(2):
                    for n_in in range(stage.spectrum.dim):
                        brute[n_out] += (
                            stage.tensor.entry(a_out, n_out, a_in, n_in) * q[n_in] * p[a_in]
                        )
        assert np.allclose(ancilla_post_state(model, i), brute, atol=1e-13)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            ancilla_post_state(resonant_model([2.0]), 2)


class TestAverageEntropyProduction:
    def test_identity_model_is_zero(self):
        report = average_entropy_production(identity_model(2))
        assert report.passed
        assert report.heat_average == pytest.approx(0.0, abs=1e-12)
        assert report.trajectory_average == pytest.approx(0.0, abs=1e-12)
        assert report.information_form == pytest.approx(0.0, abs=1e-12)

    def test_single_collision_value(self):
        report = average_entropy_production(resonant_model([2.0]))
        assert report.passed
        assert report.heat_average == pytest.approx(AVG_SIGMA_SINGLE, abs=1e-12)
        assert report.max_pairwise_gap < 1e-9
        assert report.information_form > 0.0

    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_three_way_agreement_on_haar_chains(self, seed):
        model = haar_model(
            ["0", "1", "2"], ["0", "1", "2"], betas=(0.5, 1.5, 2.5), seed=seed
        )
        report = average_entropy_production(model)
        assert report.passed
        assert report.max_pairwise_gap < 1e-9
        assert report.information_form >= -1e-12


class TestHiddenMarkovStructure:
    def test_later_exchange_remembers_earlier_ancilla(self):
        # With two distinguishable temperatures, conditioning the second
        # collision's outcome on the first ancilla's initial level shifts
        # it: the visible layer alone is not a Markov chain.
        model = resonant_model([0.5, 2.5])
        joint: dict[tuple, float] = {}
        for _, pairs, w in iter_augmented_paths(model):
            (n1, n1p), (n2, n2p) = pairs
            key = (n1, n1p, n2, n2p)
            joint[key] = joint.get(key, 0.0) + w

        def conditional(n1, n1p, n2):
            weights = [joint.get((n1, n1p, n2, d), 0.0) for d in (0, 1)]
            total = sum(weights)
            return None if total <= 0 else [w / total for w in weights]

        witnesses = 0
        for n1p, n2 in itertools.product((0, 1), repeat=2):
            low = conditional(0, n1p, n2)
            high = conditional(1, n1p, n2)
            if low is None or high is None:
                continue
            tv = 0.5 * sum(abs(a - b) for a, b in zip(low, high))
            if tv > 1e-3:
                witnesses += 1
        assert witnesses >= 2


class TestEmpirical:
    def test_identity_point_mass(self):
        model = identity_model(2)
        result = empirical_joint(iter_trajectories(model, SamplerConfig(shots=100, master_seed=1)))
        assert len(result.distribution) == 1
        assert result.distribution.probability((Fraction(0), Fraction(0))) == 1.0
        assert result.stderr[(Fraction(0), Fraction(0))] == 0.0

    def test_matches_exact_within_errors(self):
        model = resonant_model([2.0], seed=1)
        shots = 100_000
        summary = summarize_samples(
            iter_trajectories(model, SamplerConfig(shots=shots, master_seed=1)), shots
        )
        exact = exact_forward_joint(model)
        for key, p in exact.entries.items():
            estimate = summary.empirical.distribution.probability(key)
            stderr = math.sqrt(p * (1 - p) / shots)
            assert abs(estimate - p) < 4 * stderr
        assert total_variation(summary.empirical.distribution, exact) < 0.01

    def test_integral_identity_mean_near_one(self):
        model = resonant_model([0.5, 2.5], seed=2)
        summary = summarize_samples(
            iter_trajectories(model, SamplerConfig(shots=50_000, master_seed=2)), 50_000
        )
        assert abs(summary.integral_ft_mean - 1.0) < 5 * summary.integral_ft_stderr

    def test_stderr_formula(self):
        model = resonant_model([2.0])
        result = empirical_joint(iter_trajectories(model, SamplerConfig(shots=1000, master_seed=3)))
        for key, p in result.distribution.entries.items():
            assert result.stderr[key] == pytest.approx(
                math.sqrt(p * (1 - p) / 1000), abs=1e-15
            )

    def test_bit_identical_for_fixed_seed_and_workers(self):
        model = resonant_model([0.5, 2.5], seed=4)
        config = SamplerConfig(shots=2000, master_seed=17, worker_count=3)
        first = summarize_samples(iter_trajectories(model, config), 2000)
        second = summarize_samples(iter_trajectories(model, config), 2000)
        assert first.empirical.distribution.entries == second.empirical.distribution.entries
        assert first.integral_ft_mean == second.integral_ft_mean

    def test_worker_count_changes_stream_layout(self):
        model = resonant_model([0.5, 2.5], seed=4)
        one = summarize_samples(
            iter_trajectories(model, SamplerConfig(shots=2000, master_seed=17, worker_count=1)),
            2000,
        )
        three = summarize_samples(
            iter_trajectories(model, SamplerConfig(shots=2000, master_seed=17, worker_count=3)),
            2000,
        )
        assert one.empirical.distribution.entries != three.empirical.distribution.entries

    def test_shot_count_mismatch_raises(self):
        model = identity_model(1)
        records = list(iter_trajectories(model, SamplerConfig(shots=10, master_seed=1)))
        with pytest.raises(ValueError):
            empirical_joint(records, shots=20)

    def test_empty_stream_raises(self):
        with pytest.raises(ValueError):
            empirical_joint([])


class TestSamplerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(shots=0)
        with pytest.raises(ValueError):
            SamplerConfig(shots=1, worker_count=0)
