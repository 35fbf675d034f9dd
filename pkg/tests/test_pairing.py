import math

import numpy as np
from pydantic import ValidationError
from pytest import approx, raises
from scipy import stats

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream
from ergodic_in.enum import HopEnum, QuantizerKindEnum
from ergodic_in.fading import ChannelMatrix, FadingModel, f_map, f_map_array, sample_batch
from ergodic_in.pairing import (
    CellId, GridQuantizer, PhaseQuantizer, cell_image_under_f, cell_preimage_under_f, center, codes, codes_image_under_f,
    concentration_probability_bound, corner_probes, default_schedule, quantize,
)
from ergodic_in.pairing.matching import IndexSets, build_index_sets, index_set_concentration, match_pairs



class TestQuantizers:
    grid = GridQuantizer(delta=0.5, n=4, dims=(2, 2))
    phase = PhaseQuantizer(n=32, dims=(2, 2))


    def test_grid_cell_is_half_open(self):
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=[[0.24 + 0.26j, 0.25], [-0.25, -0.26j]])
        cell = quantize(TestQuantizers.grid, m)
        # (re, im) index per entry
        assert cell.coords == (0, 1, 1, 0, 0, 0, 0, -1)
        assert np.allclose(center(TestQuantizers.grid, cell).entries, [[0.5j, 0.5], [0, -0.5j]])


    def test_grid_out_of_range(self):
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=[[2.3, 0], [0, 0]])
        assert quantize(TestQuantizers.grid, m) is None
        inside = ChannelMatrix(hop=HopEnum.FIRST, entries=[[2.2, 0], [0, 0]])
        assert quantize(TestQuantizers.grid, inside) is not None


    def test_phase_bins(self):
        k = np.array([[0, 5], [31, 16]])
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=np.exp(2j * math.pi * k / 32) * np.exp(0.04j))
        cell = quantize(TestQuantizers.phase, m)
        assert cell.coords == (0, 5, 31, 16)
        assert np.allclose(center(TestQuantizers.phase, cell).entries, np.exp(2j * math.pi * k / 32))


    def test_dimension_checks(self):
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=np.ones((4, 2)))
        with raises(DimensionMismatchError):
            quantize(TestQuantizers.grid, m)
        cell = quantize(TestQuantizers.phase, ChannelMatrix(hop=HopEnum.FIRST, entries=np.ones((2, 2))))
        with raises(DimensionMismatchError):
            center(TestQuantizers.grid, cell)


    def test_cardinality(self):
        assert TestQuantizers.grid.cardinality() == 9 ** 8
        assert TestQuantizers.phase.cardinality() == 32 ** 4
        assert TestQuantizers.phase.with_dims((2, 4)).cardinality() == 32 ** 8


    def test_cell_id_validation(self):
        with raises(ValidationError, match='coordinates'):
            CellId(kind=QuantizerKindEnum.GRID, hop=HopEnum.FIRST, shape=(2, 2), coords=(0, 0, 0, 0))
        with raises(ValidationError, match='schedule'):
            CellId(kind=QuantizerKindEnum.SCHEDULE, hop=HopEnum.FIRST, shape=(2, 2), coords=(0,) * 8)


    def test_cell_commutes_with_f(self):
        for k, (model, q) in enumerate((
            (FadingModel.rayleigh(), GridQuantizer(delta=0.25, n=8, dims=(4, 2))),
            (FadingModel.uniform_phase(), PhaseQuantizer(n=32, dims=(4, 2))),
        )):
            h = sample_batch(model, 4, 2, 10_000, RandomStream(seed=5, key=(k,)))
            first_codes, first_valid = codes(q, h)
            second_codes, second_valid = codes(q.with_dims((2, 4)), f_map_array(h, 2))
            assert np.array_equal(codes_image_under_f(first_codes, 2), second_codes)
            assert np.array_equal(first_valid, second_valid)

            m = ChannelMatrix(hop=HopEnum.FIRST, entries=h[np.flatnonzero(first_valid)[0]])
            cell = quantize(q, m)
            assert quantize(q.with_dims((2, 4)), f_map(m, 2)) == cell_image_under_f(cell, 2)
            assert cell_preimage_under_f(cell_image_under_f(cell, 2), 2) == cell


    def test_image_needs_a_first_hop_cell(self):
        cell = quantize(TestQuantizers.phase, ChannelMatrix(hop=HopEnum.SECOND, entries=np.ones((2, 2))))
        with raises(DimensionMismatchError):
            cell_image_under_f(cell, 1)


    def test_corner_probes_stay_on_the_cell_boundary(self):
        stream = RandomStream(seed=2)
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=[[0.1, 0.6j], [-0.4, 1.1 + 0.2j]])
        cell = quantize(TestQuantizers.grid, m)
        c = center(TestQuantizers.grid, cell).entries
        probes = corner_probes(TestQuantizers.grid, cell, 8, stream)
        assert probes.shape == (8, 2, 2)
        assert np.allclose(np.abs((probes - c).real), 0.25)
        assert np.allclose(np.abs((probes - c).imag), 0.25)

        phase_cell = quantize(TestQuantizers.phase, ChannelMatrix(hop=HopEnum.FIRST, entries=np.ones((2, 2))))
        phase_probes = corner_probes(TestQuantizers.phase, phase_cell, 4, stream)
        assert np.allclose(np.abs(np.angle(phase_probes)), math.pi / 32)
        with raises(ParameterDomainError):
            corner_probes(TestQuantizers.phase, phase_cell, 0, stream)


    def test_default_schedule(self):
        schedule = default_schedule(10 ** 6, 1)
        assert schedule.delta == approx(10 ** (-6 / 96))
        assert schedule.n == 1
        assert schedule.tolerance == approx(0.01)
        assert schedule.quantizer((2, 2)).dims == (2, 2)
        with raises(ParameterDomainError):
            default_schedule(1, 1)


    def test_schedule_at_exact_powers(self):
        schedule = default_schedule(2 ** 96, 1)
        assert schedule.delta == approx(0.5)
        assert schedule.n == 4
        assert schedule.tolerance == approx(2 ** -32)
        # Δ halves and ΔN doubles with every factor 2⁹⁶ of n_B.
        schedules = [default_schedule(2 ** (96 * k), 1) for k in (1, 2, 3)]
        assert [s.delta for s in schedules] == approx([0.5, 0.25, 0.125])
        assert [s.delta * s.n for s in schedules] == approx([2, 4, 8])


    def test_phase_bins_wrap_around(self):
        q = PhaseQuantizer(n=4, dims=(2, 2))
        m = ChannelMatrix(hop=HopEnum.FIRST, entries=np.exp(1j * np.array([[6.2, 0.1], [3.1, -0.1]])))
        assert quantize(q, m).coords == (0, 0, 2, 0)


    def test_cells_and_their_images_have_equal_measure(self):
        n = 100_000
        stream = RandomStream(seed=12)
        for k, (model, q) in enumerate((
            (FadingModel.uniform_phase(), PhaseQuantizer(n=4, dims=(2, 2))),
            (FadingModel.rayleigh(), GridQuantizer(delta=1.0, n=1, dims=(2, 2))),
        )):
            first_codes, first_valid = codes(q, sample_batch(model, 2, 2, n, stream.substream(k, 0)))
            second_codes, second_valid = codes(q, sample_batch(model, 2, 2, n, stream.substream(k, 1)))
            width = int(np.prod(first_codes.shape[1:]))
            image = codes_image_under_f(first_codes, 1)[first_valid].reshape(-1, width)
            second = second_codes[second_valid].reshape(-1, width)
            _, inverse = np.unique(np.concatenate([image, second]), axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            first_counts = np.bincount(inverse[:len(image)], minlength=inverse.max() + 1)
            second_counts = np.bincount(inverse[len(image):], minlength=inverse.max() + 1)

            top = np.argmax(first_counts + second_counts)
            f1, f2 = first_counts[top] / n, second_counts[top] / n
            assert abs(f1 - f2) <= 3 * math.sqrt(f1 * (1 - f1) / n + f2 * (1 - f2) / n)
            if isinstance(q, PhaseQuantizer):
                # 256 equally likely cells
                assert stats.chi2_contingency(np.stack([first_counts, second_counts])).pvalue > 0.01


    def test_concentration_probability_bound(self):
        assert concentration_probability_bound(16, 16, 1000, 0.5) == approx(1 - 32 / 500)
        assert concentration_probability_bound(10 ** 6, 10 ** 6, 10, 0.1) == 0.0
        with raises(ParameterDomainError):
            concentration_probability_bound(1, 1, 0, 0.1)



class TestMatching:
    q = PhaseQuantizer(n=4, dims=(2, 2))


    def test_index_sets_partition_the_block(self):
        h = sample_batch(FadingModel.uniform_phase(), 2, 2, 500, RandomStream(seed=1))
        sets = build_index_sets(TestMatching.q, h, HopEnum.FIRST)
        assert sets.n_b == 500
        assert sets.covered() == 500
        assert sorted(t for indices in sets.cells.values() for t in indices) == list(range(1, 501))
        for indices in sets.cells.values():
            assert indices == sorted(indices)


    def test_index_sets_from_matrices(self):
        seq = [ChannelMatrix(hop=HopEnum.SECOND, entries=np.ones((2, 2))), ChannelMatrix(hop=HopEnum.SECOND, entries=-np.ones((2, 2)))] * 2
        sets = build_index_sets(TestMatching.q, seq)
        assert sets.hop == HopEnum.SECOND
        assert sorted(sets.cells.values()) == [[1, 3], [2, 4]]
        assert build_index_sets(TestMatching.q, seq, HopEnum.SECOND) == sets
        with raises(DimensionMismatchError, match='given as first hop'):
            build_index_sets(TestMatching.q, seq, HopEnum.FIRST)
        assert build_index_sets(TestMatching.q, []).covered() == 0
        assert build_index_sets(TestMatching.q, [], HopEnum.SECOND).hop == HopEnum.SECOND
        with raises(DimensionMismatchError):
            build_index_sets(TestMatching.q, np.ones((3, 2, 2)))


    def test_block_with_nothing_in_range(self):
        q = GridQuantizer(delta=0.01, n=1, dims=(2, 2))
        h = sample_batch(FadingModel.rayleigh(), 2, 2, 50, RandomStream(seed=4))
        sets = build_index_sets(q, h, HopEnum.FIRST)
        assert sets.n_b == 50
        assert sets.cells == {}
        assert match_pairs(sets, build_index_sets(q, h, HopEnum.SECOND), 1) == []


    def test_grid_out_of_range_slots_are_idle(self):
        q = GridQuantizer(delta=0.5, n=1, dims=(2, 2))
        h = sample_batch(FadingModel.rayleigh(), 2, 2, 1000, RandomStream(seed=4))
        sets = build_index_sets(q, h, HopEnum.FIRST)
        assert sets.covered() == int(codes(q, h)[1].sum()) < 1000


    def test_index_sets_validation(self):
        cell = CellId(kind=QuantizerKindEnum.PHASE, hop=HopEnum.FIRST, shape=(2, 2), coords=(0, 0, 0, 0))
        other = CellId(kind=QuantizerKindEnum.PHASE, hop=HopEnum.FIRST, shape=(2, 2), coords=(1, 0, 0, 0))
        with raises(ValidationError, match='disjoint'):
            IndexSets(hop=HopEnum.FIRST, n_b=3, cells={cell: [1, 2], other: [2]})
        with raises(ValidationError, match='1..3'):
            IndexSets(hop=HopEnum.FIRST, n_b=3, cells={cell: [4]})


    def test_matched_pairs_are_neutralizing_cells(self):
        stream = RandomStream(seed=8)
        model = FadingModel.uniform_phase()
        h = sample_batch(model, 2, 2, 2000, stream.substream(0))
        g = sample_batch(model, 2, 2, 2000, stream.substream(1))
        first = build_index_sets(TestMatching.q, h, HopEnum.FIRST)
        second = build_index_sets(TestMatching.q, g, HopEnum.SECOND)
        matched = match_pairs(first, second, 1)
        assert matched
        assert len({t1 for t1, _ in matched}) == len(matched) == len({t2 for _, t2 in matched})
        for t1, t2 in matched:
            h_codes, _ = codes(TestMatching.q, h[t1 - 1])
            g_codes, _ = codes(TestMatching.q, g[t2 - 1])
            assert np.array_equal(codes_image_under_f(h_codes, 1), g_codes)
        for cell, t1 in first.cells.items():
            assert sum(1 for a, _ in matched if a in t1) == min(len(t1), second.cardinality(cell_image_under_f(cell, 1)))
        with raises(DimensionMismatchError):
            match_pairs(second, first, 1)


    def test_index_set_concentration_honors_bound(self):
        report = index_set_concentration(TestMatching.q, FadingModel.uniform_phase(), 10_000, 0.25, 50, RandomStream(seed=6))
        assert report.bound == approx(1 - 512 / (2 * 10_000 * 0.25 ** 2))
        assert report.honors_bound
        assert report.max_deviation < 0.25
