import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclores.classical import PhasePoint, decompose
from cyclores.grid import (
    DUMP_HEADER,
    Grid2D,
    WaveFunction,
    apply_phase_translation,
    dump_state,
    inner,
    landau_coherent_state,
    load_state,
    make_gaussian,
    parseval_norms,
    rotate_array,
)
from cyclores.observables import expectations


class TestGrid:
    @pytest.mark.parametrize("n", [0, 6, 100, 255])
    def test_power_of_two(self, n):
        with pytest.raises(ValueError):
            Grid2D(n, 10.0)

    def test_extent(self):
        with pytest.raises(ValueError):
            Grid2D(64, -1.0)

    def test_coordinates(self):
        g = Grid2D(16, 8.0)
        assert g.h == 0.5
        assert g.x[0] == -4.0 and g.x[-1] == 3.5
        assert g.nyquist == pytest.approx(math.pi * 2)

    def test_momentum_budget(self):
        g = Grid2D(64, 32.0)
        g.check_momentum_budget(4.0)
        with pytest.raises(ValueError):
            g.check_momentum_budget(5.0)


class TestFactory:
    def test_ground_state(self, small_grid):
        psi = make_gaussian(small_grid, (0, 0), (0, 0), 1.0)
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)
        e = expectations(psi)
        assert e["kinetic"] == pytest.approx(0.5, abs=1e-6)
        np.testing.assert_allclose(e["mean_q"], 0, atol=1e-12)

    def test_displaced(self, small_grid):
        psi = make_gaussian(small_grid, (3, 0), (0, 0), 1.0)
        e = expectations(psi)
        np.testing.assert_allclose(e["mean_q"], (3, 0), atol=1e-8)
        d = decompose(PhasePoint((3, 0), (0, 0)))
        np.testing.assert_allclose(e["mean_c"], d.center, atol=1e-8)
        np.testing.assert_allclose(e["mean_v"], d.velocity, atol=1e-8)

    def test_margin(self, small_grid):
        with pytest.raises(ValueError):
            make_gaussian(small_grid, (12, 0), (0, 0), 1.0)

    def test_centered_grid(self):
        g = Grid2D(128, 32.0, (40.0, -20.0))
        p0 = (0.3 + 9.5, -0.2 + 20.5)
        psi = make_gaussian(g, (41.0, -19.0), p0, 1.0)
        e = expectations(psi)
        np.testing.assert_allclose(e["mean_q"], (41, -19), atol=1e-8)
        d = decompose(PhasePoint((41, -19), p0))
        np.testing.assert_allclose(e["mean_c"], d.center, atol=1e-8)
        np.testing.assert_allclose(e["mean_v"], d.velocity, atol=1e-8)

    def test_aliasing_rejected(self):
        g = Grid2D(128, 32.0, (40.0, -20.0))
        with pytest.raises(ValueError, match="aliases"):
            make_gaussian(g, (41.0, -19.0), (0.3, -0.2), 1.0)

    def test_coherent_state(self, small_grid):
        psi = landau_coherent_state(small_grid, (1.0, -2.0), (0.5, 0.5))
        e = expectations(psi)
        np.testing.assert_allclose(e["mean_c"], (1, -2), atol=1e-8)
        np.testing.assert_allclose(e["mean_v"], (0.5, 0.5), atol=1e-8)


class TestInner:
    def test_self(self, ground):
        assert inner(ground, ground) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        g = Grid2D(128, 64.0)
        a = make_gaussian(g, (-10, 0), (0, 0), 1.0)
        b = make_gaussian(g, (10, 0), (0, 0), 1.0)
        assert abs(inner(a, b)) <= 1e-12

    def test_sesquilinear(self, ground):
        assert inner(ground, ground.with_amplitudes(1j * ground.amplitudes)) == pytest.approx(1j, abs=1e-14)

    def test_grid_mismatch(self, ground):
        other = make_gaussian(Grid2D(64, 32.0), (0, 0), (0, 0), 1.0)
        with pytest.raises(ValueError):
            inner(ground, other)


class TestTranslations:
    def test_identity(self, ground):
        out = apply_phase_translation(ground, (0, 0), (0, 0), 0.0)
        np.testing.assert_array_equal(out.amplitudes, ground.amplitudes)

    def test_translation_moves_centroid(self):
        g = Grid2D(128, 32.0)
        psi = make_gaussian(g, (1.0, 0.5), (0, 0), 0.6)
        b = np.array([g.h, 0.0])
        out = apply_phase_translation(psi, (0, 0), b)
        np.testing.assert_allclose(expectations(out)["mean_q"], np.array([1.0, 0.5]) - b, atol=1e-8)

    def test_boost(self, small_grid, ground):
        k = 2 * math.pi / small_grid.extent * 3
        before = expectations(ground)
        after = expectations(apply_phase_translation(ground, (k, 0), (0, 0)))
        d_before = before["mean_v"] + 0.5 * np.array([-before["mean_q"][1], before["mean_q"][0]])
        d_after = after["mean_v"] + 0.5 * np.array([-after["mean_q"][1], after["mean_q"][0]])
        np.testing.assert_allclose(d_after - d_before, (k, 0), atol=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(-8, 8), st.integers(-8, 8), st.floats(-3, 3), st.floats(-3, 3))
    def test_weyl_relation(self, k1, k2, b1, b2):
        # boosts restricted to the torus lattice so e^{i<a,q>} is periodic
        g = Grid2D(64, 32.0)
        psi = make_gaussian(g, (0.5, -0.5), (0.2, 0.1), 1.0)
        a, b = 2 * math.pi / g.extent * np.array([k1, k2]), np.array([b1, b2])
        ab = apply_phase_translation(apply_phase_translation(psi, (0, 0), b), a, (0, 0))
        ba = apply_phase_translation(apply_phase_translation(psi, a, (0, 0)), (0, 0), b)
        # e^{i<b,D>} e^{i<a,q>} = e^{i<a,b>} e^{i<a,q>} e^{i<b,D>}
        np.testing.assert_allclose(ba.amplitudes, np.exp(1j * (a @ b)) * ab.amplitudes, atol=1e-9)

    def test_unitary(self, ground):
        out = apply_phase_translation(ground, (0.7, -0.3), (1.3, 2.1), 0.4)
        assert out.norm() == pytest.approx(1.0, abs=1e-13)


class TestRotation:
    def test_quarter_turns_exact(self, small_grid):
        psi = make_gaussian(small_grid, (3, 1), (0, 0), 1.0)
        out = WaveFunction(small_grid, rotate_array(psi.amplitudes, small_grid, math.pi / 2))
        np.testing.assert_allclose(expectations(out)["mean_q"], (-1, 3), atol=1e-12)

    def test_general_angle(self, small_grid):
        psi = make_gaussian(small_grid, (3, 1), (0, 0), 1.0)
        th = 0.3
        out = WaveFunction(small_grid, rotate_array(psi.amplitudes, small_grid, th))
        expect = (3 * math.cos(th) - math.sin(th), 3 * math.sin(th) + math.cos(th))
        np.testing.assert_allclose(expectations(out)["mean_q"], expect, atol=1e-9)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    def test_round_trip(self, small_grid):
        psi = make_gaussian(small_grid, (2, -1), (0.3, 0.3), 1.0)
        a = rotate_array(rotate_array(psi.amplitudes, small_grid, 1.1), small_grid, -1.1)
        np.testing.assert_allclose(a, psi.amplitudes, atol=1e-12)


def test_parseval(small_grid):
    psi = make_gaussian(small_grid, (1, 2), (0.4, -0.6), 1.3)
    pos, mom = parseval_norms(psi)
    assert pos == pytest.approx(mom, abs=1e-12)


class TestDump:
    def test_round_trip(self, tmp_path):
        g = Grid2D(32, 16.0, (1.5, -2.0))
        psi = make_gaussian(g, (1.5, -2.0), (0.3, 0.1), 1.0)
        path = tmp_path / "state.bin"
        dump_state(psi, path)
        raw = path.read_bytes()
        assert len(raw) == 32 + 16 * 32 * 32
        assert raw[:4] == b"CYRS"
        magic, n, L, cx, cy = DUMP_HEADER.unpack_from(raw)
        assert (n, L, cx, cy) == (32, 16.0, 1.5, -2.0)
        assert struct.unpack_from("<d", raw, 32)[0] == psi.amplitudes[0, 0].real
        back = load_state(path)
        assert back.grid == g
        np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + bytes(28))
        with pytest.raises(ValueError):
            load_state(path)
