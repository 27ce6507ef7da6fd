import numpy as np
import pytest

from fracpme.field import (Field, FieldKind, Grid, ModelParams, Topology, cumulative,
                           field_from_csv, gradient, mass, write_field_csv)


class TestGrid:
    def test_centers_reconstructible(self):
        g = Grid(n=16, h=0.25, x_left=-2.0)
        assert np.array_equal(g.x, -2.0 + (np.arange(16) + 0.5) * 0.25)
        assert g.x_right == 2.0

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            Grid(n=4, h=0.1, x_left=0.0)

    def test_periodic_power_of_two(self):
        with pytest.raises(ValueError):
            Grid(n=12, h=0.1, x_left=0.0, topology=Topology.PERIODIC)
        Grid(n=16, h=0.1, x_left=0.0, topology=Topology.PERIODIC)

    def test_centered_constructor(self):
        g = Grid.centered(64, 5.0)
        assert g.x_left == -5.0 and abs(g.x_right - 5.0) < 1e-15


class TestField:
    def test_density_nonnegative(self):
        g = Grid.centered(8, 1.0)
        with pytest.raises(ValueError):
            Field(g, -np.ones(8), FieldKind.DENSITY)

    def test_length_checked(self):
        g = Grid.centered(8, 1.0)
        with pytest.raises(ValueError):
            Field(g, np.zeros(7))

    def test_integrated_monotone(self):
        g = Grid.centered(8, 1.0)
        with pytest.raises(ValueError):
            Field(g, np.array([0, 1, 0.5, 2, 3, 4, 5, 6.0]), FieldKind.INTEGRATED)

    def test_values_immutable(self):
        g = Grid.centered(8, 1.0)
        f = Field(g, np.ones(8))
        with pytest.raises(ValueError):
            f.values[0] = 2.0


class TestGradient:
    def test_constant_is_zero(self):
        g = Grid.centered(32, 1.0)
        out = gradient(Field(g, np.full(32, 5.0), FieldKind.PRESSURE))
        assert np.all(out.values == 0.0)

    def test_affine_exact_interior(self):
        g = Grid.centered(32, np.pi, Topology.PERIODIC)
        out = gradient(Field(g, 3.0 * g.x, FieldKind.PRESSURE))
        assert np.allclose(out.values[1:-1], 3.0, atol=1e-13)

    def test_second_order_on_sine(self):
        errs = []
        for n in (2048, 4096):
            g = Grid.centered(n, np.pi, Topology.PERIODIC)
            out = gradient(Field(g, np.sin(g.x), FieldKind.PRESSURE))
            errs.append(np.max(np.abs(out.values - np.cos(g.x))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_linearity(self):
        g = Grid.centered(64, 2.0)
        rng = np.random.default_rng(1)
        f = rng.standard_normal(64)
        w = rng.standard_normal(64)
        lhs = gradient(Field(g, 2.0 * f + 3.0 * w, FieldKind.PRESSURE)).values
        rhs = 2.0 * gradient(Field(g, f, FieldKind.PRESSURE)).values \
            + 3.0 * gradient(Field(g, w, FieldKind.PRESSURE)).values
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestMass:
    def test_zero(self):
        g = Grid.centered(8, 1.0)
        assert mass(Field(g, np.zeros(8))) == 0.0

    def test_indicator_exact(self):
        g = Grid.centered(64, 4.0)
        vals = np.zeros(64)
        vals[10:17] = 2.5
        assert mass(Field(g, vals)) == pytest.approx(2.5 * 7 * g.h, abs=1e-15)

    def test_gaussian_unit_mass(self):
        g = Grid.centered(4096, 20.0)
        vals = np.exp(-g.x**2 / 2.0) / np.sqrt(2.0 * np.pi)
        assert mass(Field(g, vals)) == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self):
        g = Grid.centered(16, 1.0)
        rng = np.random.default_rng(2)
        u = rng.random(16)
        w = u + rng.random(16)
        assert mass(Field(g, w)) >= mass(Field(g, u))

    def test_kind_checked(self):
        g = Grid.centered(8, 1.0)
        with pytest.raises(ValueError):
            mass(Field(g, np.zeros(8), FieldKind.PRESSURE))


class TestCumulative:
    def test_zero(self):
        g = Grid.centered(8, 1.0)
        v = cumulative(Field(g, np.zeros(8)))
        assert np.all(v.values == 0.0) and v.kind is FieldKind.INTEGRATED

    def test_box_ramp(self):
        g = Grid.centered(256, 4.0)
        vals = np.where(np.abs(g.x) <= 1.0, 0.5, 0.0)
        v = cumulative(Field(g, vals))
        assert v.values[-1] == pytest.approx(mass(Field(g, vals)), abs=1e-15)
        i = np.argmin(np.abs(g.x - 1.5))
        assert v.values[i] == pytest.approx(1.0, abs=0.05)

    def test_total_equals_mass_exactly(self):
        g = Grid.centered(64, 2.0)
        rng = np.random.default_rng(3)
        u = Field(g, rng.random(64))
        v = cumulative(u)
        assert np.all(np.diff(v.values) >= 0)
        assert v.values[-1] == pytest.approx(mass(u), rel=1e-15)

    def test_periodic_rejected(self):
        g = Grid.centered(16, 1.0, Topology.PERIODIC)
        with pytest.raises(ValueError):
            cumulative(Field(g, np.ones(16)))

    def test_derivative_recovers_density(self):
        # gradient(cumulative(u)) ~ u with O(h) error on smooth data
        g = Grid.centered(2048, 10.0)
        u = np.exp(-g.x**2)
        v = cumulative(Field(g, u))
        rec = gradient(v).values
        assert np.max(np.abs(rec[1:-1] - u[1:-1])) < 5.0 * g.h


class TestModelParams:
    def test_alpha_relation(self):
        p = ModelParams(m=1.5, s=0.25)
        assert p.alpha == 0.75

    @pytest.mark.parametrize("kw", [dict(m=0.5, s=0.25), dict(m=2.0, s=0.0),
                                    dict(m=2.0, s=1.0), dict(m=2.0, s=0.5, delta=-1.0),
                                    dict(m=2.0, s=0.5, R=0.0)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


def test_csv_roundtrip_bit_exact(tmp_path):
    g = Grid.centered(64, 3.0)
    rng = np.random.default_rng(4)
    f = Field(g, rng.random(64) * 1e-7)
    path = tmp_path / "field.csv"
    write_field_csv(f, path)
    back = field_from_csv(g, path)
    assert np.array_equal(back.values, f.values)


def test_csv_grid_mismatch(tmp_path):
    g = Grid.centered(64, 3.0)
    write_field_csv(Field(g, np.zeros(64)), tmp_path / "f.csv")
    other = Grid.centered(64, 4.0)
    with pytest.raises(ValueError):
        field_from_csv(other, tmp_path / "f.csv")
