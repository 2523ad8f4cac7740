import numpy as np
import pytest

from singpde import (
    GridFunction,
    RadonMeasure,
    build_grid,
    constant,
    gaussian_bump,
    mollify,
    pair,
    sample_field,
    scale_measure,
    total_variation,
    weak_convergence_check,
)


def delta(x, mass=1.0):
    return RadonMeasure(atoms=(((x,), mass),))


def test_total_variation_examples():
    assert total_variation(delta(0.5)) == 1.0
    assert total_variation(RadonMeasure(density=constant(2.0))) == pytest.approx(2.0)
    mixed = RadonMeasure(
        atoms=(((0.25,), 0.5), ((0.75,), 0.5)), density=constant(1.0)
    )
    assert total_variation(mixed) == pytest.approx(2.0)


def test_total_variation_gaussian_density_quadrature():
    mu = RadonMeasure(density=gaussian_bump((0.5,), 0.05, 1.0))
    exact = np.sqrt(2 * np.pi) * 0.05  # full-line integral; tails are negligible
    assert total_variation(mu, dim=1) == pytest.approx(exact, rel=1e-6)


def test_measure_rejects_negative_mass_and_outside_atoms():
    with pytest.raises(ValueError):
        RadonMeasure(atoms=(((0.5,), -1.0),))
    with pytest.raises(ValueError):
        RadonMeasure(atoms=(((1.5,), 1.0),))
    with pytest.raises(ValueError):
        RadonMeasure(atoms=(((0.0,), 1.0),))


def test_total_variation_rejects_negative_density():
    mu = RadonMeasure(density=constant(0.0))
    object.__setattr__(mu, "density", constant(-1.0))
    with pytest.raises(ValueError):
        total_variation(mu)


def test_mollify_delta_mass_and_support():
    g = build_grid(1, 64)
    mud = mollify(delta(0.5), g, 1024)
    assert mud.discrete_mass == pytest.approx(1.0, abs=1e-3)
    width = max(g.spacing, 1.0 / 1024)
    x = g.node_coords[:, 0]
    outside = np.abs(x - 0.5) > width + 1e-12
    assert np.all(mud.values.values[outside] == 0.0)
    assert not mud.boundary_clipped


def test_mollify_zero_measure():
    g = build_grid(2, 8)
    mud = mollify(RadonMeasure(), g, 4)
    assert np.all(mud.values.values == 0.0)


def test_mollify_constant_density_samples_exactly():
    g = build_grid(2, 8)
    mud = mollify(RadonMeasure(density=constant(1.0)), g, 16)
    assert np.all(mud.values.values == 1.0)


def test_mollify_nonnegative_and_mass_conserving_across_levels():
    g = build_grid(2, 16)
    mu = RadonMeasure(atoms=(((0.4, 0.6), 2.5),))
    for n in (1, 2, 8, 64, 1024):
        mud = mollify(mu, g, n)
        assert np.all(mud.values.values >= 0.0)
        assert abs(mud.discrete_mass - 2.5) <= 0.05 * 2.5


def test_mollify_boundary_atom_clips_and_keeps_mass():
    g = build_grid(1, 16)
    mud = mollify(delta(0.01), g, 16)
    assert mud.boundary_clipped
    assert mud.discrete_mass == pytest.approx(1.0, abs=1e-12)


def test_mollify_corner_atom_nearest_node_fallback():
    g = build_grid(3, 8)
    mu = RadonMeasure(atoms=(((0.02, 0.02, 0.02), 1.0),))
    mud = mollify(mu, g, 10**6)  # width = spacing; no node inside the kernel
    assert mud.boundary_clipped
    assert mud.discrete_mass == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(mud.values.values) == 1


def test_mollify_rejects_bad_level():
    g = build_grid(1, 8)
    with pytest.raises(ValueError):
        mollify(delta(0.5), g, 0)


def test_pair_delta_against_parabola():
    g = build_grid(1, 128)
    mud = mollify(delta(0.5), g, 128)
    phi = sample_field(g, lambda p: p[:, 0] * (1 - p[:, 0]))
    assert pair(mud, phi) == pytest.approx(0.25, abs=1e-2)


def test_pair_zero_test_function():
    g = build_grid(1, 16)
    mud = mollify(delta(0.5), g, 16)
    assert pair(mud, GridFunction(g, np.zeros(g.interior_count))) == 0.0


def test_pair_density_against_one_is_box_volume():
    g = build_grid(2, 32)
    mud = mollify(RadonMeasure(density=constant(1.0)), g, 32)
    phi = GridFunction(g, np.ones(g.interior_count))
    assert pair(mud, phi) == pytest.approx(1.0, abs=0.07)


def test_pair_rejects_grid_mismatch():
    mud = mollify(delta(0.5), build_grid(1, 16), 16)
    phi = GridFunction(build_grid(1, 32), np.zeros(31))
    with pytest.raises(ValueError):
        pair(mud, phi)


def test_pair_is_bilinear():
    rng = np.random.default_rng(3)
    g = build_grid(1, 32)
    mud = mollify(RadonMeasure(atoms=(((0.3,), 1.0),), density=constant(0.5)), g, 32)
    phi = GridFunction(g, rng.uniform(-1, 1, g.interior_count))
    psi = GridFunction(g, rng.uniform(-1, 1, g.interior_count))
    combo = GridFunction(g, 2.0 * phi.values - 3.0 * psi.values)
    lhs = pair(mud, combo)
    rhs = 2.0 * pair(mud, phi) - 3.0 * pair(mud, psi)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    doubled = mollify(scale_measure(RadonMeasure(atoms=(((0.3,), 1.0),), density=constant(0.5)), 2.0), g, 32)
    assert pair(doubled, phi) == pytest.approx(2.0 * pair(mud, phi), abs=1e-12)


def test_weak_convergence_delta_on_parabola():
    grids = [build_grid(1, 2 ** (j + 1)) for j in range(7)]  # up to cells=128
    report = weak_convergence_check(
        delta(0.5), grids, [lambda p: p[:, 0] * (1 - p[:, 0])]
    )
    trace = report.traces[0]
    assert trace.exact == pytest.approx(0.25)
    assert trace.gaps[-1] <= 1e-2


def test_weak_convergence_off_node_atom_gaps_shrink():
    grids = [build_grid(1, 2 ** (j + 1)) for j in range(7)]
    report = weak_convergence_check(
        delta(0.3), grids, [lambda p: np.sin(np.pi * p[:, 0])]
    )
    trace = report.traces[0]
    assert trace.gaps[-1] <= 1e-2
    assert trace.gaps[-1] < trace.gaps[0]


def test_weak_convergence_zero_measure():
    grids = [build_grid(1, 4), build_grid(1, 8)]
    report = weak_convergence_check(RadonMeasure(), grids, [lambda p: p[:, 0]])
    assert all(p == 0.0 for p in report.traces[0].pairings)


def test_weak_convergence_density_linear_functional():
    grids = [build_grid(1, 2 ** (j + 1)) for j in range(7)]
    report = weak_convergence_check(
        RadonMeasure(density=constant(1.0)), grids, [lambda p: p[:, 0]]
    )
    trace = report.traces[0]
    assert trace.exact == pytest.approx(0.5)
    assert trace.pairings[-1] == pytest.approx(0.5, abs=1e-2)


def test_scale_measure_scales_total_variation():
    mu = RadonMeasure(atoms=(((0.5,), 1.5),), density=constant(0.5))
    assert total_variation(scale_measure(mu, 2.0)) == pytest.approx(
        2.0 * total_variation(mu)
    )
    with pytest.raises(ValueError):
        scale_measure(mu, -1.0)
