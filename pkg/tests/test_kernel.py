import numpy as np
import pytest

from cmsynth.errors import GeometryError, SolverError
from cmsynth.geometry import (C0, ETA0, Arm, GroundPlane, Segment, WireGeometry,
                              build_dipole, build_dipole_pair)
from cmsynth.kernel import (CutSpec, arm_field, assemble_impedance, extract_block,
                            port_drive_solve, radiate, radiated_power,
                            reflected_waves)

import emf_oracle

F0 = C0  # wavelength 1 m


# -- closed-form field vs potential-theory quadrature ---------------------------


def _numeric_field(p0, p1, a_coef, b_coef, k, robs, n=20001):
    """E = -jwA - grad(Phi) by brute-force quadrature and finite differences."""
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    length = np.linalg.norm(p1 - p0)
    d = (p1 - p0) / length
    w = k * C0
    mu = 4e-7 * np.pi
    eps = 1.0 / (mu * C0**2)
    s = np.linspace(0.0, length, n)
    wgt = np.full(n, s[1] - s[0])
    wgt[0] *= 0.5
    wgt[-1] *= 0.5
    pts = p0[None, :] + np.outer(s, d)
    cur = a_coef * np.sin(k * s) + b_coef * np.cos(k * s)
    cur_p = k * (a_coef * np.cos(k * s) - b_coef * np.sin(k * s))

    def green(r):
        dist = np.linalg.norm(pts - r[None, :], axis=1)
        return np.exp(-1j * k * dist) / dist

    def vector_potential(r):
        return mu / (4 * np.pi) * np.sum(cur * wgt * green(r)) * d

    def scalar_potential(r):
        line = np.sum((-cur_p / (1j * w)) * wgt * green(r))
        r_end = np.linalg.norm(pts[-1] - r)
        r_start = np.linalg.norm(pts[0] - r)
        ends = (cur[-1] / (1j * w)) * np.exp(-1j * k * r_end) / r_end
        ends -= (cur[0] / (1j * w)) * np.exp(-1j * k * r_start) / r_start
        return (line + ends) / (4 * np.pi * eps)

    out = np.zeros((len(robs), 3), dtype=complex)
    h = 1e-6
    for i, r in enumerate(np.atleast_2d(robs).astype(float)):
        grad = np.zeros(3, dtype=complex)
        for ax in range(3):
            dr = np.zeros(3)
            dr[ax] = h
            grad[ax] = (scalar_potential(r + dr) - scalar_potential(r - dr)) / (2 * h)
        out[i] = -1j * w * vector_potential(r) - grad
    return out


def test_arm_field_matches_potential_theory():
    k = 2 * np.pi
    p0 = np.array([0.05, -0.02, 0.10])
    p1 = np.array([0.02, 0.08, 0.38])
    rng = np.random.default_rng(11)
    robs = rng.normal(scale=0.4, size=(4, 3)) + np.array([0.3, 0.2, 0.2])
    for rising in (True, False):
        arm = Arm(p0, p1, 1e-9, rising=rising)
        got = arm_field(arm, k, robs)
        length = arm.length
        slk = np.sin(k * length)
        if rising:
            a_coef, b_coef = 1.0 / slk, 0.0
        else:
            a_coef, b_coef = -np.cos(k * length) / slk, 1.0
        want = _numeric_field(p0, p1, a_coef, b_coef, k, robs)
        err = np.abs(got - want).max() / np.abs(want).max()
        assert err < 1e-6


def test_image_cancels_tangential_field_on_plane():
    k = 2 * np.pi
    plane = GroundPlane(origin=(0, 0, 0), normal=(0, 0, 1))
    arm = Arm(np.array([0.1, 0.0, 0.2]), np.array([0.25, 0.1, 0.45]), 1e-9, True)
    image = arm.mirrored(plane)
    pts = np.array([[0.3, 0.1, 0.0], [-0.2, 0.4, 0.0], [0.05, -0.3, 0.0]])
    total = arm_field(arm, k, pts) + arm_field(image, k, pts)
    tangential = np.abs(total[:, :2]).max()
    assert tangential < 1e-10 * np.abs(total).max()


# -- impedance matrix contracts ---------------------------------------------------


def test_symmetry_and_passivity(dipole_setup):
    _, zmat = dipole_setup
    z = zmat.entries
    assert np.linalg.norm(z - z.T) == 0.0
    r = z.real
    eigs = np.linalg.eigvalsh(0.5 * (r + r.T))
    assert eigs.min() > -1e-9 * np.linalg.norm(r, 2)


def test_sinusoid_self_impedance_matches_emf_oracle():
    # a two-segment dipole carries exactly the sinusoidal current the
    # induced-EMF formulas assume; the reaction must reproduce them closely
    h = 0.25
    segs = [Segment((0, 0, -h), (0, 0, 0), 1e-3, 0),
            Segment((0, 0, 0), (0, 0, h), 1e-3, 0)]
    geom = WireGeometry(segs, [(0, 0)])
    zmat = assemble_impedance(geom, F0)
    want = emf_oracle.self_impedance(0.5, 1e-3, 1.0)
    assert abs(zmat.entries[0, 0] - want) / abs(want) < 0.01


@pytest.mark.parametrize("separation", [0.1, 0.5, 1.0, 2.0])
def test_sinusoid_mutual_impedance_matches_emf_oracle(separation):
    h = 0.25
    segs = [Segment((0, 0, -h), (0, 0, 0), 1e-3, 0),
            Segment((0, 0, 0), (0, 0, h), 1e-3, 0),
            Segment((0, separation, -h), (0, separation, 0), 1e-3, 1),
            Segment((0, separation, 0), (0, separation, h), 1e-3, 1)]
    geom = WireGeometry(segs)
    zmat = assemble_impedance(geom, F0)
    want = emf_oracle.mutual_impedance_halfwave(separation, 1.0)
    assert abs(zmat.entries[0, 1] - want) / abs(want) < 5e-3


def test_deltagap_impedance_near_sinusoid_value(dipole_setup):
    # the fine-mesh feed current is not the ideal sinusoid; near resonance
    # the two impedances genuinely differ by 11-14 percent, so this guards
    # the envelope while the reaction-level tests above pin the kernel itself
    geom, zmat = dipole_setup
    currents = port_drive_solve(zmat, geom.port_basis_indices, [1.0], 50.0)
    p = geom.port_basis_indices[0]
    v_oc = 2.0 * np.sqrt(50.0)
    z_in = (v_oc - 50.0 * currents[p]) / currents[p]
    want = emf_oracle.self_impedance(0.47, 1e-3, 1.0)
    assert abs(z_in - want) / abs(want) < 0.15


def test_mesh_convergence(f0):
    z_in = {}
    for nseg in (10, 20):
        geom = build_dipole(f0, length_wl=0.47, n_segments=nseg)
        zmat = assemble_impedance(geom, f0)
        p = geom.port_basis_indices[0]
        currents = port_drive_solve(zmat, [p], [1.0], 50.0)
        v_oc = 2.0 * np.sqrt(50.0)
        z_in[nseg] = (v_oc - 50.0 * currents[p]) / currents[p]
    assert abs(z_in[20] - z_in[10]) / abs(z_in[10]) < 0.05


def test_distant_mutual_block_decays(f0):
    geom = build_dipole_pair(f0, spacing_wl=10.0, n_segments=10)
    zmat = assemble_impedance(geom, f0)
    z11 = extract_block(zmat, 0, 0).entries
    z12 = extract_block(zmat, 0, 1).entries
    assert np.linalg.norm(z12) < 0.01 * np.linalg.norm(z11)


def test_extract_block_identities(pair_setup, f0):
    geom, zmat = pair_setup
    z11 = extract_block(zmat, 0, 0)
    z12 = extract_block(zmat, 0, 1)
    z21 = extract_block(zmat, 1, 0)
    assert np.array_equal(z12.entries, z21.entries.T)
    assert z12.block_index == (0, 1)
    # the self block equals the isolated assembly of that element alone
    alone = assemble_impedance(geom.sub_geometry(0), f0)
    assert np.allclose(z11.entries, alone.entries, rtol=0, atol=1e-10)
    with pytest.raises(IndexError):
        extract_block(zmat, 0, 5)


def test_extract_block_single_element(dipole_setup):
    _, zmat = dipole_setup
    assert np.array_equal(extract_block(zmat, 0, 0).entries, zmat.entries)


# -- port excitation ---------------------------------------------------------------


def test_zero_drive_zero_current(dipole_setup):
    geom, zmat = dipole_setup
    currents = port_drive_solve(zmat, geom.port_basis_indices, [0.0], 50.0)
    assert np.abs(currents).max() == 0.0


def test_passivity_of_reflection(dipole_setup):
    geom, zmat = dipole_setup
    currents = port_drive_solve(zmat, geom.port_basis_indices, [1.0], 50.0)
    w = reflected_waves(currents, geom.port_basis_indices, [1.0], 50.0)
    assert abs(w[0]) <= 1.0


def test_symmetric_drive_symmetric_currents(pair_setup):
    geom, zmat = pair_setup
    currents = port_drive_solve(zmat, geom.port_basis_indices, [1.0, 1.0], 50.0)
    half = zmat.n // 2
    assert np.abs(currents[:half] - currents[half:]).max() < 1e-9 * np.abs(currents).max()


def test_singular_loaded_matrix_raises():
    z = np.diag([-50.0 + 0j, 1.0])
    with pytest.raises(SolverError, match="condition"):
        port_drive_solve(z, [0], [1.0], 50.0)


def test_drive_dimension_mismatch(dipole_setup):
    geom, zmat = dipole_setup
    with pytest.raises(SolverError):
        port_drive_solve(zmat, geom.port_basis_indices, [1.0, 2.0], 50.0)


# -- radiation ----------------------------------------------------------------------


def test_pure_theta_polarization(dipole_setup, f0):
    geom, zmat = dipole_setup
    currents = port_drive_solve(zmat, geom.port_basis_indices, [1.0], 50.0)
    cut = radiate(currents, geom, f0, CutSpec(phi_deg=0.0, theta_start_deg=10.0,
                                              theta_stop_deg=170.0, n_theta=33))
    assert np.abs(cut.e_phi).max() <= 1e-10 * np.abs(cut.e_theta).max()


def test_pattern_factor_matches_analytic(f0):
    geom = build_dipole(f0, length_wl=0.5, n_segments=30)
    zmat = assemble_impedance(geom, f0)
    currents = port_drive_solve(zmat, geom.port_basis_indices, [1.0], 50.0)
    cut = radiate(currents, geom, f0, CutSpec(phi_deg=0.0, theta_start_deg=30.0,
                                              theta_stop_deg=90.0, n_theta=3))
    got = abs(cut.e_theta[0]) / abs(cut.e_theta[2])
    want = (emf_oracle.pattern_factor(np.deg2rad(30.0), 0.5, 1.0)
            / emf_oracle.pattern_factor(np.deg2rad(90.0), 0.5, 1.0))
    assert abs(got / want - 1.0) < 0.02


def test_radiate_superposition(dipole_setup, f0):
    geom, _ = dipole_setup
    rng = np.random.default_rng(3)
    i1 = rng.standard_normal(geom.n_basis) + 1j * rng.standard_normal(geom.n_basis)
    i2 = rng.standard_normal(geom.n_basis) + 1j * rng.standard_normal(geom.n_basis)
    cut = CutSpec(phi_deg=40.0, n_theta=19)
    both = radiate(i1 + i2, geom, f0, cut)
    one = radiate(i1, geom, f0, cut)
    two = radiate(i2, geom, f0, cut)
    assert np.abs(both.e_theta - one.e_theta - two.e_theta).max() < 1e-12 * np.abs(both.e_theta).max()
    assert np.abs(both.e_phi - one.e_phi - two.e_phi).max() < 1e-12 * np.abs(both.e_theta).max()


def test_power_balance_random_current(dipole_setup, f0):
    geom, zmat = dipole_setup
    rng = np.random.default_rng(5)
    cur = rng.standard_normal(geom.n_basis) + 1j * rng.standard_normal(geom.n_basis)
    p_far = radiated_power(cur, geom, f0)
    p_circ = 0.5 * np.real(np.conj(cur) @ (zmat.entries @ cur))
    assert abs(p_far - p_circ) / p_circ < 0.02


def test_frequency_must_be_positive(dipole_setup):
    geom, _ = dipole_setup
    with pytest.raises(GeometryError):
        assemble_impedance(geom, -1.0)


def test_segment_near_half_wave_rejected(f0):
    geom = WireGeometry([Segment((0, 0, 0), (0, 0, 0.5), 1e-3, 0),
                         Segment((0, 0, 0.5), (0, 0, 1.0), 1e-3, 0)])
    with pytest.raises(GeometryError, match="half"):
        assemble_impedance(geom, f0)


def test_cut_validation():
    with pytest.raises(GeometryError):
        from cmsynth.kernel import FarFieldCut
        FarFieldCut(0.0, np.array([0.0, 0.0, 1.0]), np.zeros(3, complex),
                    np.zeros(3, complex), F0)


def test_current_dimension_mismatch(dipole_setup, f0):
    geom, _ = dipole_setup
    with pytest.raises(SolverError):
        radiate(np.zeros(3, complex), geom, f0, CutSpec())


def test_ground_plane_image_doubles_broadside(f0):
    # a vertical quarter-wave wire over a plane radiates like the full dipole
    plane = GroundPlane(origin=(0, 0, 0), normal=(0, 0, 1))
    segs = [Segment((0, 0, 0.002 + 0.047 * i), (0, 0, 0.002 + 0.047 * (i + 1)),
                    5e-4, 0) for i in range(5)]
    geom = WireGeometry(segs, [], plane)
    zmat = assemble_impedance(geom, f0)
    # image contribution must change the matrix relative to free space
    free = WireGeometry(segs, [])
    zfree = assemble_impedance(free, f0)
    assert np.linalg.norm(zmat.entries - zfree.entries) > 1e-3 * np.linalg.norm(zfree.entries)
