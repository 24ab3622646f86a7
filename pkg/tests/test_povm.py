import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentpovm.errors import (
    IncompleteFamilyError,
    InvalidInputError,
    PositivityError,
    UnderdeterminedError,
)
from momentpovm.povm import (
    CellGrid,
    CombinationTable,
    ConsistentFamily,
    GridPOVM,
    compress_povm,
    consistency_check,
    decompose_check,
    dilation_residuals,
    family_to_povm,
    halfline_momentum_measures,
    halfline_momentum_povm,
    induced_family,
    is_pvm,
    naimark_dilate,
    povm_integral_operator,
    probe_closure,
    random_povm,
    seminorm_polarization,
    spectral_pvm,
    validate_povm,
)

GRID2 = CellGrid([0.0], [-1.0, 1.0])
PVM2 = GridPOVM(GRID2, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])


def seeds():
    return st.integers(0, 2**32 - 1)


# ---- grid

def test_grid_tail_representatives():
    g = CellGrid.from_boundaries([0.0, 1.0, 3.0])
    assert g.M == 4
    assert np.allclose(g.representatives, [-1.5, 0.5, 2.0, 4.5])  # median width 1.5


def test_grid_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        CellGrid([1.0, 0.0], [0, 0.5, 2])
    with pytest.raises(InvalidInputError):
        CellGrid([0.0], [0.5, 1.0])  # representative outside its cell
    with pytest.raises(InvalidInputError):
        CellGrid([0.0], [-1.0])


def test_cells_are_right_closed():
    g = CellGrid([0.0, 1.0], [-1, 0.5, 2])
    assert list(g.cell_of([0.0, 1e-12, 1.0, 1.5])) == [0, 1, 1, 2]


# ---- validation

def test_validate_examples():
    assert validate_povm(PVM2).ok
    assert validate_povm(GridPOVM(GRID2, [0.5 * np.eye(2), 0.5 * np.eye(2)])).ok
    bad = validate_povm(GridPOVM(GRID2, [np.diag([1.0, 0.0]), np.diag([0.1, 1.0])]))
    assert not bad.ok and bad.sum_defect == pytest.approx(0.1)


def test_validate_detects_negative_effect():
    q = GridPOVM(GRID2, [np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])])
    r = validate_povm(q)
    assert not r.ok and r.worst_eig < 0


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        GridPOVM(GRID2, [np.eye(2)])
    with pytest.raises(InvalidInputError):
        GridPOVM(GRID2, np.zeros((2, 2, 3)))


def test_json_round_trip():
    q = random_povm(3, 4, np.random.default_rng(1))
    back = GridPOVM.from_json(q.to_json())
    assert np.array_equal(back.effects, q.effects)
    assert np.array_equal(back.grid.boundaries, q.grid.boundaries)
    with pytest.raises(InvalidInputError):
        GridPOVM.from_json({"boundaries": [0.0]})


# ---- dilation

def test_dilate_pvm_block_structure():
    dil = naimark_dilate(PVM2)
    for i, Q in enumerate(PVM2.effects):
        assert np.array_equal(dil.compress(i), Q)
    assert np.array_equal(dil.isometry, np.vstack(PVM2.effects))


def test_dilate_scalar():
    q = GridPOVM(GRID2, [[[0.5]], [[0.5]]])
    dil = naimark_dilate(q)
    assert np.allclose(dil.isometry[:, 0], [1 / math.sqrt(2)] * 2)
    assert dil.compress(0)[0, 0] == pytest.approx(0.5)


def test_dilate_random_d3():
    q = random_povm(3, 4, np.random.default_rng(7))
    assert max(dilation_residuals(q, naimark_dilate(q)).values()) <= 1e-12


def test_dilate_indefinite_effect():
    q = GridPOVM(GRID2, [np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])])
    with pytest.raises(PositivityError):
        naimark_dilate(q)


@given(seeds(), st.integers(1, 8), st.integers(2, 16))
def test_dilation_law(seed, d, M):
    q = random_povm(d, M, np.random.default_rng(seed))
    assert max(dilation_residuals(q, naimark_dilate(q)).values()) <= 1e-12


# ---- integral operator and decomposition

def test_integral_operator_examples():
    assert np.allclose(povm_integral_operator(PVM2), np.diag([-1, 1]))
    assert povm_integral_operator(GridPOVM(GRID2, [[[0.5]], [[0.5]]]))[0, 0] == 0


def test_integral_operator_through_dilation():
    q = random_povm(4, 6, np.random.default_rng(3))
    dil = naimark_dilate(q)
    big = np.tensordot(q.grid.representatives, dil.blocks, axes=1)
    assert np.max(np.abs(dil.isometry.conj().T @ big @ dil.isometry - povm_integral_operator(q))) <= 1e-12


def test_decompose_examples():
    A = np.diag([-1.0, 0.0, 1.0])
    q = spectral_pvm(A, CellGrid([-0.5, 0.5], [-1.0, 0.0, 1.0]))
    assert decompose_check(q, A, 3)
    shifted = GridPOVM(CellGrid([-0.5, 0.5], [-0.5, 0.25, 1.5]), q.effects)
    assert not decompose_check(shifted, A, 3)
    B = np.diag([-1.0, 1.0, 2.0, 3.0])
    full = spectral_pvm(B, CellGrid([0.0, 1.5, 2.5], [-1.0, 1.0, 2.0, 3.0]))
    block = compress_povm(full, np.eye(4)[:, :2])
    assert decompose_check(block, B[:2, :2], 2)


@given(seeds(), st.integers(2, 5))
def test_perturbed_pvm_no_longer_decomposes(seed, d):
    rng = np.random.default_rng(seed)
    eig = np.sort(rng.uniform(-3, 3, d)) + np.arange(d)  # distinct
    U, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    A = U @ np.diag(eig) @ U.conj().T
    bounds = (eig[:-1] + eig[1:]) / 2
    q = spectral_pvm(A, CellGrid(bounds, eig))
    assert decompose_check(q, A, d)
    D = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    D = D + D.conj().T
    D *= 1e-3 / np.linalg.norm(D, 2)
    i, j = rng.choice(d, 2, replace=False)
    eff = q.effects.copy()
    eff[i] += D
    eff[j] -= D  # normalization preserved
    assert not decompose_check(GridPOVM(q.grid, eff), A, d)


# ---- families

def test_induced_examples():
    rng = np.random.default_rng(5)
    q = random_povm(3, 5, rng)
    f = induced_family(q, [np.zeros(3), [1, 2j, 0]], ["zero", "b"])
    assert np.all(f.measure("zero") == 0)
    assert f.measure("b").sum() == pytest.approx(5.0)
    g = induced_family(PVM2, [[0, 1]])
    assert list(g.measures[0]) == [0, 1]


def test_induced_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        induced_family(PVM2, [[1, 0, 0]])


def test_consistency_examples():
    rng = np.random.default_rng(11)
    q = random_povm(3, 4, rng)
    probes = probe_closure(rng.normal(size=(3, 3)))
    f = induced_family(q, probes)
    assert consistency_check(f).ok
    m = f.measures.copy()
    m[5, 2] += 0.1
    assert not consistency_check(f.with_measures(m)).ok
    pf = induced_family(PVM2, probe_closure(np.eye(2)))
    assert consistency_check(pf).ok


def test_consistency_needs_table_entries():
    f = induced_family(PVM2, [[1, 0]], ["b"])
    with pytest.raises(IncompleteFamilyError):
        consistency_check(f, CombinationTable(parallelograms=(("b", "c", "b+c", "b-c"),)))
    with pytest.raises(IncompleteFamilyError):
        consistency_check(f)


def test_family_round_trip_and_json():
    rng = np.random.default_rng(2)
    q = random_povm(4, 6, rng)
    f = induced_family(q, probe_closure(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))))
    back = ConsistentFamily.from_json(f.to_json())
    assert np.max(np.abs(family_to_povm(back).effects - q.effects)) <= 1e-10
    assert f.to_csv().splitlines()[0].startswith("label,cell_0")


def test_family_from_pvm_is_idempotent():
    f = induced_family(PVM2, probe_closure(np.array([[1, 1], [1, -1]]) / math.sqrt(2)))
    q = family_to_povm(f)
    assert is_pvm(q, 1e-10)
    assert np.allclose(q.effects, PVM2.effects, atol=1e-10)


def test_family_scalar_case():
    q = GridPOVM(CellGrid.from_boundaries([0.0, 1.0]), [[[0.2]], [[0.5]], [[0.3]]])
    f = induced_family(q, probe_closure([[2.0]]))
    assert np.allclose(family_to_povm(f).effects[:, 0, 0], f.measure("v0") / 4)


def test_family_not_spanning():
    q = random_povm(3, 4, np.random.default_rng(0))
    f = induced_family(q, probe_closure([[1, 0, 0], [0, 1, 0]], ["e0", "e1"]))
    with pytest.raises(UnderdeterminedError) as exc:
        family_to_povm(f)
    assert exc.value.labels == ("e0", "e1")


def test_family_missing_polarization():
    q = random_povm(2, 3, np.random.default_rng(0))
    f = induced_family(q, [[1, 0], [0, 1]], ["a", "b"], CombinationTable(polarizations=(("a", "b", ("a+b", "x", "y", "z")),)))
    with pytest.raises(IncompleteFamilyError):
        family_to_povm(f)


@given(seeds(), st.integers(1, 5), st.integers(2, 8))
def test_bijection(seed, d, M):
    rng = np.random.default_rng(seed)
    q = random_povm(d, M, rng)
    f = induced_family(q, probe_closure(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))))
    assert consistency_check(f).ok
    assert np.max(np.abs(family_to_povm(f).effects - q.effects)) <= 1e-10
    assert np.allclose(f.measures.sum(axis=1), np.einsum("bi,bi->b", f.vectors.conj(), f.vectors).real)


# ---- polarization

def test_seminorm_examples():
    E = np.eye(2)
    assert np.allclose(seminorm_polarization(E, lambda v: np.vdot(v, v).real).gram, np.eye(2))
    r = seminorm_polarization(E, lambda v: abs(v[0]) ** 2)
    assert r.psd and np.linalg.matrix_rank(r.gram) == 1


def test_seminorm_accepts_table():
    vecs = np.eye(2)
    table = {(j, k, m): np.linalg.norm(vecs[j] + 1j**m * vecs[k]) ** 2 for j in range(2) for k in range(2) for m in range(4)}
    assert np.allclose(seminorm_polarization(vecs, table).gram, np.eye(2))
    del table[(0, 1, 3)]
    with pytest.raises(IncompleteFamilyError):
        seminorm_polarization(vecs, table)


def test_non_parallelogram_norm_flagged():
    vecs = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1])]
    r = seminorm_polarization(vecs, lambda v: np.sum(np.abs(v)) ** 2)
    assert not r.psd and r.min_eigenvalue < 0 and r.parallelogram_defect > 0


@given(seeds(), st.integers(1, 5))
def test_polarization_recovers_inner_product(seed, n):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    G = L.conj().T @ L
    vecs = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = seminorm_polarization(vecs, lambda v: np.vdot(v, G @ v).real)
    want = vecs.conj() @ G @ vecs.T
    assert np.max(np.abs(r.gram - want)) <= 1e-12 * max(1, np.max(np.abs(want)))
    assert r.psd
    assert np.allclose(np.diag(r.gram).real, [np.vdot(v, G @ v).real for v in vecs])


# ---- compression

def test_compression_examples():
    q = spectral_pvm(np.diag([-1.0, 0.0, 1.0]), CellGrid([-0.5, 0.5], [-1.0, 0.0, 1.0]))
    B = np.array([[1, 0], [0, 1], [0, 1]]) / np.array([1, math.sqrt(2)])
    c = compress_povm(q, B)
    assert validate_povm(c).ok
    assert max(np.max(np.abs(Q @ Q - Q)) for Q in c.effects) >= 1e-6
    inv = compress_povm(q, np.eye(3)[:, :2])
    assert is_pvm(inv)
    assert np.array_equal(compress_povm(q, np.eye(3)).effects, q.effects)
    with pytest.raises(InvalidInputError):
        compress_povm(q, np.array([[1, 1], [0, 1], [0, 0]]))


@given(seeds(), st.integers(2, 6), st.integers(2, 8))
def test_compression_preserves_povm(seed, d, M):
    rng = np.random.default_rng(seed)
    q = random_povm(d, M, rng)
    k = int(rng.integers(1, d + 1))
    B, _ = np.linalg.qr(rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k)))
    r = validate_povm(compress_povm(q, B))
    assert r.ok and r.sum_defect <= 1e-10


# ---- half-line example

def xexp(n, L):
    x = np.arange(n) * L / n
    return x * np.exp(-x)


def test_halfline_plancherel_and_moment():
    n, L = 2**14, 40.0
    grid = CellGrid.uniform(-100.5, 100.5, 201)
    h = halfline_momentum_measures(xexp(n, L), L, grid)
    assert abs(h.total_mass - 0.25) <= 1e-6
    assert h.plancherel_defect <= 1e-6
    assert abs(h.first_moment) <= 1e-6
    assert not h.truncation_warning and not h.tail_warning
    h3 = halfline_momentum_measures(3 * xexp(n, L), L, grid)
    assert np.allclose(h3.masses, 9 * h.masses, rtol=1e-12, atol=1e-18)


def test_halfline_flags():
    n = 1024
    x = np.arange(n) * 10.0 / n
    h = halfline_momentum_measures(np.exp(-0.1 * x), 10.0, CellGrid.uniform(-5.5, 5.5, 11))
    assert h.truncation_warning and h.tail_warning
    with pytest.raises(InvalidInputError):
        halfline_momentum_measures(np.ones(1000), 10.0, CellGrid.uniform(-1, 1, 3))


def test_halfline_povm_is_proper_povm():
    q = halfline_momentum_povm(64, 8.0, CellGrid.uniform(-3.5, 3.5, 7))
    assert validate_povm(q).ok
    assert not is_pvm(q, 1e-6)
