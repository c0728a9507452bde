import numpy as np
import pytest

from gencheb.errors import DimensionMismatch, UnreadableMatrix
from gencheb.genmat import example33_fixture
from gencheb.linalg import (
    ComplexSparseMatrix,
    PoweredOperator,
    as_vector,
    dense_eigendecomposition,
    geometric_sum_apply,
    read_matrix_market,
    read_vector_market,
    write_matrix_market,
    write_vector_market,
)


def random_sparse(rng, n_rows, n_cols, density=0.3):
    dense = np.where(
        rng.random((n_rows, n_cols)) < density,
        rng.standard_normal((n_rows, n_cols)) + 1j * rng.standard_normal((n_rows, n_cols)),
        0.0,
    )
    return ComplexSparseMatrix.from_dense(dense), dense


class TestMatvec:
    def test_identity(self):
        eye = ComplexSparseMatrix.identity(5)
        v = np.arange(5, dtype=complex) + 1j
        assert np.array_equal(eye.matvec(v), v)

    def test_permutation_swap(self):
        swap = ComplexSparseMatrix.from_dense(np.array([[0, 1], [1, 0]], dtype=complex))
        out = swap.matvec(np.array([3.0 + 1j, 7.0]))
        assert np.array_equal(out, np.array([7.0, 3.0 + 1j]))

    def test_example33_row_sums(self):
        fixture = example33_fixture()
        out = fixture.system.M.matvec(np.ones(4, dtype=complex))
        # first row summed by hand: 1.40-1.80+1.20+0.20 + (0.70-2.80-2.80)i
        assert out[0] == pytest.approx(1.0 - 4.9j, abs=1e-14)
        dense = fixture.system.M.to_dense()
        assert np.allclose(out, dense.sum(axis=1), atol=1e-14)

    def test_dimension_mismatch(self):
        eye = ComplexSparseMatrix.identity(4)
        with pytest.raises(DimensionMismatch):
            eye.matvec(np.ones(5, dtype=complex))

    def test_linearity(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a, _ = random_sparse(rng, 12, 9)
            v = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            w = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            alpha = complex(rng.standard_normal(), rng.standard_normal())
            lhs = a.matvec(alpha * v + w)
            rhs = alpha * a.matvec(v) + a.matvec(w)
            assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))

    def test_frobenius_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a, _ = random_sparse(rng, 10, 10)
            v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
            assert np.linalg.norm(a.matvec(v)) <= a.frobenius_norm() * np.linalg.norm(
                v
            ) * (1 + 1e-12)

    def test_empty_rows_are_fine(self):
        a = ComplexSparseMatrix.from_triplets(4, 4, [1, 3], [2, 0], [2.0, 5.0])
        out = a.matvec(np.ones(4, dtype=complex))
        assert np.array_equal(out, np.array([0.0, 2.0, 0.0, 5.0], dtype=complex))


class TestConjTranspose:
    def test_hermitian_fixed_point(self):
        h = np.array([[2.0, 1 - 1j], [1 + 1j, 3.0]])
        a = ComplexSparseMatrix.from_dense(h)
        assert np.allclose(a.conj_transpose().to_dense(), h, atol=0)

    def test_involution_exact(self):
        rng = np.random.default_rng(9)
        a, dense = random_sparse(rng, 8, 5)
        back = a.conj_transpose().conj_transpose()
        assert np.array_equal(back.to_dense(), dense)

    def test_adjoint_property(self):
        rng = np.random.default_rng(10)
        a, _ = random_sparse(rng, 11, 7)
        at = a.conj_transpose()
        for _ in range(20):
            v = rng.standard_normal(7) + 1j * rng.standard_normal(7)
            w = rng.standard_normal(11) + 1j * rng.standard_normal(11)
            lhs = np.vdot(w, a.matvec(v))
            rhs = np.vdot(at.matvec(w), v)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestGeometricSum:
    def test_k_one_is_identity(self):
        a = ComplexSparseMatrix.identity(3)
        v = np.array([1.0, 2.0, 3.0], dtype=complex)
        assert np.array_equal(geometric_sum_apply(a, 1, v), v)

    def test_scalar_geometric_sum(self):
        a = ComplexSparseMatrix.from_dense(0.5 * np.eye(4))
        out = geometric_sum_apply(a, 3, np.ones(4, dtype=complex))
        assert np.allclose(out, 1.75 * np.ones(4), atol=1e-15)

    def test_against_dense_powers(self):
        rng = np.random.default_rng(21)
        dense = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        dense *= 0.5 / max(np.abs(np.linalg.eigvals(dense)))
        a = ComplexSparseMatrix.from_dense(dense)
        v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        expected = (
            np.eye(10) + dense + dense @ dense + dense @ dense @ dense
        ) @ v
        got = geometric_sum_apply(a, 4, v)
        assert np.linalg.norm(got - expected) <= 1e-12 * np.linalg.norm(expected)


class TestPoweredOperator:
    def test_matches_dense_powers(self):
        rng = np.random.default_rng(31)
        dense = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        a = ComplexSparseMatrix.from_dense(dense)
        v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        for k in range(1, 6):
            got = PoweredOperator(a, k).matvec(v)
            expected = np.linalg.matrix_power(dense, k) @ v
            assert np.linalg.norm(got - expected) <= 1e-10 * max(
                1.0, np.linalg.norm(expected)
            )

    def test_cost(self):
        a = ComplexSparseMatrix.identity(3)
        assert PoweredOperator(a, 4).matvec_cost == 4

    def test_invalid_power(self):
        with pytest.raises(ValueError):
            PoweredOperator(ComplexSparseMatrix.identity(2), 0)


class TestDenseEig:
    def test_diagonal(self):
        vals, _ = dense_eigendecomposition(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(sorted(vals.real), [1.0, 2.0, 3.0], atol=1e-12)

    def test_example33_eigenvalues(self):
        fixture = example33_fixture()
        vals, _ = dense_eigendecomposition(fixture.system.M)
        got = sorted(vals, key=lambda z: (round(z.real, 8), round(z.imag, 8)))
        expected = sorted(
            fixture.eigenvalues, key=lambda z: (round(z.real, 8), round(z.imag, 8))
        )
        for a, b in zip(got, expected):
            assert abs(a - b) <= 1e-8

    def test_rotation(self):
        vals, _ = dense_eigendecomposition(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert sorted(np.round(vals.imag, 12)) == [-1.0, 1.0]
        assert np.allclose(vals.real, 0.0, atol=1e-12)

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            dense_eigendecomposition(np.eye(65))

    def test_residual_contract(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
        vals, vecs = dense_eigendecomposition(a)
        resid = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
        assert np.all(resid <= 1e-8 * np.linalg.norm(vecs, axis=0))


class TestVectorValidation:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            as_vector(np.array([1.0, np.nan]))

    def test_rejects_inf(self):
        with pytest.raises(ValueError):
            as_vector(np.array([np.inf, 1.0]))

    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            as_vector(np.ones(3), n=4)

    def test_rejects_matrix(self):
        with pytest.raises(DimensionMismatch):
            as_vector(np.ones((2, 2)))


class TestCSRInvariants:
    def test_bad_offsets(self):
        with pytest.raises(ValueError):
            ComplexSparseMatrix(2, 2, [0, 2, 1], [0, 1, 0], [1.0, 2.0, 3.0])

    def test_out_of_bounds_column(self):
        with pytest.raises(ValueError):
            ComplexSparseMatrix(2, 2, [0, 1, 1], [5], [1.0])

    def test_unsorted_columns_in_row(self):
        with pytest.raises(ValueError):
            ComplexSparseMatrix(1, 3, [0, 2], [2, 0], [1.0, 2.0])

    def test_duplicates_summed_by_from_triplets(self):
        a = ComplexSparseMatrix.from_triplets(2, 2, [0, 0], [1, 1], [1.0, 2.0 + 1j])
        assert a.nnz == 1
        assert a.to_dense()[0, 1] == 3.0 + 1j

    def test_nonfinite_values_rejected(self):
        with pytest.raises(ValueError):
            ComplexSparseMatrix(1, 1, [0, 1], [0], [np.nan])


class TestMatrixMarket:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(17)
        a, _ = random_sparse(rng, 13, 9, density=0.4)
        path = tmp_path / "a.mtx"
        write_matrix_market(a, path)
        b = read_matrix_market(path)
        assert np.array_equal(a.row_offsets, b.row_offsets)
        assert np.array_equal(a.col_indices, b.col_indices)
        assert np.array_equal(a.values, b.values)

    def test_header_format(self, tmp_path):
        path = tmp_path / "i.mtx"
        write_matrix_market(ComplexSparseMatrix.identity(2), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "%%MatrixMarket matrix coordinate complex general"
        assert lines[1] == "2 2 2"
        assert lines[2].split() == ["1", "1", "1.0", "0.0"]

    def test_vector_round_trip(self, tmp_path):
        rng = np.random.default_rng(19)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        path = tmp_path / "v.mtx"
        write_vector_market(v, path)
        assert np.array_equal(read_vector_market(path), v)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UnreadableMatrix):
            read_matrix_market(tmp_path / "nope.mtx")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.mtx"
        path.write_text("%%MatrixMarket matrix array real general\n1 1\n1.0\n")
        with pytest.raises(UnreadableMatrix):
            read_matrix_market(path)

    def test_truncated_entries(self, tmp_path):
        path = tmp_path / "short.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate complex general\n2 2 2\n1 1 1.0 0.0\n"
        )
        with pytest.raises(UnreadableMatrix):
            read_matrix_market(path)

    def test_malformed_entry(self, tmp_path):
        path = tmp_path / "mal.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 xyz 0.0\n"
        )
        with pytest.raises(UnreadableMatrix):
            read_matrix_market(path)
