import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bamg.chains import gen_uniform_network
from bamg.sparse import (CfPartition, DimensionError, SparseMatrix, extract_blocks,
                         from_triplets, matmul, matvec, neighborhood, read_matrix_market,
                         reachability, strong_components, transpose, write_matrix_market)
from conftest import random_sparse


class TestFromTriplets:
    def test_duplicates_are_summed(self):
        M = from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 1.0)])
        assert M.nnz == 1
        assert M.to_dense()[0, 0] == 2.0

    def test_explicit_zero_dropped(self):
        assert from_triplets(2, 2, [(0, 1, 0.0)]).nnz == 0

    def test_cancelling_duplicates_dropped(self):
        assert from_triplets(2, 2, [(1, 0, 0.5), (1, 0, -0.5)]).nnz == 0

    def test_identity_is_matvec_fixed_point(self):
        I = from_triplets(3, 3, [(i, i, 1.0) for i in range(3)])
        x = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(I.matvec(x), x)
        assert I == SparseMatrix.identity(3)

    @pytest.mark.parametrize("trip", [[(2, 0, 1.0)], [(0, -1, 1.0)], [(0, 3, 1.0)]])
    def test_out_of_range(self, trip):
        with pytest.raises(IndexError):
            from_triplets(2, 3, trip)

    def test_storage_is_sorted_and_read_only(self):
        M = from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (1, 1, 3.0)])
        np.testing.assert_array_equal(M.indices, [0, 2, 1])
        with pytest.raises(ValueError):
            M.data[0] = 5.0


class TestMatvec:
    def test_identity(self):
        x = np.arange(4.0)
        np.testing.assert_array_equal(matvec(SparseMatrix.identity(4), x), x)

    def test_swap(self):
        A = from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)])
        np.testing.assert_array_equal(A @ np.array([1.0, 2.0]), [2.0, 1.0])

    def test_random_against_dense(self, rng):
        M = random_sparse(20, seed=3)
        x = rng.standard_normal(20)
        ref = M.to_dense() @ x
        assert np.linalg.norm(M.matvec(x) - ref) <= 1e-13 * np.linalg.norm(ref)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            SparseMatrix.identity(3).matvec(np.ones(4))

    def test_empty_rows(self):
        M = from_triplets(3, 3, [(1, 2, 4.0)])
        np.testing.assert_array_equal(M.matvec(np.ones(3)), [0.0, 4.0, 0.0])


class TestProducts:
    def test_double_transpose(self):
        M = random_sparse(7, 5, seed=1)
        assert transpose(transpose(M)) == M
        assert M.T.shape == (5, 7)

    def test_identity_product(self):
        M = random_sparse(6, seed=2)
        np.testing.assert_array_equal(matmul(SparseMatrix.identity(6), M).to_dense(), M.to_dense())

    def test_random_pair_against_dense(self):
        L, R = random_sparse(10, seed=4), random_sparse(10, seed=5)
        np.testing.assert_allclose((L @ R).to_dense(), L.to_dense() @ R.to_dense(), atol=1e-14)

    def test_cancellation_is_dropped(self):
        L = from_triplets(1, 2, [(0, 0, 1.0), (0, 1, 1.0)])
        R = from_triplets(2, 1, [(0, 0, 1.0), (1, 0, -1.0 + 1e-17)])
        assert matmul(L, R).nnz == 0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(SparseMatrix.identity(2), SparseMatrix.identity(3))

    def test_add_sub_scale(self):
        M = random_sparse(5, seed=6)
        np.testing.assert_allclose((M + M - M.scaled(2.0)).to_dense(), 0.0, atol=1e-15)
        assert (M - M).nnz == 0


@given(n=st.integers(1, 50), m=st.integers(1, 50), seed=st.integers(0, 2**31),
       density=st.floats(0.0, 0.5))
def test_products_match_dense(n, m, seed, density):
    M = random_sparse(n, m, density, seed)
    R = random_sparse(m, n, density, seed + 1)
    x = np.random.default_rng(seed).standard_normal(m)
    Md = M.to_dense()
    ref = Md @ x
    assert np.linalg.norm(M.matvec(x) - ref) <= 1e-12 * max(np.linalg.norm(ref), 1.0)
    np.testing.assert_array_equal(M.T.to_dense(), Md.T)
    prod = Md @ R.to_dense()
    assert np.abs((M @ R).to_dense() - prod).max(initial=0.0) <= 1e-12 * max(np.abs(prod).max(initial=0.0), 1.0)


class TestBlocks:
    def test_all_fine(self):
        M = random_sparse(5, seed=7)
        ff, fc, cf, cc = extract_blocks(M, CfPartition.from_coarse(5, []))
        assert ff == M
        assert fc.shape == (5, 0) and cf.shape == (0, 5) and cc.shape == (0, 0)

    def test_all_coarse(self):
        M = random_sparse(5, seed=8)
        assert extract_blocks(M, CfPartition.from_coarse(5, range(5)))[3] == M

    def test_tridiagonal_permutation(self):
        M = from_triplets(4, 4, [(i, j, 10 * i + j + 1.0) for i in range(4) for j in range(4)
                                 if abs(i - j) <= 1])
        part = CfPartition.from_coarse(4, [0, 2])
        ff, fc, cf, cc = (b.to_dense() for b in extract_blocks(M, part))
        perm = np.concatenate([part.fset, part.cset])
        Pm = np.eye(4)[:, perm]
        np.testing.assert_array_equal(np.block([[ff, fc], [cf, cc]]), Pm.T @ M.to_dense() @ Pm)

    def test_partition_must_cover(self):
        with pytest.raises(ValueError):
            CfPartition(4, np.array([0, 1]), np.array([1, 2, 3]))
        with pytest.raises(ValueError):
            CfPartition(4, np.array([0]), np.array([1, 2]))

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            extract_blocks(SparseMatrix.identity(3), CfPartition.from_coarse(4, [0]))


@given(n=st.integers(1, 30), seed=st.integers(0, 2**31))
def test_blocks_round_trip(n, seed):
    M = random_sparse(n, density=0.4, seed=seed)
    coarse = np.flatnonzero(np.random.default_rng(seed).random(n) < 0.4)
    part = CfPartition.from_coarse(n, coarse)
    ff, fc, cf, cc = (b.to_dense() for b in extract_blocks(M, part))
    R = np.zeros((n, n))
    f, c = part.fset, part.cset
    R[np.ix_(f, f)], R[np.ix_(f, c)], R[np.ix_(c, f)], R[np.ix_(c, c)] = ff, fc, cf, cc
    np.testing.assert_array_equal(R, M.to_dense())


def _bfs_oracle(Md, i, z, targets):
    frontier, seen = {i}, {i}
    for _ in range(z):
        frontier = {v for u in frontier for v in np.flatnonzero(Md[u]) if v != u} - seen
        seen |= frontier
    return sorted((seen - {i}) & set(targets))


class TestNeighborhood:
    def test_diagonal_has_no_edges(self):
        D = from_triplets(4, 4, [(i, i, 2.0) for i in range(4)])
        assert neighborhood(D, 1, 3, range(4)) == []

    def test_path_graph(self):
        trip = [(i, i + 1, 1.0) for i in range(4)] + [(i + 1, i, 1.0) for i in range(4)]
        G = from_triplets(5, 5, trip)
        assert neighborhood(G, 2, 2, [0, 4]) == [0, 4]
        assert neighborhood(G, 2, 1, [0, 4]) == []

    def test_uniform_grid_interior(self):
        A = gen_uniform_network(3).A
        even = [r * 3 + c for r in range(3) for c in range(3) if r % 2 == 0 and c % 2 == 0]
        # centre point 4 touches only odd lattice points at distance 1
        assert neighborhood(A, 4, 1, even) == _bfs_oracle(A.to_dense(), 4, 1, even) == []
        assert neighborhood(A, 1, 1, even) == [0, 2]

    def test_bad_z(self):
        with pytest.raises(ValueError):
            neighborhood(SparseMatrix.identity(2), 0, 4, [1])

    def test_reachability_matches_bfs(self):
        M = random_sparse(25, density=0.08, seed=11)
        Md = M.to_dense()
        for z in (1, 2, 3):
            R = reachability(M, z).toarray()
            for i in range(25):
                assert list(np.flatnonzero(R[i])) == _bfs_oracle(Md, i, z, range(25))


@given(n=st.integers(2, 25), seed=st.integers(0, 2**31), z=st.integers(1, 2))
def test_neighborhood_grows_with_z(n, seed, z):
    M = random_sparse(n, density=0.15, seed=seed)
    targets = list(range(0, n, 2))
    for i in range(n):
        small = neighborhood(M, i, z, targets)
        big = neighborhood(M, i, z + 1, targets)
        assert set(small) <= set(big)
        assert small == _bfs_oracle(M.to_dense(), i, z, targets)


class TestStrongComponents:
    def test_identity(self):
        assert strong_components(SparseMatrix.identity(5)) == 5

    def test_cycle(self):
        assert strong_components(from_triplets(4, 4, [((i + 1) % 4, i, 1.0) for i in range(4)])) == 1

    def test_block_lower_triangular(self):
        # [[A11, 0], [A21, A22]] with irreducible diagonal blocks
        trip = [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0), (2, 0, 0.5)]
        assert strong_components(from_triplets(4, 4, trip)) == 2


class TestMatrixMarket:
    def test_round_trip(self, tmp_path):
        M = random_sparse(9, 7, seed=12)
        write_matrix_market(tmp_path / "m.mtx", M, comment="hello")
        assert read_matrix_market(tmp_path / "m.mtx") == M

    def test_header_comment_kept(self, tmp_path):
        write_matrix_market(tmp_path / "m.mtx", SparseMatrix.identity(2), comment="kind=x")
        assert "kind=x" in (tmp_path / "m.mtx").read_text().splitlines()[1]

    def test_pattern_entries_are_ones(self, tmp_path):
        p = tmp_path / "p.mtx"
        p.write_text("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n2 1\n")
        np.testing.assert_array_equal(read_matrix_market(p).to_dense(), [[0, 0], [1, 0]])

    def test_symmetric_expansion(self, tmp_path):
        p = tmp_path / "s.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 3\n")
        np.testing.assert_array_equal(read_matrix_market(p).to_dense(), [[4, 3], [3, 0]])

    @pytest.mark.parametrize("text", [
        "2 2 1\n1 1 1\n",
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
        "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 2\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n",
    ])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "bad.mtx"
        p.write_text(text)
        with pytest.raises(ValueError):
            read_matrix_market(p)
