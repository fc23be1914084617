import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hdproj.dataset import (DataError, Dataset, Direction, align_sign, load_csv, load_direction_csv,
                            make_folds, write_csv, write_direction_csv)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestDatasetType:
    def test_shapes(self):
        d = Dataset(np.zeros((3, 4)), np.ones((2, 4)))
        assert (d.n_x, d.n_z, d.p) == (3, 2, 4)

    def test_rejects_mismatched_columns(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 4)), np.ones((2, 3)))

    def test_rejects_small_group(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((1, 4)), np.ones((2, 4)))

    def test_rejects_nan(self):
        x = np.zeros((3, 2))
        x[1, 1] = np.nan
        with pytest.raises(DataError):
            Dataset(x, np.zeros((3, 2)))

    def test_arrays_read_only(self):
        d = Dataset(np.zeros((3, 2)), np.zeros((3, 2)))
        with pytest.raises(ValueError):
            d.x[0, 0] = 1.0


class TestLoadCsv:
    def test_basic(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a,b,c\nctl,1,2,3\ntrt,4,5,6\nctl,7,8,9\ntrt,0,0,0\n")
        d = load_csv(f, "g", ("ctl", "trt"))
        assert (d.n_x, d.n_z, d.p) == (2, 2, 3)
        assert d.feature_names == ("a", "b", "c")
        np.testing.assert_array_equal(d.x, [[1, 2, 3], [7, 8, 9]])

    def test_group_column_in_middle(self, tmp_path):
        f = _write(tmp_path / "d.csv", "a,g,b\n1,ctl,2\n3,ctl,4\n5,trt,6\n7,trt,8\n")
        d = load_csv(f, "g", ("ctl", "trt"))
        assert d.feature_names == ("a", "b")
        np.testing.assert_array_equal(d.z, [[5, 6], [7, 8]])

    def test_nan_cell_names_row_and_column(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a,b\nctl,1,2\nctl,1,nan\ntrt,1,2\ntrt,3,4\n")
        with pytest.raises(DataError, match=r"row 3, column 'b'"):
            load_csv(f, "g", ("ctl", "trt"))

    def test_non_numeric(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a\nctl,x\nctl,1\ntrt,1\ntrt,2\n")
        with pytest.raises(DataError, match=r"row 2, column 'a'"):
            load_csv(f, "g", ("ctl", "trt"))

    def test_third_label(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a\nctl,1\nctl,1\ntrt,1\nfoo,2\ntrt,2\n")
        with pytest.raises(DataError, match="'foo'"):
            load_csv(f, "g", ("ctl", "trt"))

    def test_missing_group_column(self, tmp_path):
        f = _write(tmp_path / "d.csv", "a,b\n1,2\n")
        with pytest.raises(DataError, match="'g'"):
            load_csv(f, "g", ("ctl", "trt"))

    def test_single_group(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a\nctl,1\nctl,2\n")
        with pytest.raises(DataError, match="group column 'g'"):
            load_csv(f, "g", ("ctl", "trt"))

    def test_ragged_row(self, tmp_path):
        f = _write(tmp_path / "d.csv", "g,a,b\nctl,1\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(f, "g", ("ctl", "trt"))


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(float, st.tuples(st.integers(2, 6), st.integers(1, 5)), elements=finite),
       st.integers(2, 6))
def test_csv_round_trip_bit_exact(tmp_path_factory, x, nz):
    rng = np.random.default_rng(nz)
    z = rng.standard_normal((nz, x.shape[1])) * 1e300
    d = Dataset(x, z)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(d, path)
    back = load_csv(path, "group", ("control", "treatment"))
    assert back.x.tobytes() == d.x.tobytes()
    assert back.z.tobytes() == d.z.tobytes()


class TestMakeFolds:
    def test_divisible(self):
        plan = make_folds(6, 6, 3, seed=5)
        for m in range(3):
            assert plan.x_fold(m).size == 2 and plan.z_fold(m).size == 2

    def test_remainder(self):
        plan = make_folds(7, 6, 3, seed=1)
        assert sorted(plan.x_fold(m).size for m in range(3)) == [2, 2, 3]

    def test_deterministic(self):
        a, b = make_folds(11, 9, 3, 42), make_folds(11, 9, 3, 42)
        np.testing.assert_array_equal(a.x_assignment, b.x_assignment)
        np.testing.assert_array_equal(a.z_assignment, b.z_assignment)

    def test_x_assignment_independent_of_nz(self):
        a, b = make_folds(11, 9, 3, 42), make_folds(11, 30, 3, 42)
        np.testing.assert_array_equal(a.x_assignment, b.x_assignment)

    def test_too_many_folds(self):
        with pytest.raises(ValueError):
            make_folds(5, 2, 3, 0)

    def test_one_fold(self):
        with pytest.raises(ValueError):
            make_folds(5, 5, 1, 0)

    def test_split_complement(self):
        d = Dataset(np.arange(14.0).reshape(7, 2), np.arange(12.0).reshape(6, 2))
        plan = make_folds(7, 6, 2, 3)
        x_in, z_in, x_out, z_out = plan.split(d, 0)
        assert x_in.shape[0] + x_out.shape[0] == 7
        assert z_in.shape[0] + z_out.shape[0] == 6
        assert set(map(tuple, x_in)) | set(map(tuple, x_out)) == set(map(tuple, d.x))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.integers(2, 10), st.integers(0, 2**63 - 1))
def test_fold_invariants(n_x, n_z, m, seed):
    if m > min(n_x, n_z):
        with pytest.raises(ValueError):
            make_folds(n_x, n_z, m, seed)
        return
    plan = make_folds(n_x, n_z, m, seed)
    for assign, n in ((plan.x_assignment, n_x), (plan.z_assignment, n_z)):
        assert assign.shape == (n,)
        sizes = np.bincount(assign, minlength=m)
        assert sizes.size == m and sizes.sum() == n
        assert sizes.max() - sizes.min() <= 1
    again = make_folds(n_x, n_z, m, seed)
    assert np.array_equal(plan.x_assignment, again.x_assignment)
    assert np.array_equal(plan.z_assignment, again.z_assignment)
    for mm in range(m):
        both = np.concatenate([plan.x_fold(mm), plan.x_complement(mm)])
        assert np.array_equal(np.sort(both), np.arange(n_x))


class TestAlignSign:
    def test_flip(self):
        out = align_sign(Direction([1.0, 0.0]), Direction([-0.6, 0.8]))
        np.testing.assert_array_equal(out.weights, [0.6, -0.8])

    def test_keep(self):
        c = Direction([0.6, 0.8])
        assert align_sign(Direction([1.0, 0.0]), c) is c

    def test_zero_inner_product_keeps(self):
        c = Direction([0.0, -1.0])
        assert align_sign(Direction([1.0, 0.0]), c) is c

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            align_sign(Direction([1.0, 0.0]), Direction([1.0, 0.0, 0.0]))


vec3 = hnp.arrays(float, 3, elements=st.floats(-10, 10, allow_nan=False))


@given(vec3, vec3)
def test_align_sign_idempotent(r, c):
    ref, cand = Direction(r), Direction(c)
    once = align_sign(ref, cand)
    twice = align_sign(ref, once)
    np.testing.assert_array_equal(once.weights, twice.weights)
    assert float(once.weights @ ref.weights) >= 0


class TestDirection:
    def test_pc_requires_unit_norm(self):
        with pytest.raises(ValueError):
            Direction([1.0, 1.0], "pc1")
        Direction([0.6, 0.8], "pc2")

    def test_unknown_origin(self):
        with pytest.raises(ValueError):
            Direction([1.0], "magic")

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            Direction([1.0, np.inf])

    def test_csv_round_trip(self, tmp_path):
        d = Direction([0.1, -2.5, 0.0])
        write_direction_csv(d, tmp_path / "u.csv", ["a", "b", "c"])
        back = load_direction_csv(tmp_path / "u.csv", ["c", "a", "b"])
        np.testing.assert_array_equal(back.weights, [0.0, 0.1, -2.5])

    def test_csv_missing_feature(self, tmp_path):
        _write(tmp_path / "u.csv", "feature_name,weight\na,1\n")
        with pytest.raises(DataError, match="missing"):
            load_direction_csv(tmp_path / "u.csv", ["a", "b"])

    def test_csv_bad_header(self, tmp_path):
        _write(tmp_path / "u.csv", "name,w\na,1\n")
        with pytest.raises(DataError, match="header"):
            load_direction_csv(tmp_path / "u.csv")
