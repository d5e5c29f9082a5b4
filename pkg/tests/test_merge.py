import math

import numpy as np
import pytest

from aode.merge import MergeError, MergeSpec, average_experts, diff_norm, interpolate_pair
from aode.tensor_store import Checkpoint

from conftest import random_checkpoint


def ck(**tensors):
    return Checkpoint({k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()})


def test_arithmetic_mean():
    out = average_experts([ck(w=[1, 2]), ck(w=[3, 4])], MergeSpec(weights=(0.5, 0.5)))
    assert out["w"].tolist() == [2.0, 3.0]


def test_equal_weights_are_default_and_recorded():
    out = average_experts([ck(w=[0.0]), ck(w=[3.0]), ck(w=[6.0])], sources=["a", "b", "c"])
    assert out["w"].tolist() == [3.0]
    assert out.metadata["merge.weights"] == ",".join([repr(1 / 3)] * 3)
    assert out.metadata["merge.sources"] == "a,b,c"


def test_identity_of_copies():
    rng = np.random.default_rng(0)
    c = random_checkpoint(rng, dtype=np.float64)
    for n in (2, 3, 5, 7):
        assert average_experts([c] * n).equals(c, metadata=False)


def test_one_hot_weights():
    a, b = ck(w=[1.5, -2.0]), ck(w=[0.1, 0.2])
    assert average_experts([a, b], MergeSpec(weights=(1.0, 0.0))).equals(a, metadata=False)
    assert average_experts([a, b], MergeSpec(weights=(0.0, 1.0))).equals(b, metadata=False)


def test_float32_storage_is_preserved():
    a = Checkpoint({"w": np.array([1.0, 2.0], np.float32)})
    b = Checkpoint({"w": np.array([2.0, 3.0], np.float32)})
    out = average_experts([a, b])
    assert out["w"].dtype == np.float32
    assert out["w"].tolist() == [1.5, 2.5]


def test_include_filter_copies_from_base():
    a = ck(w=[0.0], bn=[1.0])
    b = ck(w=[2.0], bn=[5.0])
    out = average_experts([a, b], MergeSpec(include="w", base=1))
    assert out["w"].tolist() == [1.0]
    assert out["bn"].tolist() == [5.0]
    assert out.metadata["merge.include"] == "w"


@pytest.mark.parametrize("weights", [(0.5, 0.6), (-0.5, 1.5), (1.0,), (float("nan"), 1.0)])
def test_bad_weights(weights):
    with pytest.raises(MergeError):
        average_experts([ck(w=[0]), ck(w=[1])], MergeSpec(weights=weights))


def test_weight_sum_tolerance():
    average_experts([ck(w=[0]), ck(w=[1])], MergeSpec(weights=(0.5, 0.5 + 5e-10)))
    with pytest.raises(MergeError, match="sum to 1"):
        average_experts([ck(w=[0]), ck(w=[1])], MergeSpec(weights=(0.5, 0.5 + 5e-9)))


def test_incompatible_and_empty():
    with pytest.raises(MergeError, match="incompatible"):
        average_experts([ck(w=[0, 1]), ck(w=[0])])
    with pytest.raises(MergeError):
        average_experts([])


def test_interpolate_pair():
    a, b = ck(w=[0, 10]), ck(w=[10, 0])
    assert interpolate_pair(a, b, 0.25)["w"].tolist() == [2.5, 7.5]
    assert interpolate_pair(a, b, 0.0).equals(a, metadata=False)
    assert interpolate_pair(a, b, 1.0).equals(b, metadata=False)
    with pytest.raises(MergeError):
        interpolate_pair(a, b, 1.5)


def test_interpolate_matches_average():
    rng = np.random.default_rng(3)
    names = ["x", "y"]
    for _ in range(10):
        a = random_checkpoint(rng, names=names, dtype=np.float64)
        b = Checkpoint({n: rng.standard_normal(a[n].shape) for n in names})
        alpha = float(rng.random())
        direct = average_experts([a, b], MergeSpec(weights=(1 - alpha, alpha)))
        assert interpolate_pair(a, b, alpha).equals(direct)


def _triple(rng, dtype):
    shapes = {"w": (3, 4), "b": (4,), "s": ()}
    return [Checkpoint({n: (rng.standard_normal(s) * 5).astype(dtype) for n, s in shapes.items()})
            for _ in range(3)]


@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-6), (np.float32, 1e-4)])
def test_composition(dtype, tol):
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = _triple(rng, dtype)
        three = average_experts([a, b, c])
        nested = interpolate_pair(interpolate_pair(a, b, 0.5), c, 1 / 3)
        for n in three:
            np.testing.assert_allclose(nested[n], three[n], rtol=tol, atol=tol)


def test_diff_norm():
    d = diff_norm(ck(w=[0, 0]), ck(w=[3, 4]))
    assert d.per_tensor == {"w": 5.0}
    assert d.total == 5.0
    same = ck(w=[1, 2], b=[3])
    assert diff_norm(same, same) == ({"w": 0.0, "b": 0.0}, 0.0)


def test_diff_norm_against_summed_squares():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = random_checkpoint(rng, names=["p", "q", "r"])
        b = Checkpoint({n: (a[n] + rng.standard_normal(a[n].shape)).astype(a[n].dtype) for n in a})
        d = diff_norm(a, b)
        total = 0.0
        for n in a:
            sq = 0.0
            for u, v in zip(a[n].ravel().tolist(), b[n].ravel().tolist()):
                sq += (float(u) - float(v)) ** 2
            assert math.isclose(d.per_tensor[n], math.sqrt(sq), rel_tol=1e-12)
            total += sq
        assert math.isclose(d.total, math.sqrt(total), rel_tol=1e-12)


def test_joint_permutation_invariance():
    rng = np.random.default_rng(8)
    for dtype in (np.float32, np.float64):
        for _ in range(20):
            cks = _triple(rng, dtype)
            w = rng.dirichlet(np.ones(3))
            w = tuple(float(x) for x in w[:2]) + (1.0 - float(w[0]) - float(w[1]),)
            ref = average_experts(cks, MergeSpec(weights=w))
            for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
                out = average_experts([cks[i] for i in perm], MergeSpec(weights=tuple(w[i] for i in perm)))
                assert out.equals(ref, metadata=False)


def test_convex_hull():
    rng = np.random.default_rng(9)
    for dtype in (np.float32, np.float64):
        for _ in range(20):
            cks = _triple(rng, dtype)
            w = tuple(float(x) for x in rng.dirichlet(np.ones(3)))
            try:
                out = average_experts(cks, MergeSpec(weights=w))
            except MergeError:
                continue  # dirichlet draw rounded outside the sum tolerance
            for n in out:
                stack = np.stack([c[n] for c in cks])
                assert np.all(out[n] >= stack.min(axis=0))
                assert np.all(out[n] <= stack.max(axis=0))


def test_inputs_untouched():
    a, b = ck(w=[1.0, 2.0]), ck(w=[3.0, 5.0])
    before = (a["w"].copy(), b["w"].copy())
    average_experts([a, b])
    assert a["w"].tolist() == before[0].tolist() and b["w"].tolist() == before[1].tolist()
