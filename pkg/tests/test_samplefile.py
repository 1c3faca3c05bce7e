import numpy as np
import pytest

from levydim.exponents import AdditiveProcessSpec, BrownianDrift, Custom, IsotropicStable
from levydim.samplefile import SampleFileError, read_sample, write_sample
from levydim.simulation import rng_stream, simulate_field, simulate_subordinator


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_field_round_trip_is_bit_exact(tmp_path, fmt):
    spec = AdditiveProcessSpec((BrownianDrift.standard(2), IsotropicStable(1.5, 2)))
    f = simulate_field(spec, 2.0, 2.0 ** -4, seed=3)
    path = write_sample(f, tmp_path / f"f.{fmt}", fmt, path_index=4)
    back = read_sample(path)
    assert np.array_equal(back.sample.values, f.values)
    assert back.sample.spec == f.spec
    assert back.sample.mesh == f.mesh and back.sample.T == f.T and back.sample.seed == 3
    assert np.array_equal(back.sample.t_axis, f.t_axis)
    assert back.header["grid_shape"] == [33, 33] and back.header["d"] == 2
    assert back.header["path_index"] == 4 and back.header["spec_hash"]


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_subordinator_round_trip(tmp_path, fmt):
    p = simulate_subordinator(0.4, np.linspace(0, 1, 65), rng_stream(1, "s"), seed=1)
    back = read_sample(write_sample(p, tmp_path / f"s.{fmt}", fmt)).sample
    assert np.array_equal(back.values, p.values) and back.alpha == 0.4
    assert np.all(np.diff(back.values) >= 0)


def test_csv_layout(tmp_path):
    f = simulate_field(BrownianDrift.standard(1), 1.0, 0.25, seed=0)
    lines = write_sample(f, tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "#levydim-sample 1"
    assert lines[2] == "i0,x0"
    assert len(lines) == 3 + 5


def test_binary_suffix_selects_format(tmp_path):
    f = simulate_field(BrownianDrift.standard(1), 1.0, 0.25, seed=0)
    assert write_sample(f, tmp_path / "a.bin").read_bytes()[:4] == b"LVYS"


def test_custom_spec_is_written_without_tree(tmp_path):
    f = simulate_field(BrownianDrift.standard(1), 1.0, 0.25, seed=0)
    f.spec = AdditiveProcessSpec((Custom(lambda x: x[:, 0] ** 2 + 0j, 1),))
    back = read_sample(write_sample(f, tmp_path / "c.csv"))
    assert back.header["spec"] is None and back.sample.spec is None


def test_errors(tmp_path):
    with pytest.raises(SampleFileError):
        read_sample(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("hello\n")
    with pytest.raises(SampleFileError):
        read_sample(bad)
    f = simulate_field(BrownianDrift.standard(1), 1.0, 0.25, seed=0)
    path = write_sample(f, tmp_path / "t.bin")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(SampleFileError):
        read_sample(path)
    with pytest.raises(SampleFileError):
        write_sample(object(), tmp_path / "x.csv")
    uneven = simulate_subordinator(0.5, [0.0, 0.1, 0.5], rng_stream(0, "u"))
    with pytest.raises(SampleFileError):
        write_sample(uneven, tmp_path / "u.csv")
