import json
import math

import pytest

from conftest import DATA
from graphschrod.errors import SpecError
from graphschrod.specs import coefficient, load_spec, parse_spec


def test_families():
    assert coefficient(2.5, "c")(7) == 2.5
    assert coefficient([1.0, 3.0], "c")(1) == 3.0
    assert coefficient({"family": "const", "value": 4}, "c")(9) == 4.0
    assert coefficient({"family": "power", "scale": 2, "exponent": 2, "offset": 1}, "c")(2) == 18.0
    assert coefficient({"family": "geometric", "scale": 3, "ratio": 0.5}, "c")(3) == 0.375
    fact = coefficient({"family": "factorial-like", "start": 1, "a": 1, "c": 0}, "c")
    assert [fact(n) for n in range(6)] == [1, 1, 2, 6, 24, 120]


@pytest.mark.parametrize(
    "entry",
    [True, "x", {"value": 1}, {"family": "power"}, {"family": "nope"}, [1, "a"], math.inf],
)
def test_bad_coefficients(entry):
    with pytest.raises(SpecError):
        coefficient(entry, "c")


def test_array_coefficient_out_of_range():
    with pytest.raises(SpecError):
        coefficient([1.0], "c")(3)


def test_birth_death_spec():
    spec = load_spec(DATA / "chain.json")
    assert spec.kind == "birth_death"
    assert spec.graph.deg(0) == 1.0
    assert spec.potential(4) == -2.0 and spec.perturbation(3) == 9.0
    assert spec.section(size=3) == (0, 1, 2)
    assert spec.section(radius=2) == (0, 1, 2)


def test_explicit_spec():
    spec = parse_spec({"kind": "explicit", "edges": [[0, 1, 2.0], [1, 2, 0.5], [1, 0, 2.0]], "mu": [1, 2, 3]})
    assert spec.graph.b(1, 0) == 2.0 and spec.graph.deg(1) == 2.5
    assert spec.section() == (0, 1, 2)


@pytest.mark.parametrize(
    "obj",
    [
        {"kind": "explicit", "edges": [[0, 1, 1.0], [1, 0, 2.0]], "mu": [1, 1]},
        {"kind": "explicit", "edges": [[0, 1, 1.0]], "mu": [1, 0]},
        {"kind": "explicit", "edges": [[0, 1, 1.0]], "mu": [1, -2]},
        {"kind": "explicit", "edges": [[0, 3, 1.0]], "mu": [1, 1]},
        {"kind": "explicit", "edges": [[0, 1]], "mu": [1, 1]},
        {"kind": "birth_death", "b": 1},
        {"kind": "birth_death", "b": [1, 0], "mu": 1, "n_vertices": 3},
        {"kind": "lattice"},
        {"kind": "lattice", "dim": 2, "b": -1},
        {"kind": "tree"},
        [1, 2],
    ],
)
def test_rejected_specs(obj):
    with pytest.raises(SpecError):
        parse_spec(obj)


def test_lattice_spec_potential_by_distance():
    spec = load_spec(DATA / "lattice.json")
    assert spec.perturbation((2, -1)) == 3.0
    assert len(spec.section(radius=1)) == 5
    with pytest.raises(SpecError):
        spec.section(size=4)


def test_malformed_json(tmp_path):
    with pytest.raises(SpecError):
        load_spec(DATA / "malformed.json")
    with pytest.raises(SpecError):
        load_spec(tmp_path / "missing.json")
    p = tmp_path / "ok.json"
    p.write_text(json.dumps({"kind": "birth_death", "b": 1, "mu": 1}))
    with pytest.raises(SpecError):
        load_spec(p).section()
