"""End-to-end smoke tests for the Python bindings."""

import os

import pytest

import structfile as sf

MOLECULE_TYPE = """
struct {
    comment : string;
    atoms : array of struct {
        name : string;
        z : integer*2;
        partial_charge : real*4;
    };
}
"""


@pytest.fixture
def molecule():
    env = sf.parse_type_text(MOLECULE_TYPE)
    d = sf.new_data(env)
    d["comment"].assign("ten carbons")
    atoms = d["atoms"]
    atoms.resize(10)
    for i in range(10):
        atom = atoms[i]
        atom["name"].assign("C")
        atom["z"].assign(6)
        atom["partial_charge"].assign(0.25)
    return env, d


def test_build_and_read_back(molecule):
    env, d = molecule
    assert d["comment"].get() == "ten carbons"
    assert len(d["atoms"]) == 10
    assert d["atoms"][9]["z"].get() == 6
    assert d.path("atoms[3].name").get() == "C"
    assert d.field_names() == ["comment", "atoms"]


def test_type_errors_are_raised(molecule):
    env, d = molecule
    with pytest.raises(sf.StructFileError):
        d["nonexistent"]
    with pytest.raises(sf.StructFileError):
        d["atoms"][99]
    with pytest.raises(sf.StructFileError):
        d["atoms"][0]["z"].assign(100000)  # out of range for integer*2


def test_binary_file_round_trip(molecule, tmp_path):
    env, d = molecule
    path = str(tmp_path / "molecule.sf")
    sf.write_binary_file(path, d, env, order="be", comments=["from python"])

    lazy = sf.open_binary(path)
    root = lazy.root
    assert root["comment"].get() == "ten carbons"
    assert root["atoms"][4]["partial_charge"].get() == pytest.approx(0.25)
    # lazy access has read less than the whole file so far
    assert lazy.bytes_read < lazy.file_size
    assert root.equals(d)
    assert lazy.comments == ["from python"]


def test_text_file_round_trip(molecule, tmp_path):
    env, d = molecule
    path = str(tmp_path / "molecule.txt.sf")
    sf.write_text_file(path, d, env)
    with open(path, "r", encoding="ascii") as f:
        first = f.readline()
    assert first == "STRUCTURED FILE V0.1 TEXT\n"
    text = d.to_text()
    back = sf.read_text_data(env, text)
    assert back.equals(d)


def test_unions_optionals_and_any(tmp_path):
    env = sf.parse_type_text(
        "struct { u : union { n : integer*4; s : string; }; "
        "optional note : string; payload : any; }"
    )
    d = sf.new_data(env)
    assert d["u"].active_field == 0
    d["u"].set_active_field(1)
    d["u"][1].assign("variant")
    assert not d.field_present("note")
    d.set_field_present("note")
    d["note"].assign("present now")

    with pytest.raises(sf.StructFileError):
        d["payload"].get()  # unbound any rejects reads
    d["payload"].actualize("array[.] of integer*1")
    d["payload"].resize(2)
    d["payload"][0].assign(1)
    d["payload"][1].assign(2)

    path = str(tmp_path / "mixed.sf")
    sf.write_binary_file(path, d, env)
    back = sf.open_binary(path).root
    assert back["u"].active_field == 1
    assert back["u"][1].get() == "variant"
    assert back["note"].get() == "present now"
    # any is transparent when reading
    assert back["payload"].type_text.startswith("array")
    assert back["payload"][1].get() == 2
    assert back.equals(d)


def test_block_store(tmp_path):
    env = sf.parse_type_text("struct { title : string; xs : array of integer*4; }")
    path = str(tmp_path / "store.blk")
    store = sf.create_store(path, env)
    root = store.root
    root["title"].assign("persistent")
    root["xs"].resize(100)
    for i in range(100):
        root["xs"][i].assign(i * i)
    store.verify()
    store.audit_layout()
    store.close()

    reopened = sf.open_store(path)
    assert reopened.root["title"].get() == "persistent"
    assert reopened.root["xs"][7].get() == 49


def test_type_descriptor_round_trip():
    env = sf.parse_type_text("struct { a : integer*2; b : array of real*4; }")
    desc = sf.type_to_data(env)
    assert sf.data_to_type(desc) == "struct {\n    a : integer*2;\n    b : array[.] of real*4;\n}"
