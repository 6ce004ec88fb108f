import pytest

from banzkp.netsim import run
from banzkp.scenario import ScenarioError, load_scenario, parse_scenario

SMALL = """
name = "pair"
modulus_bits = 1096

[[nodes]]
id = 0
[[nodes]]
id = 1
[[nodes]]
id = 2

[[links]]
a = 0
b = 1
[[links]]
a = 1
b = 2
delay_ms = 2.5

[[traffic]]
time_ms = 0
node = 2
data = "temp=36.6"
"""


def test_parse_small_file():
    sc = parse_scenario(SMALL, "pair.toml", seed=4)
    assert sc.name == "pair" and sc.seed == 4 and sc.params.width == 1096
    tr = run(sc)
    assert tr.node_states == {1: "Idle", 2: "Authenticated"}
    assert bytes.fromhex(tr.deliveries[0]["data"]) == b"temp=36.6"


def test_seed_from_file_and_override():
    text = "seed = 9\nmodulus_bits = 1096\n"
    assert parse_scenario(text).seed == 9
    assert parse_scenario(text, seed=2).seed == 2
    with pytest.raises(ScenarioError):
        parse_scenario("modulus_bits = 1096\n")


def test_default_layout_when_no_topology():
    sc = parse_scenario("modulus_bits = 1096\n", seed=1)
    assert sc.topology.ids == list(range(7))
    assert len(sc.traffic) == 6


def test_adversary_entries():
    text = 'modulus_bits = 1096\n[[adversary]]\nkind = "mitm"\nvictim = 5\nvariant = "M2"\n'
    sc = parse_scenario(text, seed=1)
    assert sc.adversaries[0].victim == 5 and sc.adversaries[0].mutate == "M2"
    assert run(sc).node_states[5] == "Aborted"


@pytest.mark.parametrize("text, line", [
    ("seed = 1\nmodulus_bits = 1096\n\n[[traffic]]\nnode = 9\ndata = 'x'\n", 4),
    ("seed = 1\nmodulus_bits = 1096\n[[adversary]]\nkind = 'zap'\n", 3),
    ("seed = \n", 1),
    ("seed = 1\n[[nodes]]\nid = 0\n[[nodes]]\nid = 1\n[[links]]\na = 0\n", 6),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text, "bad.toml")
    assert err.value.line == line
    assert str(err.value).startswith(f"bad.toml:{line}:")


def test_unreachable_topology_is_a_scenario_error():
    text = "seed = 1\nmodulus_bits = 1096\n[[nodes]]\nid = 0\n[[nodes]]\nid = 1\n"
    with pytest.raises(ScenarioError, match="unreachable"):
        parse_scenario(text)


def test_small_modulus_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario("seed = 1\nmodulus_bits = 512\n")


def test_preset_and_missing_file(tmp_path):
    sc = load_scenario("honest7", seed=3, modulus_bits=1096)
    assert sc.name == "honest7" and len(sc.traffic) == 6
    with pytest.raises(ScenarioError):
        load_scenario("honest7")
    with pytest.raises(ScenarioError):
        load_scenario(str(tmp_path / "absent.toml"), seed=1)
    f = tmp_path / "pair.toml"
    f.write_text(SMALL)
    assert load_scenario(str(f), seed=1).name == "pair"
