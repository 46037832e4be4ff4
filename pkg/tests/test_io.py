import json
import math

import pytest

from networks.io import NetworkFormatError, load_network, network_from_dict, save_network
from tests.conftest import random_bipartite, small_dag


def _write(tmp_path, doc, name="net.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


class TestRoundTrip:
    def test_save_then_load_is_identical(self, tmp_path, rng):
        for net in (random_bipartite("sigmoid", 4, 3, rng), small_dag("noisy_or")):
            path = tmp_path / "roundtrip.json"
            save_network(net, path)
            assert load_network(path) == net

    def test_saved_file_is_valid_json(self, tmp_path, noisy_or_net):
        path = tmp_path / "net.json"
        save_network(noisy_or_net, path)
        doc = json.loads(path.read_text())
        assert doc["kind"] == "noisy_or"
        assert doc["layers"]["l2"] == [0, 1, 2]


class TestEdgeParameters:
    def test_q_is_converted_to_theta(self):
        net = network_from_dict({
            "kind": "noisy_or", "n": 2,
            "priors": [{"node": 0, "p": 0.5}],
            "edges": [{"child": 1, "parent": 0, "q": 0.75}],
        })
        assert net.weights[1, 0] == pytest.approx(math.log(4.0), rel=1e-15)

    def test_q_equal_one_is_rejected(self):
        with pytest.raises(NetworkFormatError, match="q=1.0"):
            network_from_dict({
                "kind": "noisy_or", "n": 2,
                "priors": [{"node": 0, "p": 0.5}],
                "edges": [{"child": 1, "parent": 0, "q": 1.0}],
            })

    def test_theta_and_q_together(self):
        with pytest.raises(NetworkFormatError, match="exactly one"):
            network_from_dict({
                "kind": "noisy_or", "n": 2,
                "priors": [{"node": 0, "p": 0.5}],
                "edges": [{"child": 1, "parent": 0, "q": 0.5, "theta": 0.3}],
            })

    def test_q_on_sigmoid_network(self):
        with pytest.raises(NetworkFormatError):
            network_from_dict({
                "kind": "sigmoid", "n": 2,
                "priors": [{"node": 0, "p": 0.5}],
                "edges": [{"child": 1, "parent": 0, "q": 0.5}],
            })


class TestMalformedFiles:
    def test_not_json(self, tmp_path):
        with pytest.raises(NetworkFormatError, match="not valid JSON"):
            load_network(_write(tmp_path, "{kind: sigmoid"))

    def test_missing_field(self, tmp_path):
        with pytest.raises(NetworkFormatError, match="Malformed"):
            load_network(_write(tmp_path, {"kind": "sigmoid", "priors": []}))

    def test_cycle_names_nodes(self, tmp_path):
        doc = {
            "kind": "sigmoid", "n": 2, "priors": [],
            "edges": [{"child": 1, "parent": 0, "theta": 1.0}, {"child": 0, "parent": 1, "theta": 1.0}],
        }
        with pytest.raises(NetworkFormatError, match=r"Cycle detected among nodes \[0, 1\]"):
            load_network(_write(tmp_path, doc))

    def test_prior_out_of_range(self, tmp_path):
        doc = {"kind": "sigmoid", "n": 1, "priors": [{"node": 0, "p": -0.1}], "edges": []}
        with pytest.raises(NetworkFormatError, match="Prior of node 0"):
            load_network(_write(tmp_path, doc))

    def test_missing_file_is_an_os_error(self, tmp_path):
        with pytest.raises(OSError):
            load_network(tmp_path / "absent.json")
