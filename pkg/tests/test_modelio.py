import json

import numpy as np
import pytest

from convfield.convnet import ConvNetArch
from convfield.data import LabelAlphabet
from convfield.errors import DataFormatError
from convfield.model import pack, param_count, unpack
from convfield.modelio import load_model, save_model
from convfield.optimize import InitConfig, init_params


ARCH = ConvNetArch(layer_sizes=(3, 5, 4), half_windows=(2, 1), activation="tanh")
ALPHABET = LabelAlphabet(("n", "p"))


class TestPackUnpack:
    def test_round_trip(self):
        params = init_params(ARCH, ALPHABET, InitConfig(seed=7))
        flat = pack(params)
        assert flat.size == param_count(ARCH, 2)
        back = unpack(flat, ARCH, 2)
        for a, b in zip(params.conv, back.conv):
            assert np.array_equal(a, b)
        assert np.array_equal(params.crf.label_weights, back.crf.label_weights)
        assert np.array_equal(params.crf.trans_weights, back.crf.trans_weights)

    def test_layout_order(self):
        params = init_params(ARCH, ALPHABET, InitConfig(seed=8))
        flat = pack(params)
        conv_size = sum(int(np.prod(s)) for s in ARCH.weight_shapes())
        assert np.array_equal(flat[:conv_size],
                              np.concatenate([w.ravel() for w in params.conv]))
        assert np.array_equal(flat[conv_size:conv_size + 2 * 4],
                              params.crf.label_weights.ravel())
        assert np.array_equal(flat[conv_size + 8:], params.crf.trans_weights.ravel())

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            unpack(np.zeros(3), ARCH, 2)


class TestModelFile:
    def test_round_trip_exact(self, tmp_path):
        params = init_params(ARCH, ALPHABET, InitConfig(seed=9))
        path = tmp_path / "model.json"
        save_model(path, params, ALPHABET, {"objective": "auc", "degree": 15})
        back, alphabet, meta = load_model(path)
        assert alphabet.names == ALPHABET.names
        assert meta["objective"] == "auc" and meta["degree"] == 15
        assert np.array_equal(pack(back), pack(params))
        assert back.arch == ARCH

    def test_byte_identical_saves(self, tmp_path):
        params = init_params(ARCH, ALPHABET, InitConfig(seed=10))
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_model(p1, params, ALPHABET)
        save_model(p2, params, ALPHABET)
        assert p1.read_bytes() == p2.read_bytes()

    def test_payload_length_validated(self, tmp_path):
        params = init_params(ARCH, ALPHABET, InitConfig(seed=11))
        path = tmp_path / "model.json"
        save_model(path, params, ALPHABET)
        doc = json.loads(path.read_text())
        doc["payload"] = doc["payload"][:-1]
        path.write_text(json.dumps(doc))
        with pytest.raises(DataFormatError, match="payload"):
            load_model(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            load_model(path)
