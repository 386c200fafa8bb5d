import io
import os
import pickle
import tempfile
import unittest as ut

import numpy as np

from loguru import logger

from ioduality.utils import commons
from ioduality.utils.cache import NearFieldCache
from ioduality.utils.cache import decode_nearfield
from ioduality.utils.cache import encode_nearfield
from ioduality.utils.log import configure_logging
from ioduality.utils.log import silenced


class TestCommons(ut.TestCase):
    def test_sha256(self):
        with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as OUT:
            OUT.write("ioduality")
        self.assertEqual(commons.sha256sum(OUT.name), commons.sha256_text("ioduality"))
        os.remove(OUT.name)
        self.assertEqual(len(commons.sha256_text("")), 64)

    def test_canonical_text(self):
        text = commons.canonical_text({"b.x": 0.1, "a": [2, 16.0], "c": "kite", "d": None})
        self.assertEqual(text, 'a=[2,16.0]\nb.x=0.1\nc="kite"\nd=null\n')
        # ordering of the mapping does not matter
        self.assertEqual(
            commons.canonical_text({"x": 1, "y": np.float64(0.3)}),
            commons.canonical_text({"y": 0.3, "x": 1}),
        )

    def test_flatten(self):
        nested = {"geometry": {"obstacle": {"radius": 1.0}, "source": {"radius": 0.3}}, "k": 1}
        flat = commons.flatten_dict(nested)
        self.assertDictEqual(
            flat, {"geometry.obstacle.radius": 1.0, "geometry.source.radius": 0.3, "k": 1}
        )
        self.assertDictEqual(commons.unflatten_dict(flat), nested)
        with self.assertRaises(ValueError):
            commons.unflatten_dict({"a": 1, "a.b": 2})


class TestCache(ut.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.entries = np.arange(12).reshape(3, 4) * (1 + 0.5j)

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_record(self):
        payload = encode_nearfield(self.entries, 2.25, 3)
        entries, lam, route_tag = decode_nearfield(payload)
        np.testing.assert_array_equal(entries, self.entries)
        self.assertEqual((lam, route_tag), (2.25, 3))
        with self.assertRaises(ValueError):
            decode_nearfield(payload[:-16])
        with self.assertRaises(ValueError):
            decode_nearfield(b"XXXX" + payload[4:])
        with self.assertRaises(ValueError):
            decode_nearfield(b"NFD")

    def test_put_get(self):
        cache = NearFieldCache(self.tmpdir.name, config_hash="abc")
        key = cache.key(2.25, (3, 4), 1)
        self.assertNotIn(key, cache)
        self.assertIsNone(cache.get(key))
        cache.put(key, self.entries, 2.25, 1)
        self.assertIn(key, cache)
        self.assertEqual(len(cache), 1)
        entries, lam, route_tag = cache.get(key)
        np.testing.assert_array_equal(entries, self.entries)
        self.assertEqual((lam, route_tag), (2.25, 1))
        cache.clear()
        self.assertEqual(len(cache), 0)

    def test_keys(self):
        cache = NearFieldCache(self.tmpdir.name, config_hash="abc")
        other = NearFieldCache(self.tmpdir.name, config_hash="abd")
        key = cache.key(2.25, (3, 4), 1)
        self.assertEqual(key, cache.key(2.25, (3, 4), 1))
        self.assertNotEqual(key, other.key(2.25, (3, 4), 1))
        self.assertNotEqual(key, cache.key(2.25, (3, 4), 2))
        self.assertNotEqual(key, cache.key(2.25 + 1e-15, (3, 4), 1))

    def test_corrupt_record(self):
        cache = NearFieldCache(self.tmpdir.name, config_hash="abc")
        key = cache.key(2.25, (3, 4), 1)
        cache.put(key, self.entries, 2.25, 1)
        with open(cache.path(key), "wb") as OUT:
            OUT.write(b"garbage")
        messages = []
        handler = logger.add(messages.append, level="WARNING")
        try:
            self.assertIsNone(cache.get(key))
        finally:
            logger.remove(handler)
        self.assertEqual(len(messages), 1)
        self.assertIn("corrupt", messages[0])

    def test_in_memory_pickle(self):
        cache = NearFieldCache(self.tmpdir.name, config_hash="abc", in_memory=True)
        key = cache.key(1.0, (3, 4), 1)
        cache.put(key, self.entries, 1.0, 1)
        clone = pickle.loads(pickle.dumps(cache))
        self.assertEqual(clone._memory, {})
        np.testing.assert_array_equal(clone.get(key)[0], self.entries)


class TestLogging(ut.TestCase):
    def test_configure(self):
        sink = io.StringIO()
        configure_logging("warning", sink=sink)
        logger.info("hidden")
        logger.warning("shown")
        self.assertNotIn("hidden", sink.getvalue())
        self.assertIn("shown", sink.getvalue())
        with silenced(__name__):
            logger.warning("muted")
        self.assertNotIn("muted", sink.getvalue())
        configure_logging("info")
