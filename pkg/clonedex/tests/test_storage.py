import json
import zlib
from pathlib import Path

from django.test import SimpleTestCase

from clonedex.bench import random_corpus
from clonedex.config import DetectionConfig
from clonedex.corpus import discover_files
from clonedex.detector import detect_indexed
from clonedex.exceptions import CorruptIndex, IndexNotLoaded, VersionMismatch
from clonedex.index import CloneIndex
from clonedex.storage import (
    FORMAT_VERSION,
    HEADER,
    MAGIC,
    deserialize_index,
    load_index,
    metadata_path,
    read_metadata,
    save_index,
    serialize_index,
)
from clonedex.tokenizer import SourceFile

from .fixtures import ALPHA_JAVA, BETA_JAVA, TempTreeMixin, seeded


class IndexRoundTripTests(TempTreeMixin, SimpleTestCase):

    def test_random_corpora_detect_identically_after_reload(self):
        for seed in range(10):
            blocks = random_corpus(60, seeded(seed))
            index = CloneIndex.from_blocks(blocks, DetectionConfig(theta=0.7, min_tokens=1))
            restored = deserialize_index(serialize_index(index))
            self.assertEqual(detect_indexed(restored), detect_indexed(index))
            self.assertEqual(restored.postings, index.postings)

    def test_save_and_load(self):
        root = self.make_tree({"Alpha.java": ALPHA_JAVA, "Beta.java": BETA_JAVA})
        files = discover_files([str(root)])
        index = CloneIndex.build(files, DetectionConfig(min_tokens=10))
        path = str(root / "out" / "clones.idx")
        metadata = save_index(index, path)

        loaded = load_index(path)
        self.assertEqual(detect_indexed(loaded), detect_indexed(index))
        self.assertEqual(loaded.files, index.files)
        self.assertEqual(metadata["block_count"], 3)
        self.assertEqual(read_metadata(path)["languages"], ["java"])
        self.assertTrue(Path(metadata_path(path)).is_file())

    def test_serialization_is_deterministic(self):
        blocks = random_corpus(40, seeded(1))
        first = CloneIndex.from_blocks(blocks, DetectionConfig(min_tokens=1))
        second = CloneIndex.from_blocks(list(reversed(blocks)), DetectionConfig(min_tokens=1))
        self.assertEqual(serialize_index(first), serialize_index(second))

    def test_unknown_tokens_survive_reload(self):
        root = self.make_tree({"Alpha.java": ALPHA_JAVA})
        files = discover_files([str(root)])
        index = CloneIndex.build(files, DetectionConfig(min_tokens=10))
        source = files[0]
        index.update_file(SourceFile(source.path, source.project_id,
                                     source.content.replace("total", "brandNewName"), "java"))
        restored = deserialize_index(serialize_index(index))
        self.assertEqual(restored.forward, index.forward)
        self.assertEqual(restored.generation, 1)


class CorruptIndexTests(TempTreeMixin, SimpleTestCase):

    def serialized(self):
        return serialize_index(CloneIndex.from_blocks(random_corpus(10, seeded(0)), DetectionConfig(min_tokens=1)))

    def test_truncated_file(self):
        data = self.serialized()
        with self.assertRaises(CorruptIndex):
            deserialize_index(data[:len(data) // 2])
        with self.assertRaises(CorruptIndex):
            deserialize_index(data[:5])

    def test_bad_magic(self):
        data = self.serialized()
        with self.assertRaises(CorruptIndex):
            deserialize_index(b"XXXX" + data[4:])

    def test_flipped_payload_byte(self):
        data = bytearray(self.serialized())
        data[-1] ^= 0xFF
        with self.assertRaises(CorruptIndex):
            deserialize_index(bytes(data))

    def test_version_mismatch_asks_for_reindex(self):
        data = self.serialized()
        _, _, length, crc = HEADER.unpack_from(data)
        bumped = HEADER.pack(MAGIC, 99, length, crc) + data[HEADER.size:]
        with self.assertRaises(VersionMismatch) as cm:
            deserialize_index(bumped)
        self.assertIn("index", str(cm.exception))

    def test_unusable_threshold_in_payload(self):
        data = self.serialized()
        payload = json.loads(zlib.decompress(data[HEADER.size:]))
        for theta in ("1/0", "0/1", "3/2"):
            payload["theta"] = theta
            body = zlib.compress(json.dumps(payload).encode("utf-8"))
            forged = HEADER.pack(MAGIC, FORMAT_VERSION, len(body), zlib.crc32(body)) + body
            with self.assertRaises(CorruptIndex, msg=theta):
                deserialize_index(forged)

    def test_missing_file(self):
        root = self.make_tree({})
        with self.assertRaises(IndexNotLoaded):
            load_index(str(root / "absent.idx"))

    def test_metadata_absent(self):
        root = self.make_tree({})
        self.assertIsNone(read_metadata(str(root / "absent.idx")))
