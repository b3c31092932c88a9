import json
from collections import Counter
from io import StringIO
from pathlib import Path

from django.test import SimpleTestCase

from clonedex.bench import random_corpus
from clonedex.config import DetectionConfig, OutputFormat
from clonedex.detector import ClonePair, detect_all
from clonedex.exceptions import IoFailure
from clonedex.reporter import (
    CSV_FIELDS,
    CsvPairRow,
    MarkerLevel,
    build_grouped_report,
    classify_marker,
    parse_csv,
    render_csv,
    render_grouped,
    render_json,
    write_pairs,
)
from clonedex.tokenizer import BlockRef

from .fixtures import TempTreeMixin, distinct_block, seeded

GOLDEN_CSV = Path(__file__).parent / "data" / "pairs_golden.csv"


def copy_pair(project_a="p1", project_b="p1"):
    tokens = [f"t{i}" for i in range(8)]
    return detect_all([distinct_block("left", tokens, project_a), distinct_block("right", tokens, project_b)],
                      DetectionConfig(min_tokens=1))


class MarkerTests(SimpleTestCase):

    def test_breakpoints_at_five_and_ten(self):
        for count in range(0, 21):
            expected = MarkerLevel.GREEN if count < 5 else MarkerLevel.YELLOW if count <= 10 else MarkerLevel.RED
            self.assertIs(classify_marker(count), expected)

    def test_sample_counts(self):
        self.assertEqual(classify_marker(12), MarkerLevel.RED)
        self.assertEqual(classify_marker(7), MarkerLevel.YELLOW)
        self.assertEqual(classify_marker(3), MarkerLevel.GREEN)


class FlatReportTests(TempTreeMixin, SimpleTestCase):

    def test_empty_reports(self):
        self.assertEqual(render_csv([]), ",".join(CSV_FIELDS) + "\n")
        self.assertEqual(json.loads(render_json([])), [])

    def test_self_copy_similarity(self):
        text = render_csv(copy_pair())
        lines = text.splitlines()
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[1].endswith(",1.0000"))

    def test_csv_round_trip(self):
        pairs = detect_all(random_corpus(80, seeded(6)), DetectionConfig(theta=0.6, min_tokens=1))
        self.assertEqual(parse_csv(render_csv(pairs)), [CsvPairRow.from_pair(p) for p in pairs])

    def test_json_has_overlap_and_required(self):
        rows = json.loads(render_json(copy_pair()))
        self.assertEqual(rows[0]["overlap"], 8)
        self.assertEqual(rows[0]["required"], 6)
        self.assertEqual(rows[0]["similarity"], "1.0000")

    def test_byte_stable_output(self):
        pairs = detect_all(random_corpus(60, seeded(8)), DetectionConfig(min_tokens=1))
        self.assertEqual(render_csv(pairs), render_csv(list(pairs)))

    def test_write_to_file_and_stream(self):
        root = self.make_tree({})
        target = root / "reports" / "pairs.json"
        write_pairs(copy_pair(), OutputFormat.JSON, sink=str(target))
        self.assertEqual(json.loads(target.read_text())[0]["project_a"], "p1")

        stream = StringIO()
        write_pairs(copy_pair(), OutputFormat.CSV, stream=stream)
        self.assertTrue(stream.getvalue().startswith("project_a,path_a"))

    def test_csv_matches_golden_file(self):
        alpha_sum = BlockRef(1, "alpha", "/src/alpha/Alpha.java", 2, 10)
        alpha_greet = BlockRef(2, "alpha", "/src/alpha/Alpha.java", 12, 14)
        beta_sum = BlockRef(3, "beta", "/src/beta/Beta.java", 2, 10)
        edited_sum = BlockRef(4, "beta", "/src/beta/Edited.java", 2, 10)
        odd_name = BlockRef(5, "gamma", "/src/gamma/Odd,Name.java", 3, 5)
        pairs = [
            ClonePair(alpha_sum, beta_sum, overlap=40, required=28, similarity=1.0),
            ClonePair(alpha_greet, odd_name, overlap=9, required=9, similarity=0.75),
            ClonePair(beta_sum, edited_sum, overlap=40, required=42, similarity=2 / 3),
        ]
        target = self.make_tree({}) / "pairs.csv"
        write_pairs(pairs, OutputFormat.CSV, sink=str(target))
        self.assertEqual(target.read_bytes(), GOLDEN_CSV.read_bytes())

    def test_unwritable_sink(self):
        root = self.make_tree({"blocker": "not a directory"})
        with self.assertRaises(IoFailure):
            write_pairs([], OutputFormat.CSV, sink=str(Path(root) / "blocker" / "pairs.csv"))


class GroupedReportTests(SimpleTestCase):

    def test_single_project_tree(self):
        report = build_grouped_report(copy_pair())
        self.assertEqual(list(report.tree), ["p1"])
        self.assertEqual(sorted(report.tree["p1"]), ["/fixtures/left.java", "/fixtures/right.java"])

    def test_cross_project_pair_under_both(self):
        report = build_grouped_report(copy_pair("p1", "p2"))
        self.assertEqual(sorted(report.tree), ["p1", "p2"])

    def test_leaves_are_pair_endpoints(self):
        pairs = detect_all(random_corpus(100, seeded(12)), DetectionConfig(theta=0.6, min_tokens=1))
        report = build_grouped_report(pairs)
        self.assertEqual(len(report.leaves()), 2 * len(pairs))
        expected = Counter()
        for pair in pairs:
            expected[(pair.block_a.block_id, pair.block_b.block_id)] += 1
            expected[(pair.block_b.block_id, pair.block_a.block_id)] += 1
        self.assertEqual(Counter(report.leaves()), expected)

    def test_children_sorted(self):
        pairs = detect_all(random_corpus(100, seeded(12)), DetectionConfig(theta=0.6, min_tokens=1))
        report = build_grouped_report(pairs)
        self.assertEqual(list(report.tree), sorted(report.tree))
        for files in report.tree.values():
            self.assertEqual(list(files), sorted(files))
            for nodes in files.values():
                starts = [node.block.start_line for node in nodes]
                self.assertEqual(starts, sorted(starts))

    def test_render_grouped(self):
        text = render_grouped(build_grouped_report(copy_pair()))
        self.assertIn("p1\n  /fixtures/left.java\n    lines 1-8 [green] 1 clone(s)\n", text)
        self.assertEqual(render_grouped(build_grouped_report([])), "")
        self.assertEqual(json.loads(json.dumps(build_grouped_report(copy_pair()).to_dict()))["p1"]
                         ["/fixtures/left.java"][0]["marker"], "green")
