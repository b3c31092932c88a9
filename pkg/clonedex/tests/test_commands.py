import json
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from clonedex.config import config
from clonedex.reporter import CSV_FIELDS, parse_csv
from clonedex.storage import load_index

from .fixtures import ALPHA_JAVA, BETA_JAVA, GAMMA_JAVA, TempTreeMixin

# sumPositive with one extra `* 2`: a clone at 0.7, not at 1.0
EDITED_JAVA = ALPHA_JAVA.replace("Alpha", "Edited").replace("total += values[i];", "total += values[i] * 2;")


class CommandTestCase(TempTreeMixin, SimpleTestCase):

    def setUp(self):
        self.root = self.make_tree({
            "alpha/Alpha.java": ALPHA_JAVA,
            "beta/Beta.java": BETA_JAVA,
            "beta/Edited.java": EDITED_JAVA,
            "gamma/Gamma.java": GAMMA_JAVA,
        })
        self.work = self.make_tree({})
        self.index_path = str(self.work / "clones.idx")

    def run_command(self, name, *args, **options):
        out, err = StringIO(), StringIO()
        call_command(name, *args, stdout=out, stderr=err, **options)
        return out.getvalue()

    def build_index(self, **options):
        options.setdefault("min_tokens", 20)
        return self.run_command("index", roots=[str(self.root)], project_layout="children",
                                index=self.index_path, **options)


class IndexCommandTests(CommandTestCase):

    def test_summary_and_index_file(self):
        output = self.build_index()
        self.assertIn("Indexed 4 files", output)
        self.assertIn("4 blocks", output)
        index = load_index(self.index_path)
        self.assertEqual(len(index.forward), 4)
        self.assertEqual(sorted({sb.ref.project_id for sb in index.forward}), ["alpha", "beta", "gamma"])
        self.assertEqual(len(index.postings), sum(min(sb.prefix_len, sb.distinct) for sb in index.forward))

    def test_rerun_is_byte_identical(self):
        self.build_index()
        first = Path(self.index_path).read_bytes()
        self.build_index()
        self.assertEqual(Path(self.index_path).read_bytes(), first)

    def test_empty_directory(self):
        empty = self.make_tree({})
        output = self.run_command("index", roots=[str(empty)], index=self.index_path)
        self.assertIn("Indexed 0 files: 0 blocks", output)
        self.assertEqual(len(load_index(self.index_path).forward), 0)

    def test_unreadable_root(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("index", roots=[str(self.work / "missing")], index=self.index_path)
        self.assertEqual(cm.exception.returncode, 2)

    def test_roots_required(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("index", index=self.index_path)
        self.assertEqual(cm.exception.returncode, 2)

    def test_language_filter(self):
        (self.root / "alpha" / "util.c").write_text("int twice(int x) { return x + x; }\n")
        output = self.build_index(lang=["c"], min_tokens=1)
        self.assertIn("Indexed 1 files", output)


class DetectCommandTests(CommandTestCase):

    def test_csv_from_saved_index(self):
        self.build_index()
        rows = parse_csv(self.run_command("detect", index=self.index_path))
        self.assertEqual(len(rows), 3)
        self.assertTrue(all(row.path_a.endswith(".java") for row in rows))

    def test_threshold_one_reports_exact_duplicates_only(self):
        self.build_index()
        rows = parse_csv(self.run_command("detect", index=self.index_path, threshold=1.0))
        self.assertEqual(len(rows), 1)
        self.assertEqual({Path(rows[0].path_a).name, Path(rows[0].path_b).name}, {"Alpha.java", "Beta.java"})
        self.assertEqual(rows[0].similarity, "1.0000")

    def test_scope_inter(self):
        self.build_index()
        rows = parse_csv(self.run_command("detect", index=self.index_path, scope="inter"))
        self.assertEqual(len(rows), 2)
        self.assertTrue(all(row.project_a != row.project_b for row in rows))

    def test_scope_inter_on_single_project(self):
        output = self.run_command("detect", roots=[str(self.root)], min_tokens=20, scope="inter")
        self.assertEqual(output, ",".join(CSV_FIELDS) + "\n")

    def test_index_on_the_fly_matches_saved_index(self):
        self.build_index()
        saved = self.run_command("detect", index=self.index_path)
        on_the_fly = self.run_command("detect", roots=[str(self.root)], project_layout="children", min_tokens=20)
        self.assertEqual(on_the_fly, saved)

    def test_json_and_tree_formats(self):
        self.build_index()
        rows = json.loads(self.run_command("detect", index=self.index_path, format="json"))
        self.assertEqual(len(rows), 3)
        self.assertEqual(set(rows[0]), set(CSV_FIELDS) | {"overlap", "required"})
        tree = self.run_command("detect", index=self.index_path, format="tree")
        self.assertTrue(tree.startswith("alpha\n"))

    def test_out_file(self):
        self.build_index()
        target = self.work / "reports" / "pairs.csv"
        self.assertEqual(self.run_command("detect", index=self.index_path, out=str(target)), "")
        self.assertEqual(len(parse_csv(target.read_text())), 3)

    def test_workers(self):
        self.build_index()
        self.assertEqual(self.run_command("detect", index=self.index_path, workers=2),
                         self.run_command("detect", index=self.index_path))

    def test_missing_index_and_roots(self):
        with mock.patch.object(config, "INDEX_PATH", str(self.work / "absent.idx")):
            with self.assertRaises(CommandError) as cm:
                self.run_command("detect")
        self.assertEqual(cm.exception.returncode, 2)

    def test_corrupt_index(self):
        Path(self.index_path).write_bytes(b"CLDX garbage")
        with self.assertRaises(CommandError) as cm:
            self.run_command("detect", index=self.index_path)
        self.assertEqual(cm.exception.returncode, 2)

    def test_stored_threshold_is_kept_without_a_flag(self):
        self.build_index(threshold=1.0)
        self.assertEqual(len(parse_csv(self.run_command("detect", index=self.index_path))), 1)
        rows = parse_csv(self.run_command("detect", index=self.index_path, threshold=0.7))
        self.assertEqual(len(rows), 3)

    def test_build_settings_must_match_the_index(self):
        self.build_index()
        self.assertEqual(len(parse_csv(self.run_command("detect", index=self.index_path, min_tokens=20))), 3)
        for option, value in [("granularity", "file"), ("min_tokens", 30), ("normalize_identifiers", True)]:
            with self.assertRaises(CommandError) as cm:
                self.run_command("detect", index=self.index_path, **{option: value})
            self.assertEqual(cm.exception.returncode, 2)
            self.assertIn(option.replace("_", "-"), str(cm.exception))


class ConfigFileTests(CommandTestCase):

    def write_config(self, text):
        path = self.work / "clonedex.conf"
        path.write_text(text)
        return str(path)

    def test_config_file_values_apply(self):
        self.build_index()
        conf = self.write_config("threshold=1.0\n")
        rows = parse_csv(self.run_command("detect", index=self.index_path, config=conf))
        self.assertEqual(len(rows), 1)

    def test_flags_override_config_file(self):
        self.build_index()
        conf = self.write_config("threshold=1.0\nscope=inter\n")
        rows = parse_csv(self.run_command("detect", index=self.index_path, config=conf, threshold=0.7))
        self.assertEqual(len(rows), 2)

    def test_dashed_keys_and_lists(self):
        conf = self.write_config(f"roots={self.root}\nproject-layout=children\nmin-tokens=20\n")
        rows = parse_csv(self.run_command("detect", config=conf))
        self.assertEqual(len(rows), 3)

    def test_unknown_key(self):
        conf = self.write_config("thresold=0.8\n")
        with self.assertRaises(CommandError) as cm:
            self.run_command("detect", index=self.index_path, config=conf)
        self.assertEqual(cm.exception.returncode, 2)

    def test_invalid_threshold(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("detect", roots=[str(self.root)], threshold=1.5)
        self.assertEqual(cm.exception.returncode, 2)


class QueryCommandTests(CommandTestCase):

    def alpha(self):
        return str(self.root / "alpha" / "Alpha.java")

    def test_human_output(self):
        self.build_index()
        output = self.run_command("query", self.alpha(), "4", index=self.index_path)
        lines = output.splitlines()
        self.assertTrue(lines[0].endswith("Alpha.java:2-10 [green] 2 clone(s)"))
        self.assertIn("  beta", lines)
        self.assertEqual(sum(1 for line in lines if line.strip().startswith("lines ")), 2)

    def test_json_output(self):
        self.build_index()
        response = json.loads(self.run_command("query", self.alpha(), "4", index=self.index_path, json=True))
        self.assertTrue(response["ok"])
        self.assertEqual(response["marker"], "green")
        self.assertEqual(sorted(Path(c["file"]).name for c in response["clones"]), ["Beta.java", "Edited.java"])

    def test_threshold_override(self):
        self.build_index()
        response = json.loads(self.run_command("query", self.alpha(), "4", index=self.index_path,
                                               json=True, threshold=1.0))
        self.assertEqual([Path(c["file"]).name for c in response["clones"]], ["Beta.java"])

    def test_no_block_at_location(self):
        self.build_index()
        with self.assertRaises(CommandError) as cm:
            self.run_command("query", self.alpha(), "11", index=self.index_path)
        self.assertEqual(cm.exception.returncode, 3)

    def test_missing_index(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("query", self.alpha(), "4", index=str(self.work / "absent.idx"))
        self.assertEqual(cm.exception.returncode, 2)

    def test_config_file_granularity_must_match_the_index(self):
        self.build_index()
        conf = self.work / "file.conf"
        conf.write_text("granularity=file\n")
        with self.assertRaises(CommandError) as cm:
            self.run_command("query", self.alpha(), "4", index=self.index_path, config=str(conf))
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn("granularity=file (index built with method)", str(cm.exception))


class BenchCommandTests(CommandTestCase):

    def test_recall_table_json(self):
        document = json.loads(self.run_command("bench", per_type=10, json=True))
        rows = {row["type"]: row for row in document["recall"]}
        self.assertEqual(sorted(rows), ["1", "2", "2n", "3"])
        self.assertEqual(rows["1"]["recall"], 1.0)
        self.assertEqual(rows["2n"]["recall"], 1.0)
        self.assertEqual(rows["3"]["expected_recall"], 1.0)

    def test_text_output_with_oracle(self):
        with mock.patch("clonedex.management.commands.bench.run_oracle_suite") as suite:
            from clonedex.bench import run_oracle_suite
            suite.return_value = run_oracle_suite(sizes=(40,), thetas=(0.7,), seeds=(0,))
            output = self.run_command("bench", per_type=5, oracle=True)
        self.assertIn("Recall over", output)
        self.assertIn("with discrepancies", output)

    def test_missing_seed_corpus(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("bench", seeds=str(self.work / "no-seeds"))
        self.assertEqual(cm.exception.returncode, 2)

    def test_edit_fraction_range(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("bench", edit_fraction=0.5)
        self.assertEqual(cm.exception.returncode, 2)

    def test_throughput_verdict(self):
        output = self.run_command("bench", per_type=5, throughput_kloc=1, min_tokens=20)
        self.assertIn("Throughput verdict: PASS", output)
        self.assertIn("query_p95_limit_ms: 100.0", output)

    def test_missed_throughput_target_fails(self):
        slow = {"index_seconds": 90.0, "index_budget_seconds": 60.0, "query_p95_ms": 12.0,
                "query_p95_limit_ms": 100.0, "index_ok": False, "query_ok": True, "passed": False}
        with mock.patch("clonedex.management.commands.bench.run_throughput", return_value=slow):
            with self.assertRaises(CommandError) as cm:
                self.run_command("bench", per_type=5, throughput_kloc=100)
        self.assertEqual(cm.exception.returncode, 1)


class WatchCommandTests(CommandTestCase):

    def test_stdio_session(self):
        requests = "\n".join([
            json.dumps({"op": "ping"}),
            json.dumps({"op": "query", "file": str(self.root / "alpha" / "Alpha.java"), "line": 4}),
            json.dumps({"op": "query", "file": str(self.root / "alpha" / "Alpha.java"), "line": 11}),
        ]) + "\n"
        output = self.run_command("watch", roots=[str(self.root)], project_layout="children", min_tokens=20,
                                  index=self.index_path, stdio=True, stdin=StringIO(requests))
        answers = [json.loads(line) for line in output.splitlines()]
        self.assertEqual(answers[0], {"ok": True, "pong": True, "generation": 0})
        self.assertEqual(len(answers[1]["clones"]), 2)
        self.assertEqual(answers[2]["error"]["code"], "NoBlockAtLocation")
        self.assertEqual(len(load_index(self.index_path).forward), 4)

    def test_resumes_from_saved_index(self):
        self.build_index()
        (self.root / "beta" / "Edited.java").unlink()
        output = self.run_command("watch", roots=[str(self.root)], project_layout="children", min_tokens=20,
                                  index=self.index_path, stdio=True, stdin=StringIO('{"op": "status"}\n'))
        self.assertEqual(json.loads(output)["blocks"], 3)

    def test_roots_required(self):
        with self.assertRaises(CommandError) as cm:
            self.run_command("watch", index=self.index_path, stdio=True, stdin=StringIO(""))
        self.assertEqual(cm.exception.returncode, 2)

    def status_after_watch(self, **options):
        output = self.run_command("watch", roots=[str(self.root)], project_layout="children",
                                  index=self.index_path, stdio=True, stdin=StringIO('{"op": "status"}\n'),
                                  **options)
        return json.loads(output)

    def test_threshold_applies_to_a_resumed_index(self):
        self.build_index()
        requests = json.dumps({"op": "query", "file": str(self.root / "alpha" / "Alpha.java"), "line": 4}) + "\n"
        output = self.run_command("watch", roots=[str(self.root)], project_layout="children", min_tokens=20,
                                  index=self.index_path, threshold=1.0, stdio=True, stdin=StringIO(requests))
        clones = json.loads(output)["clones"]
        self.assertEqual([Path(c["file"]).name for c in clones], ["Beta.java"])
        self.assertEqual(load_index(self.index_path).theta, 1)

    def test_conflicting_settings_rebuild_the_index(self):
        self.build_index()
        with self.assertLogs("clonedex.management.commands.watch", level="WARNING") as logs:
            status = self.status_after_watch(granularity="file", min_tokens=20)
        self.assertIn("granularity=file (index built with method)", logs.output[0])
        self.assertEqual(status["granularity"], "file")
        self.assertEqual(load_index(self.index_path).granularity.value, "file")
